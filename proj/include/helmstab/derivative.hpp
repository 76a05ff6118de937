#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/forward.hpp"
#include "helmstab/model.hpp"
#include "helmstab/solver.hpp"
#include "helmstab/spectrum.hpp"

namespace helmstab {

struct AlessandriniSides {
  /// -omega^2 sum_cells (c1 - c2) vol mean(u v)
  double volume_side = 0.0;
  /// sum_b w_b ((Lambda1 - Lambda2) g)_b h_b with the one-sided stencil
  double boundary_side_sampled = 0.0;
  /// same with the flux DtN (equal to the volume side up to round-off)
  double boundary_side_flux = 0.0;

  double relative_mismatch() const {
    return volume_side == 0.0 ? std::abs(boundary_side_sampled)
                              : std::abs(boundary_side_sampled - volume_side) / std::abs(volume_side);
  }
};

/// Both sides of the bilinear DtN-difference identity for boundary data g, h
/// (boundary slots). u solves with m1 and data g; v solves with m2 and data h.
inline AlessandriniSides alessandrini_pairing(const BoxGrid& grid, std::span<const double> c1,
                                              std::span<const double> c2, const Eigen::VectorXd& g,
                                              const Eigen::VectorXd& h, double omega2) {
  if (c1.size() != grid.num_cells() || c2.size() != grid.num_cells()) {
    throw InvalidArgument("coefficients must have one value per cell");
  }
  const auto s1 = assemble(grid, c1, omega2);
  const auto s2 = assemble(grid, c2, omega2);
  const Eigen::VectorXd u = solve_dirichlet(s1, g);
  const Eigen::VectorXd u2 = solve_dirichlet(s2, g);
  const Eigen::VectorXd v = solve_dirichlet(s2, h);
  std::vector<double> dq(grid.num_cells());
  for (std::size_t k = 0; k < dq.size(); ++k) dq[k] = c1[k] - c2[k];
  AlessandriniSides out;
  out.volume_side = -omega2 * volume_pairing(grid, dq, u, v);
  out.boundary_side_sampled = boundary_pairing(grid, normal_derivative(grid, u) - normal_derivative(grid, u2), h);
  const Eigen::VectorXd df = flux_dtn(s1, u).col(0) - flux_dtn(s2, u2).col(0);
  out.boundary_side_flux = boundary_pairing(grid, df, h);
  return out;
}

inline AlessandriniSides alessandrini_pairing(const SquaredSlownessModel& m1, const SquaredSlownessModel& m2,
                                              const Eigen::VectorXd& g, const Eigen::VectorXd& h, double omega2,
                                              bool override_window_check = false) {
  if (!m1.grid().same_shape(m2.grid())) throw InvalidArgument("models live on different grids");
  check_window(m1, omega2, override_window_check);
  check_window(m2, omega2, override_window_check);
  return alessandrini_pairing(m1.grid(), to_cell_field(m1), to_cell_field(m2), g, h, omega2);
}

/// Derivative of the data matrix along a per-subdomain direction.
struct DirectionalDerivative {
  std::uint64_t base_hash = 0;
  std::vector<double> direction;
  double omega2 = 0.0;
  Acquisition acquisition;
  DtnKind kind = DtnKind::sampled;
  Eigen::MatrixXd values;
};

enum class DerivativeRoute {
  adjoint,  // entry = omega^2 sum_nodes dc u_s v_r with v_r the receiver adjoint field
  tangent,  // entry = receiver functional of w, (-Delta_h - omega^2 c) w = omega^2 dc u_s, w = 0 on the boundary
};

struct DerivativeOptions {
  DerivativeRoute route = DerivativeRoute::adjoint;
  DtnKind kind = DtnKind::sampled;
  unsigned workers = 0;
  bool override_window_check = false;
};

namespace detail {

// Interior part of a receiver functional as a vector over interior slots,
// plus the boundary self-coefficient (flux kind: mass term), so that
//   receiver(u) = ell . u_i + const(g) - omega^2 self_mass dc_r g_r / w_r.
struct ReceiverFunctional {
  Eigen::VectorXd interior;
  double self_mass = 0.0;  // node_volume / w_r (flux kind only)
};

inline ReceiverFunctional receiver_functional(const HelmholtzSystem& sys, const BoundaryPoint& r, DtnKind kind) {
  const BoxGrid& g = sys.grid();
  ReceiverFunctional f;
  f.interior = Eigen::VectorXd::Zero(g.num_interior());
  if (kind == DtnKind::sampled) {
    std::ptrdiff_t stride = 0;
    neighbor_offsets(g, r.face.axis, stride);
    const std::ptrdiff_t step = r.face.side == 0 ? stride : -stride;
    const double inv = 1.0 / (2.0 * g.spacing(r.face.axis));
    const std::array<double, 2> coef{-4.0 * inv, 1.0 * inv};
    for (int k = 1; k <= 2; ++k) {
      const auto n = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r.node) + k * step);
      if (!g.is_boundary_node(n)) f.interior[g.slot(n)] += coef[k - 1];
    }
  } else {
    const double w = g.boundary_weight(r.slot);
    const auto& b = sys.boundary_interior();
    for (Eigen::Index col = 0; col < b.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(b, col); it; ++it)
        if (it.row() == static_cast<Eigen::Index>(r.slot)) f.interior[col] += it.value() / w;
    f.self_mass = g.node_volume(r.node) / w;
  }
  return f;
}

inline Eigen::VectorXd interior_part(const BoxGrid& g, const Eigen::VectorXd& u) {
  Eigen::VectorXd ui(g.num_interior());
  for (std::size_t s = 0; s < g.num_interior(); ++s) ui[s] = u[g.interior_nodes()[s]];
  return ui;
}

}  // namespace detail

/// Precomputed source fields and receiver adjoint fields on a base model.
/// Applying a direction costs one dense product; no further solves.
class DerivativeFields {
 public:
  DerivativeFields(const HelmholtzSystem& sys, const Acquisition& acq, DtnKind kind, unsigned workers = 0)
      : sys_(&sys), acq_(acq), kind_(kind) {
    const BoxGrid& g = sys.grid();
    const auto ns = static_cast<Eigen::Index>(acq.num_sources());
    const auto nr = static_cast<Eigen::Index>(acq.num_receivers());
    u_.resize(static_cast<Eigen::Index>(g.num_interior()), ns);
    ell_.resize(static_cast<Eigen::Index>(g.num_interior()), nr);
    v_.resize(static_cast<Eigen::Index>(g.num_interior()), nr);
    gsrc_.resize(nr, ns);
    self_mass_.resize(nr);
    const unsigned w = resolve_workers(workers);
    parallel_for_each(acq.num_sources(), w, [&](std::size_t s) {
      const Eigen::VectorXd src = gaussian_source(g, acq.sources[s].position, acq.sigma);
      u_.col(static_cast<Eigen::Index>(s)) = detail::interior_part(g, solve_dirichlet(sys, src));
      for (std::size_t r = 0; r < acq.num_receivers(); ++r)
        gsrc_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = src[acq.receivers[r].slot];
    });
    parallel_for_each(acq.num_receivers(), w, [&](std::size_t r) {
      const auto f = detail::receiver_functional(sys, acq.receivers[r], kind);
      ell_.col(static_cast<Eigen::Index>(r)) = f.interior;
      self_mass_[static_cast<Eigen::Index>(r)] = f.self_mass;
      v_.col(static_cast<Eigen::Index>(r)) = solve_interior(sys, f.interior);
    });
  }

  const HelmholtzSystem& system() const { return *sys_; }
  const Acquisition& acquisition() const { return acq_; }

  /// Interior-node values of the direction (mean of adjacent cells).
  Eigen::VectorXd interior_direction(std::span<const double> cell_direction) const {
    const BoxGrid& g = sys_->grid();
    const auto dn = node_coefficients(g, cell_direction);
    Eigen::VectorXd d(g.num_interior());
    for (std::size_t s = 0; s < g.num_interior(); ++s) d[s] = dn[g.interior_nodes()[s]];
    return d;
  }

  Eigen::MatrixXd apply(std::span<const double> cell_direction, DerivativeRoute route) const {
    const BoxGrid& g = sys_->grid();
    const double w2 = sys_->omega2();
    const Eigen::VectorXd d = interior_direction(cell_direction);
    Eigen::MatrixXd out;
    if (route == DerivativeRoute::adjoint) {
      out = w2 * (u_.transpose() * d.asDiagonal() * v_);
    } else {
      const Eigen::MatrixXd rhs = w2 * (d.asDiagonal() * u_);
      const Eigen::MatrixXd wfield = solve_interior(*sys_, rhs);
      out = (ell_.transpose() * wfield).transpose();
    }
    if (kind_ == DtnKind::flux) {
      const auto dn = node_coefficients(g, cell_direction);
      for (Eigen::Index r = 0; r < out.cols(); ++r) {
        const double dr = dn[acq_.receivers[static_cast<std::size_t>(r)].node];
        out.col(r) -= w2 * self_mass_[r] * dr * gsrc_.row(r).transpose();
      }
    }
    return out;
  }

 private:
  const HelmholtzSystem* sys_;
  Acquisition acq_;
  DtnKind kind_;
  Eigen::MatrixXd u_;     // interior source fields, one column per source
  Eigen::MatrixXd ell_;   // receiver functionals
  Eigen::MatrixXd v_;     // A_ii^-1 ell_r
  Eigen::MatrixXd gsrc_;  // source data at receiver slots
  Eigen::VectorXd self_mass_;
};

inline void check_direction(const SquaredSlownessModel& base, std::span<const double> direction) {
  if (direction.size() != base.size()) throw InvalidArgument("direction needs one value per subdomain");
  for (double x : direction)
    if (!std::isfinite(x)) throw InvalidArgument("direction values must be finite");
}

/// DF[c](dc) as a data matrix (receivers point-sample the normal derivative).
inline DirectionalDerivative frechet_directional(const SquaredSlownessModel& base, std::span<const double> direction,
                                                 double omega2, const Acquisition& acq,
                                                 const DerivativeOptions& opts = {}) {
  check_direction(base, direction);
  check_window(base, omega2, opts.override_window_check);
  const auto sys = assemble(base.grid(), to_cell_field(base), omega2);
  const DerivativeFields fields(sys, acq, opts.kind, opts.workers);
  DirectionalDerivative d;
  d.base_hash = base.fingerprint();
  d.direction.assign(direction.begin(), direction.end());
  d.omega2 = omega2;
  d.acquisition = acq;
  d.kind = opts.kind;
  d.values = fields.apply(to_cell_field(base.partition(), direction), opts.route);
  return d;
}

/// Pairing form: entry (s, r) = -omega^2 sum_cells dc vol mean(u_s u_r) with
/// both fields driven by Gaussians (receivers use the source shape).
inline Eigen::MatrixXd frechet_pairing_matrix(const SquaredSlownessModel& base, std::span<const double> direction,
                                              double omega2, const Acquisition& acq, unsigned workers = 0,
                                              bool override_window_check = false) {
  check_direction(base, direction);
  check_window(base, omega2, override_window_check);
  const BoxGrid& g = base.grid();
  const auto sys = assemble(g, to_cell_field(base), omega2);
  const auto dq = to_cell_field(base.partition(), direction);
  auto fields = [&](const std::vector<BoundaryPoint>& pts) {
    Eigen::MatrixXd u(g.num_nodes(), pts.size());
    parallel_for_each(pts.size(), resolve_workers(workers), [&](std::size_t k) {
      u.col(static_cast<Eigen::Index>(k)) = solve_dirichlet(sys, gaussian_source(g, pts[k].position, acq.sigma));
    });
    return u;
  };
  const Eigen::MatrixXd us = fields(acq.sources);
  const Eigen::MatrixXd ur = fields(acq.receivers);
  Eigen::MatrixXd out(us.cols(), ur.cols());
  for (Eigen::Index s = 0; s < us.cols(); ++s)
    for (Eigen::Index r = 0; r < ur.cols(); ++r)
      out(s, r) = -omega2 * volume_pairing(g, dq, us.col(s), ur.col(r));
  return out;
}

struct TaylorCheck {
  double epsilon = 0.0;
  double residual = 0.0;       // ||F(c + eps dc) - F(c) - eps DF(dc)|| at epsilon
  double residual_half = 0.0;  // same at epsilon / 2
  double ratio = 0.0;          // residual / residual_half, about 4 for a first derivative
  double central_slope_error = 0.0;  // ||(F(c+eps dc) - F(c-eps dc)) / (2 eps) - DF(dc)|| / ||DF(dc)||
};

/// Finite-difference validation of DF along a direction. epsilon <= 0 picks
/// 1e-3 ||base||_inf. Norms are weighted Frobenius over the acquisition.
inline TaylorCheck taylor_check(const SquaredSlownessModel& base, std::span<const double> direction, double omega2,
                                const Acquisition& acq, double epsilon = 0.0, const DerivativeOptions& opts = {}) {
  check_direction(base, direction);
  if (!(epsilon > 0.0)) epsilon = 1e-3 * base.max_value();
  const BoxGrid& g = base.grid();
  const auto c0 = to_cell_field(base);
  const auto dq = to_cell_field(base.partition(), direction);
  ForwardOptions fo;
  fo.kind = opts.kind;
  fo.workers = opts.workers;
  auto data = [&](double t) {
    std::vector<double> c(c0);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += t * dq[k];
    return forward_values(assemble(g, c, omega2), acq, fo);
  };
  const auto d = frechet_directional(base, direction, omega2, acq, opts);
  const Eigen::MatrixXd f0 = data(0.0);
  auto norm = [&](const Eigen::MatrixXd& m) { return weighted_operator_norm(acq, m).frobenius; };
  TaylorCheck out;
  out.epsilon = epsilon;
  const Eigen::MatrixXd fp = data(epsilon);
  out.residual = norm(fp - f0 - epsilon * d.values);
  out.residual_half = norm(data(0.5 * epsilon) - f0 - 0.5 * epsilon * d.values);
  out.ratio = out.residual / out.residual_half;
  const double dn = norm(d.values);
  out.central_slope_error = norm((fp - data(-epsilon)) / (2.0 * epsilon) - d.values) / (dn > 0.0 ? dn : 1.0);
  return out;
}

/// Distance from omega^2 to the discrete Dirichlet spectrum of a coefficient.
inline double spectral_distance(const BoxGrid& g, std::span<const double> coeff, double omega2,
                                const EigenOptions& opts = {}) {
  const int cap = static_cast<int>(g.num_interior());
  int count = std::min(4, cap);
  for (;;) {
    const auto ev = discrete_dirichlet_eigenvalues(g, coeff, count, opts);
    double best = std::numeric_limits<double>::infinity();
    for (double l : ev) best = std::min(best, std::abs(l - omega2));
    if (ev.back() > omega2 + best || count >= cap) return best;
    count = std::min(cap, 2 * count);
  }
}

struct DirectionNorm {
  std::size_t index = 0;  // subdomain for canonical directions, sample number otherwise
  double opnorm = 0.0;
  double frobenius = 0.0;
};

struct FrechetNormReport {
  double omega2 = 0.0;
  bool canonical = true;  // e_j directions (else random unit directions)
  std::vector<DirectionNorm> directions;
  double min_norm = 0.0;
  double max_norm = 0.0;
  double spectral_distance = 0.0;
  /// omega^2 (1 + omega^2 / d)^2, the growth shape of the upper bound.
  double upper_shape = 0.0;
  /// max_norm / upper_shape: the constant that makes the upper shape tight.
  double upper_constant = 0.0;
  /// -log(min_norm / omega^2): exponent that makes the lower shape tight.
  double lower_exponent = 0.0;
};

struct FrechetReportOptions {
  std::size_t max_canonical = 64;
  std::size_t samples = 32;
  std::uint64_t seed = 0x5eed;
  DtnKind kind = DtnKind::sampled;
  unsigned workers = 0;
  bool override_window_check = false;
};

/// Operator norms of DF over unit-L2 directions, next to the bound shapes.
/// Report only; nothing is asserted.
inline FrechetNormReport frechet_norm_bounds_report(const SquaredSlownessModel& base, double omega2,
                                                    const Acquisition& acq, const FrechetReportOptions& opts = {}) {
  check_window(base, omega2, opts.override_window_check);
  const BoxGrid& g = base.grid();
  const auto& p = base.partition();
  const auto coeff = to_cell_field(base);
  const auto sys = assemble(g, coeff, omega2);
  const DerivativeFields fields(sys, acq, opts.kind, opts.workers);

  FrechetNormReport rep;
  rep.omega2 = omega2;
  rep.canonical = p.size() <= opts.max_canonical;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  const std::size_t count = rep.canonical ? p.size() : opts.samples;
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> dir(p.size(), 0.0);
    if (rep.canonical) {
      dir[k] = 1.0 / std::sqrt(p.volume(static_cast<int>(k)));
    } else {
      double l2 = 0.0;
      for (std::size_t j = 0; j < dir.size(); ++j) {
        dir[j] = normal(rng);
        l2 += dir[j] * dir[j] * p.volume(static_cast<int>(j));
      }
      for (double& x : dir) x /= std::sqrt(l2);
    }
    const auto n = weighted_operator_norm(acq, fields.apply(to_cell_field(p, dir), DerivativeRoute::adjoint));
    rep.directions.push_back({k, n.opnorm, n.frobenius});
  }
  rep.min_norm = std::numeric_limits<double>::infinity();
  for (const auto& d : rep.directions) {
    rep.min_norm = std::min(rep.min_norm, d.opnorm);
    rep.max_norm = std::max(rep.max_norm, d.opnorm);
  }
  rep.spectral_distance = spectral_distance(g, coeff, omega2);
  const double t = 1.0 + omega2 / rep.spectral_distance;
  rep.upper_shape = omega2 * t * t;
  rep.upper_constant = rep.max_norm / rep.upper_shape;
  rep.lower_exponent = rep.min_norm > 0.0 ? -std::log(rep.min_norm / omega2) : std::numeric_limits<double>::infinity();
  return rep;
}

/// CSV: direction, opnorm, frobenius; summary lines are '#' comments.
inline void write_frechet_report_csv(std::ostream& os, const FrechetNormReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "# omega2=%.17g canonical=%d min=%.17g max=%.17g spectral_distance=%.17g upper_shape=%.17g "
                "upper_constant=%.17g lower_exponent=%.17g\n",
                r.omega2, r.canonical ? 1 : 0, r.min_norm, r.max_norm, r.spectral_distance, r.upper_shape,
                r.upper_constant, r.lower_exponent);
  os << buf << "direction,opnorm,frobenius\n";
  for (const auto& d : r.directions) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", d.index, d.opnorm, d.frobenius);
    os << buf;
  }
}

/// Derivative matrices share the DtN file layout under their own magic.
inline DtnData as_dtn_data(const DirectionalDerivative& d) {
  DtnData out;
  out.acquisition = d.acquisition;
  out.omega2 = d.omega2;
  out.values = d.values;
  out.kind = d.kind;
  out.model_hash = d.base_hash;
  return out;
}

}  // namespace helmstab

#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/geometry.hpp"
#include "helmstab/log.hpp"

namespace helmstab {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/// Coefficient at a node: arithmetic mean of the cells touching it.
inline std::vector<double> node_coefficients(const BoxGrid& g, std::span<const double> cell_values) {
  if (cell_values.size() != g.num_cells()) throw InvalidArgument("need one coefficient per cell");
  std::vector<double> out(g.num_nodes());
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    const Index3 m = g.node_multi(n);
    double sum = 0.0;
    int count = 0;
    const int kz = g.dim() == 3 ? 2 : 1;
    for (int dz = 0; dz < kz; ++dz) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const Index3 c{m[0] - dx, m[1] - dy, g.dim() == 3 ? m[2] - dz : 0};
          bool ok = true;
          for (int a = 0; a < g.dim(); ++a) ok = ok && c[a] >= 0 && c[a] < g.cells(a);
          if (!ok) continue;
          sum += cell_values[g.cell_index(c)];
          ++count;
        }
      }
    }
    out[n] = sum / count;
  }
  return out;
}

namespace detail {

// Number of cells sharing the grid edge that starts at node m along axis a.
inline int cells_on_edge(const BoxGrid& g, const Index3& m, int a) {
  int count = 1;
  for (int b = 0; b < g.dim(); ++b) {
    if (b == a) continue;
    const bool end = m[b] == 0 || m[b] == g.nodes(b) - 1;
    count *= end ? 1 : 2;
  }
  return count;
}

inline void neighbor_offsets(const BoxGrid& g, int a, std::ptrdiff_t& stride) {
  stride = 1;
  for (int b = 0; b < a; ++b) stride *= g.nodes(b);
}

}  // namespace detail

/// Reusable sparse direct solve handle for A_ii. Immutable once built; solve
/// calls are safe from several threads at once.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& a) {
    ldlt_.compute(a);
    if (ldlt_.info() == Eigen::Success && pivots_ok()) {
      use_lu_ = false;
      return;
    }
    lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(a);
    lu_->factorize(a);
    if (lu_->info() != Eigen::Success) {
      throw NumericalFailure("sparse factorization failed: " + lu_->lastErrorMessage());
    }
    use_lu_ = true;
  }

  template <typename Rhs>
  Eigen::MatrixXd solve(const Rhs& b) const {
    if (use_lu_) return lu_->solve(b);
    return ldlt_.solve(b);
  }

  bool uses_lu() const { return use_lu_; }

 private:
  bool pivots_ok() const {
    const auto& d = ldlt_.vectorD();
    if (d.size() == 0) return true;
    const double scale = d.cwiseAbs().maxCoeff();
    return d.cwiseAbs().minCoeff() > 1e-14 * scale && d.allFinite();
  }

  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
  bool use_lu_ = false;
};

struct AssembleOptions {
  /// Known discrete eigenvalues of this coefficient; omega^2 within 1e-8
  /// relative of any of them is rejected.
  std::span<const double> cached_eigenvalues{};
  /// Skip the factorization (spectrum code only needs the matrices).
  bool factorize = true;
  /// Optional wall-clock breakdown, in seconds.
  struct Timings {
    double assembly = 0.0;
    double factorization = 0.0;
  }* timings = nullptr;
};

/// Discrete Helmholtz Dirichlet problem (-Delta_h - omega^2 c^-2) u = f,
/// u = g on the boundary, eliminated onto interior unknowns:
///   A_ii u_i = f - A_ib g.
/// A_ii and A_ib use the plain 5/7-point stencil (rows are unscaled).
/// The boundary rows B_bi, B_bb come from the symmetric node-volume weighted
/// energy form; they define the flux DtN map W^-1 (B_bi u_i + B_bb g).
class HelmholtzSystem {
 public:
  const BoxGrid& grid() const { return grid_; }
  std::span<const double> coeff() const { return coeff_; }
  std::span<const double> node_coeff() const { return node_coeff_; }
  double omega2() const { return omega2_; }

  const SparseMatrix& interior_matrix() const { return a_ii_; }
  const SparseMatrix& coupling() const { return a_ib_; }
  const SparseMatrix& boundary_interior() const { return b_bi_; }
  const SparseMatrix& boundary_boundary() const { return b_bb_; }

  bool factorized() const { return static_cast<bool>(factor_); }
  const Factorization& factorization() const {
    if (!factor_) throw NumericalFailure("system was assembled without factorization");
    return *factor_;
  }
  std::shared_ptr<const Factorization> factorization_handle() const { return factor_; }

 private:
  friend HelmholtzSystem assemble(const BoxGrid&, std::span<const double>, double, const AssembleOptions&);

  BoxGrid grid_{std::vector<double>{1.0, 1.0}, std::vector<int>{2, 2}};
  std::vector<double> coeff_;
  std::vector<double> node_coeff_;
  double omega2_ = 0.0;
  SparseMatrix a_ii_;
  SparseMatrix a_ib_;
  SparseMatrix b_bi_;
  SparseMatrix b_bb_;
  std::shared_ptr<const Factorization> factor_;
};

inline HelmholtzSystem assemble(const BoxGrid& g, std::span<const double> coeff, double omega2,
                                const AssembleOptions& opts = {}) {
  if (!(omega2 >= 0.0) || !std::isfinite(omega2)) throw InvalidArgument("omega^2 must be finite and >= 0");
  for (double c : coeff) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("coefficients must be finite and >= 0");
  }
  for (double lam : opts.cached_eigenvalues) {
    if (std::abs(omega2 - lam) <= 1e-8 * std::abs(lam)) {
      std::ostringstream os;
      os << "omega^2 = " << omega2 << " is within 1e-8 of discrete eigenvalue " << lam;
      throw NearResonance(os.str());
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  HelmholtzSystem sys;
  sys.grid_ = g;
  sys.coeff_.assign(coeff.begin(), coeff.end());
  sys.node_coeff_ = node_coefficients(g, coeff);
  sys.omega2_ = omega2;

  const auto ni = static_cast<int>(g.num_interior());
  const auto nb = static_cast<int>(g.num_boundary());
  const double cv = g.cell_volume();
  std::vector<Triplet> tii, tib, tbi, tbb;
  tii.reserve(static_cast<std::size_t>(ni) * (2 * g.dim() + 1));

  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    const Index3 m = g.node_multi(n);
    const bool bnd = g.is_boundary_node(n);
    const int row = static_cast<int>(g.slot(n));
    if (!bnd) {
      double diag = -omega2 * sys.node_coeff_[n];
      for (int a = 0; a < g.dim(); ++a) diag += 2.0 / (g.spacing(a) * g.spacing(a));
      tii.emplace_back(row, row, diag);
    } else {
      // lumped mass of the boundary node: sum over touching cells of c vol / 2^dim
      const double share = g.node_volume(n);
      tbb.emplace_back(row, row, -omega2 * sys.node_coeff_[n] * share);
    }
    for (int a = 0; a < g.dim(); ++a) {
      std::ptrdiff_t stride = 0;
      detail::neighbor_offsets(g, a, stride);
      const double inv_h2 = 1.0 / (g.spacing(a) * g.spacing(a));
      for (int dir = -1; dir <= 1; dir += 2) {
        const int mm = m[a] + dir;
        if (mm < 0 || mm >= g.nodes(a)) continue;
        const auto nn = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + dir * stride);
        const int col = static_cast<int>(g.slot(nn));
        const bool nbnd = g.is_boundary_node(nn);
        if (!bnd) {
          (nbnd ? tib : tii).emplace_back(row, col, -inv_h2);
          continue;
        }
        Index3 lo = m;
        lo[a] = std::min(m[a], mm);
        const double w = detail::cells_on_edge(g, lo, a) * cv * inv_h2 / (g.dim() == 3 ? 4.0 : 2.0);
        tbb.emplace_back(row, row, w);
        (nbnd ? tbb : tbi).emplace_back(row, col, -w);
      }
    }
  }

  sys.a_ii_.resize(ni, ni);
  sys.a_ii_.setFromTriplets(tii.begin(), tii.end());
  sys.a_ib_.resize(ni, nb);
  sys.a_ib_.setFromTriplets(tib.begin(), tib.end());
  sys.b_bi_.resize(nb, ni);
  sys.b_bi_.setFromTriplets(tbi.begin(), tbi.end());
  sys.b_bb_.resize(nb, nb);
  sys.b_bb_.setFromTriplets(tbb.begin(), tbb.end());

  if (omega2 > 0.0) {
    const double cmax = *std::max_element(sys.node_coeff_.begin(), sys.node_coeff_.end());
    if (cmax > 0.0) {
      const double wavelength = 2.0 * std::numbers::pi / (std::sqrt(omega2) * std::sqrt(cmax));
      const double ppw = wavelength / g.max_spacing();
      if (ppw < 8.0) log::warn("grid resolves the shortest wavelength with ", ppw, " points (< 8)");
    }
  }

  const auto t1 = std::chrono::steady_clock::now();
  if (opts.factorize && ni > 0) sys.factor_ = std::make_shared<const Factorization>(sys.a_ii_);
  if (opts.timings) {
    opts.timings->assembly = std::chrono::duration<double>(t1 - t0).count();
    opts.timings->factorization = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  }
  return sys;
}

namespace detail {

inline Eigen::MatrixXd checked_solve(const HelmholtzSystem& sys, const Eigen::MatrixXd& rhs, double tol) {
  const auto& f = sys.factorization();
  Eigen::MatrixXd x = f.solve(rhs);
  const auto& a = sys.interior_matrix();
  for (int step = 0;; ++step) {
    Eigen::MatrixXd r = rhs - a * x;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < rhs.cols(); ++k) {
      const double nb = rhs.col(k).norm();
      if (nb > 0.0) worst = std::max(worst, r.col(k).norm() / nb);
    }
    if (worst <= tol) return x;
    if (step == 2) {
      std::ostringstream os;
      os << "Dirichlet solve residual " << worst << " exceeds " << tol << " after refinement";
      throw NumericalFailure(os.str());
    }
    x += f.solve(r);
  }
}

}  // namespace detail

/// Solves for a block of boundary data (columns of g, boundary slots) and
/// interior sources (columns of f, interior slots; may be empty). Returns the
/// full-grid fields as columns.
inline Eigen::MatrixXd solve_dirichlet(const HelmholtzSystem& sys, const Eigen::MatrixXd& g,
                                       const Eigen::MatrixXd& f = {}, double tol = 1e-10) {
  const BoxGrid& grid = sys.grid();
  if (g.rows() != static_cast<Eigen::Index>(grid.num_boundary())) {
    throw InvalidArgument("boundary data must have one row per boundary node");
  }
  if (f.size() != 0 && (f.rows() != static_cast<Eigen::Index>(grid.num_interior()) || f.cols() != g.cols())) {
    throw InvalidArgument("interior source must have one row per interior node and match g's columns");
  }
  Eigen::MatrixXd rhs = -(sys.coupling() * g);
  if (f.size() != 0) rhs += f;
  Eigen::MatrixXd ui = rhs.size() ? detail::checked_solve(sys, rhs, tol) : rhs;
  Eigen::MatrixXd u(grid.num_nodes(), g.cols());
  const auto interior = grid.interior_nodes();
  const auto boundary = grid.boundary_nodes();
  for (std::size_t s = 0; s < interior.size(); ++s) u.row(interior[s]) = ui.row(s);
  for (std::size_t s = 0; s < boundary.size(); ++s) u.row(boundary[s]) = g.row(s);
  return u;
}

inline Eigen::VectorXd solve_dirichlet(const HelmholtzSystem& sys, const Eigen::VectorXd& g,
                                       const Eigen::VectorXd& f = {}, double tol = 1e-10) {
  Eigen::MatrixXd fm;
  if (f.size()) fm = f;
  return solve_dirichlet(sys, Eigen::MatrixXd(g), fm, tol).col(0);
}

/// Solves A_ii w = rhs for interior unknowns (zero Dirichlet data).
inline Eigen::MatrixXd solve_interior(const HelmholtzSystem& sys, const Eigen::MatrixXd& rhs, double tol = 1e-10) {
  return detail::checked_solve(sys, rhs, tol);
}

/// One-sided second order derivative along the outward normal of face f at
/// boundary node n: (3u0 - 4u1 + u2) / (2h), stepping inward.
inline double one_sided_normal(const BoxGrid& g, const double* u, std::size_t n, const Face& f) {
  if (g.nodes(f.axis) < 3) throw InvalidArgument("need at least 3 nodes along the normal");
  std::ptrdiff_t stride = 0;
  detail::neighbor_offsets(g, f.axis, stride);
  const std::ptrdiff_t step = f.side == 0 ? stride : -stride;
  const auto i0 = static_cast<std::ptrdiff_t>(n);
  return (3.0 * u[i0] - 4.0 * u[i0 + step] + u[i0 + 2 * step]) / (2.0 * g.spacing(f.axis));
}

/// Sampled DtN: the one-sided normal derivative at every boundary node along
/// its assigned outward normal.
inline Eigen::VectorXd normal_derivative(const BoxGrid& g, const Eigen::VectorXd& u) {
  if (u.size() != static_cast<Eigen::Index>(g.num_nodes())) throw InvalidArgument("field must cover all nodes");
  Eigen::VectorXd out(g.num_boundary());
  for (std::size_t s = 0; s < g.num_boundary(); ++s) {
    out[s] = one_sided_normal(g, u.data(), g.boundary_nodes()[s], g.boundary_face(s));
  }
  return out;
}

inline Eigen::VectorXd normal_derivative(const HelmholtzSystem& sys, const Eigen::VectorXd& u) {
  return normal_derivative(sys.grid(), u);
}

/// Flux DtN: W^-1 (B_bi u_i + B_bb u_b), the discrete variational normal
/// derivative. Exactly self-adjoint in the W-weighted boundary pairing.
inline Eigen::MatrixXd flux_dtn(const HelmholtzSystem& sys, const Eigen::MatrixXd& u) {
  const BoxGrid& g = sys.grid();
  if (u.rows() != static_cast<Eigen::Index>(g.num_nodes())) throw InvalidArgument("field must cover all nodes");
  Eigen::MatrixXd ui(g.num_interior(), u.cols());
  Eigen::MatrixXd ub(g.num_boundary(), u.cols());
  for (std::size_t s = 0; s < g.num_interior(); ++s) ui.row(s) = u.row(g.interior_nodes()[s]);
  for (std::size_t s = 0; s < g.num_boundary(); ++s) ub.row(s) = u.row(g.boundary_nodes()[s]);
  Eigen::MatrixXd flux = sys.boundary_interior() * ui + sys.boundary_boundary() * ub;
  for (std::size_t s = 0; s < g.num_boundary(); ++s) flux.row(s) /= g.boundary_weight(s);
  return flux;
}

/// Boundary pairing sum_b w_b a_b c_b.
inline double boundary_pairing(const BoxGrid& g, const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
  double s = 0.0;
  for (std::size_t k = 0; k < g.num_boundary(); ++k) s += g.boundary_weight(k) * a[k] * c[k];
  return s;
}

/// Trapezoid-rule integral of a per-cell coefficient times the product of two
/// nodal fields: sum_cells q_cell vol mean_corners(u v).
inline double volume_pairing(const BoxGrid& g, std::span<const double> cell_q, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v) {
  if (cell_q.size() != g.num_cells()) throw InvalidArgument("need one value per cell");
  const int corners = g.dim() == 3 ? 8 : 4;
  const double w = g.cell_volume() / corners;
  double total = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    if (cell_q[c] == 0.0) continue;
    const Index3 m = g.cell_multi(c);
    double s = 0.0;
    for (int k = 0; k < corners; ++k) {
      const Index3 nm{m[0] + (k & 1), m[1] + ((k >> 1) & 1), g.dim() == 3 ? m[2] + ((k >> 2) & 1) : 0};
      const auto n = g.node_index(nm);
      s += u[n] * v[n];
    }
    total += cell_q[c] * w * s;
  }
  return total;
}

/// Discrete L2 norm with trapezoid node volumes.
inline double l2_norm(const BoxGrid& g, const Eigen::VectorXd& u) {
  double s = 0.0;
  for (std::size_t n = 0; n < g.num_nodes(); ++n) s += g.node_volume(n) * u[n] * u[n];
  return std::sqrt(s);
}

}  // namespace helmstab

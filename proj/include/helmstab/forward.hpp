#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/geometry.hpp"
#include "helmstab/log.hpp"
#include "helmstab/model.hpp"
#include "helmstab/solver.hpp"
#include "helmstab/spectrum.hpp"

namespace helmstab {

enum class AcquisitionMode : std::uint8_t { full = 0, top_only = 1 };

inline const char* to_string(AcquisitionMode m) { return m == AcquisitionMode::full ? "full" : "top"; }

/// How receivers turn a wavefield into a normal-derivative sample.
enum class DtnKind : std::uint8_t {
  sampled = 0,  // one-sided second order stencil at the receiver node
  flux = 1,     // discrete variational flux (exactly self-adjoint)
};

inline const char* to_string(DtnKind k) { return k == DtnKind::sampled ? "sampled" : "flux"; }

/// The top face is the low side of the last (depth) axis.
inline Face top_face(const BoxGrid& g) { return Face{g.dim() - 1, 0}; }

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

struct BoundaryPoint {
  Point position{};
  Face face{};
  std::size_t node = kNoNode;
  std::size_t slot = kNoNode;
};

struct Acquisition {
  AcquisitionMode mode = AcquisitionMode::full;
  std::vector<BoundaryPoint> sources;
  std::vector<BoundaryPoint> receivers;
  double sigma = 0.0;
  std::vector<double> source_weights;
  std::vector<double> receiver_weights;

  std::size_t num_sources() const { return sources.size(); }
  std::size_t num_receivers() const { return receivers.size(); }
};

/// Same positions and weights (node indices are not compared).
inline bool same_layout(const Acquisition& a, const Acquisition& b) {
  auto same = [](const std::vector<BoundaryPoint>& x, const std::vector<BoundaryPoint>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].position != y[i].position) return false;
    return true;
  };
  return same(a.sources, b.sources) && same(a.receivers, b.receivers) && a.source_weights == b.source_weights &&
         a.receiver_weights == b.receiver_weights;
}

/// exp(-|x - center|^2 / (2 sigma^2)) on the nodes of the face containing
/// center, zero on every other boundary node.
inline Eigen::VectorXd gaussian_source(const BoxGrid& g, const Point& center, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("source width must be positive");
  Face f;
  if (!g.face_containing(center, f)) throw InvalidArgument("source center is not on the boundary");
  if (sigma < g.min_spacing()) log::warn("source width ", sigma, " is below the grid spacing ", g.min_spacing());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.num_boundary());
  for (std::size_t s : g.face_slots(f)) {
    const Point p = g.node_position(g.boundary_nodes()[s]);
    double r2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) r2 += (p[a] - center[a]) * (p[a] - center[a]);
    out[s] = std::exp(-r2 / (2.0 * sigma * sigma));
  }
  return out;
}

namespace detail {

// Centered lattice with exact spacing on the face: round(L/s) points per
// tangential axis, snapped to face-interior nodes. Weight per point is the
// face area divided by the point count.
inline void face_lattice(const BoxGrid& g, const Face& f, std::span<const double> spacing,
                         std::vector<BoundaryPoint>& pts, std::vector<double>& weights) {
  std::array<int, kMaxDim> count{1, 1, 1};
  std::array<double, kMaxDim> offset{0, 0, 0};
  double weight = 1.0;
  for (int b = 0; b < g.dim(); ++b) {
    if (b == f.axis) continue;
    const double s = spacing[b];
    if (!(s >= g.spacing(b) * (1.0 - 1e-12))) {
      throw InvalidArgument("lattice spacing on axis " + std::to_string(b) + " is below the grid spacing");
    }
    const auto n = static_cast<int>(std::lround(g.extent(b) / s));
    if (n < 1) throw InvalidArgument("lattice on face " + std::to_string(f.id()) + " is empty");
    count[b] = n;
    offset[b] = 0.5 * (g.extent(b) - (n - 1) * s);
    weight *= g.extent(b) / n;
  }
  const int t0 = f.axis == 0 ? 1 : 0;
  const int t1 = g.dim() == 3 ? (f.axis == 2 ? 1 : 2) : -1;
  const int n1 = t1 < 0 ? 1 : count[t1];
  for (int k1 = 0; k1 < n1; ++k1) {
    for (int k0 = 0; k0 < count[t0]; ++k0) {
      Index3 m{0, 0, 0};
      m[f.axis] = f.side == 0 ? 0 : g.nodes(f.axis) - 1;
      auto snap = [&](int axis, int k) {
        const double x = offset[axis] + k * spacing[axis];
        const auto i = static_cast<int>(std::lround(x / g.spacing(axis)));
        m[axis] = std::clamp(i, 1, g.nodes(axis) - 2);
      };
      snap(t0, k0);
      if (t1 >= 0) snap(t1, k1);
      BoundaryPoint bp;
      bp.node = g.node_index(m);
      bp.slot = g.slot(bp.node);
      bp.position = g.node_position(bp.node);
      bp.face = f;
      pts.push_back(bp);
      weights.push_back(weight);
    }
  }
}

}  // namespace detail

/// Regular source and receiver lattices on every face (full) or on the top
/// face only. Spacings are given per axis; the normal axis entry is ignored.
inline Acquisition make_acquisition(const BoxGrid& g, AcquisitionMode mode, std::span<const double> source_spacing,
                                    std::span<const double> receiver_spacing, double sigma) {
  if (static_cast<int>(source_spacing.size()) != g.dim() || static_cast<int>(receiver_spacing.size()) != g.dim()) {
    throw InvalidArgument("need one source and receiver spacing per axis");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("source width must be positive");
  Acquisition acq;
  acq.mode = mode;
  acq.sigma = sigma;
  std::vector<Face> faces;
  if (mode == AcquisitionMode::top_only) {
    faces.push_back(top_face(g));
  } else {
    for (int a = 0; a < g.dim(); ++a)
      for (int side = 0; side < 2; ++side) faces.push_back(Face{a, side});
  }
  for (const Face& f : faces) {
    detail::face_lattice(g, f, source_spacing, acq.sources, acq.source_weights);
    detail::face_lattice(g, f, receiver_spacing, acq.receivers, acq.receiver_weights);
  }
  if (acq.sources.empty() || acq.receivers.empty()) throw InvalidArgument("acquisition lattice is empty");
  if (sigma < g.min_spacing()) log::warn("source width ", sigma, " is below the grid spacing ", g.min_spacing());
  return acq;
}

inline Acquisition make_acquisition(const BoxGrid& g, AcquisitionMode mode, std::initializer_list<double> src,
                                    std::initializer_list<double> rcv, double sigma) {
  return make_acquisition(g, mode, std::span<const double>(src.begin(), src.size()),
                          std::span<const double>(rcv.begin(), rcv.size()), sigma);
}

/// Discrete Lambda sampled on an acquisition: values(s, r).
struct DtnData {
  Acquisition acquisition;
  double omega2 = 0.0;
  Eigen::MatrixXd values;
  DtnKind kind = DtnKind::sampled;
  std::uint64_t model_hash = 0;
  std::uint64_t grid_hash = 0;
};

struct ForwardOptions {
  bool override_window_check = false;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned workers = 0;
  DtnKind kind = DtnKind::sampled;
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Receiver samples of one full-grid field.
inline Eigen::VectorXd sample_receivers(const HelmholtzSystem& sys, const Acquisition& acq, const Eigen::VectorXd& u,
                                        DtnKind kind) {
  Eigen::VectorXd row(acq.num_receivers());
  const BoxGrid& g = sys.grid();
  if (kind == DtnKind::sampled) {
    for (std::size_t r = 0; r < acq.num_receivers(); ++r) {
      row[r] = one_sided_normal(g, u.data(), acq.receivers[r].node, acq.receivers[r].face);
    }
  } else {
    const Eigen::VectorXd flux = flux_dtn(sys, u);
    for (std::size_t r = 0; r < acq.num_receivers(); ++r) row[r] = flux[acq.receivers[r].slot];
  }
  return row;
}

/// Runs fn(s) for s in [0, n), split across workers by stride. Each index is
/// handled by exactly one worker; the first exception is rethrown.
template <typename Fn>
void parallel_for_each(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t s = 0; s < n; ++s) fn(s);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t s = t; s < n; s += workers) fn(s);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Data matrix against an assembled, factorized system. One Dirichlet solve
/// per source (column-wise, so every row is independent of the batching).
inline Eigen::MatrixXd forward_values(const HelmholtzSystem& sys, const Acquisition& acq,
                                      const ForwardOptions& opts = {}) {
  const BoxGrid& g = sys.grid();
  Eigen::MatrixXd values(acq.num_sources(), acq.num_receivers());
  parallel_for_each(acq.num_sources(), resolve_workers(opts.workers), [&](std::size_t s) {
    const Eigen::VectorXd src = gaussian_source(g, acq.sources[s].position, acq.sigma);
    const Eigen::VectorXd u = solve_dirichlet(sys, src);
    values.row(s) = sample_receivers(sys, acq, u, opts.kind).transpose();
  });
  return values;
}

/// Throws WindowViolation unless omega^2 lies in an admissible window for the
/// model's a priori bounds (or the check is overridden).
inline void check_window(const SquaredSlownessModel& m, double omega2, bool override_check) {
  const BoxGrid& g = m.grid();
  std::vector<double> ext;
  for (int a = 0; a < g.dim(); ++a) ext.push_back(g.extent(a));
  const auto fw = admissible_windows_covering(ext, m.bounds().b1, m.bounds().b2, omega2);
  const auto safety = frequency_safety(omega2, fw);
  if (safety.inside) return;
  if (override_check) {
    log::warn("omega^2 = ", omega2, " is outside the admissible windows; continuing (override)");
    return;
  }
  throw WindowViolation("omega^2 = " + std::to_string(omega2) +
                        " is outside every admissible frequency window for the model bounds");
}

/// F_omega(c^-2): the discrete DtN data of a model on an acquisition.
inline DtnData forward_map(const SquaredSlownessModel& m, double omega2, const Acquisition& acq,
                           const ForwardOptions& opts = {}) {
  check_window(m, omega2, opts.override_window_check);
  const HelmholtzSystem sys = assemble(m.grid(), to_cell_field(m), omega2);
  DtnData d;
  d.acquisition = acq;
  d.omega2 = omega2;
  d.kind = opts.kind;
  d.values = forward_values(sys, acq, opts);
  d.model_hash = m.fingerprint();
  d.grid_hash = m.grid().fingerprint();
  return d;
}

/// Sub-block of a data matrix restricted to the sources and receivers of
/// another acquisition (matched by position and weight).
inline DtnData restrict_data(const DtnData& d, const Acquisition& sub) {
  auto index_of = [](const std::vector<BoundaryPoint>& pts, const std::vector<double>& w, const BoundaryPoint& p,
                     double wp) -> Eigen::Index {
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (pts[i].position == p.position && w[i] == wp) return static_cast<Eigen::Index>(i);
    throw InvalidArgument("sub-acquisition point not present in the full acquisition");
  };
  DtnData out = d;
  out.acquisition = sub;
  out.values.resize(sub.num_sources(), sub.num_receivers());
  for (std::size_t s = 0; s < sub.num_sources(); ++s) {
    const auto fs = index_of(d.acquisition.sources, d.acquisition.source_weights, sub.sources[s], sub.source_weights[s]);
    for (std::size_t r = 0; r < sub.num_receivers(); ++r) {
      const auto fr = index_of(d.acquisition.receivers, d.acquisition.receiver_weights, sub.receivers[r],
                               sub.receiver_weights[r]);
      out.values(s, r) = d.values(fs, fr);
    }
  }
  return out;
}

struct DtnNorm {
  double opnorm = 0.0;     // largest singular value of W_r^1/2 D^T W_s^1/2
  double frobenius = 0.0;  // weighted Frobenius norm of the same matrix
};

inline Eigen::MatrixXd weighted_difference(const Acquisition& acq, const Eigen::MatrixXd& diff) {
  Eigen::VectorXd ws(acq.num_sources()), wr(acq.num_receivers());
  for (Eigen::Index s = 0; s < ws.size(); ++s) ws[s] = std::sqrt(acq.source_weights[s]);
  for (Eigen::Index r = 0; r < wr.size(); ++r) wr[r] = std::sqrt(acq.receiver_weights[r]);
  return wr.asDiagonal() * diff.transpose() * ws.asDiagonal();
}

inline DtnNorm weighted_operator_norm(const Acquisition& acq, const Eigen::MatrixXd& diff) {
  if (diff.rows() != static_cast<Eigen::Index>(acq.num_sources()) ||
      diff.cols() != static_cast<Eigen::Index>(acq.num_receivers())) {
    throw InvalidArgument("data matrix does not match the acquisition");
  }
  const Eigen::MatrixXd m = weighted_difference(acq, diff);
  DtnNorm out;
  out.frobenius = m.norm();
  if (m.size() == 0 || out.frobenius == 0.0) return out;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  out.opnorm = svd.singularValues()[0];
  return out;
}

/// ||F(c1) - F(c2)|| in the weighted l2 operator norm.
inline DtnNorm dtn_operator_norm(const DtnData& a, const DtnData& b) {
  if (!same_layout(a.acquisition, b.acquisition)) throw InvalidArgument("data sets use different acquisitions");
  if (a.omega2 != b.omega2) throw InvalidArgument("data sets use different frequencies");
  if (a.kind != b.kind) throw InvalidArgument("data sets use different DtN kinds");
  return weighted_operator_norm(a.acquisition, a.values - b.values);
}

/// One source row as CSV: receiver index, x, y[, z], value.
inline void write_trace_csv(std::ostream& os, const DtnData& d, std::size_t source, int dim) {
  if (source >= d.acquisition.num_sources()) throw InvalidArgument("source index out of range");
  os << (dim == 3 ? "receiver,x,y,z,value\n" : "receiver,x,y,value\n");
  char buf[200];
  for (std::size_t r = 0; r < d.acquisition.num_receivers(); ++r) {
    const auto& p = d.acquisition.receivers[r].position;
    if (dim == 3) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r, p[0], p[1], p[2], d.values(source, r));
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r, p[0], p[1], d.values(source, r));
    }
    os << buf;
  }
}

}  // namespace helmstab

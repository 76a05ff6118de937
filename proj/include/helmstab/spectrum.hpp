#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/geometry.hpp"
#include "helmstab/solver.hpp"

namespace helmstab {

/// The `count` smallest Dirichlet eigenvalues of -Delta on the box,
/// pi^2 sum_a (k_a/L_a)^2 with k_a >= 1, ascending, with multiplicity.
inline std::vector<double> box_dirichlet_eigenvalues(std::span<const double> extents, int count) {
  if (count < 1) throw InvalidArgument("eigenvalue count must be >= 1");
  const int dim = static_cast<int>(extents.size());
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  std::vector<double> unit(dim);
  for (int a = 0; a < dim; ++a) unit[a] = pi2 / (extents[a] * extents[a]);
  // (count,1,..,1) bounds the count-th eigenvalue from above
  double threshold = unit[0] * count * count;
  for (int a = 1; a < dim; ++a) threshold += unit[a];
  std::vector<double> out;
  std::function<void(int, double)> rec = [&](int a, double partial) {
    if (a == dim) {
      out.push_back(partial);
      return;
    }
    double rest = 0.0;
    for (int b = a + 1; b < dim; ++b) rest += unit[b];
    for (long k = 1;; ++k) {
      const double v = partial + unit[a] * static_cast<double>(k * k);
      if (v + rest > threshold * (1.0 + 1e-12)) break;
      rec(a + 1, v);
    }
  };
  rec(0, 0.0);
  std::sort(out.begin(), out.end());
  out.resize(std::min<std::size_t>(out.size(), count));
  return out;
}

/// Closed-form eigenvalues of the discrete 5/7-point Dirichlet Laplacian on
/// the grid: sum_a (4/h_a^2) sin^2(pi k_a h_a / (2 L_a)), k_a = 1..cells_a-1.
inline std::vector<double> grid_laplacian_eigenvalues(const BoxGrid& g, int count) {
  std::vector<std::vector<double>> axis(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    const double h = g.spacing(a);
    for (int k = 1; k < g.cells(a); ++k) {
      const double s = std::sin(std::numbers::pi * k * h / (2.0 * g.extent(a)));
      axis[a].push_back(4.0 / (h * h) * s * s);
    }
  }
  std::vector<double> out;
  if (g.dim() == 2) {
    for (double x : axis[0])
      for (double y : axis[1]) out.push_back(x + y);
  } else {
    for (double x : axis[0])
      for (double y : axis[1])
        for (double z : axis[2]) out.push_back(x + y + z);
  }
  std::sort(out.begin(), out.end());
  out.resize(std::min<std::size_t>(out.size(), count));
  return out;
}

struct EigenOptions {
  double tol = 1e-10;
  int max_iterations = 500;
  /// Problems with at most this many interior nodes go to a dense solver.
  std::size_t dense_limit = 400;
  bool force_iterative = false;
};

/// Smallest generalized eigenvalues of (-Delta_h) u = lambda M_{c^-2} u on the
/// interior nodes, with the solver's stencil and node coefficients.
///
/// Large problems use shift-invert subspace iteration at shift 0 (the
/// operator is SPD) with Rayleigh-Ritz on a block of max(2k, k+8) vectors.
inline std::vector<double> discrete_dirichlet_eigenvalues(const BoxGrid& g, std::span<const double> coeff, int count,
                                                          const EigenOptions& opts = {}) {
  if (count < 1) throw InvalidArgument("eigenvalue count must be >= 1");
  for (double c : coeff) {
    if (!(c > 0.0)) throw InvalidArgument("generalized eigenproblem needs a positive coefficient");
  }
  AssembleOptions aopts;
  aopts.factorize = false;
  const HelmholtzSystem lap = assemble(g, coeff, 0.0, aopts);
  const auto n = static_cast<Eigen::Index>(g.num_interior());
  if (count > n) throw InvalidArgument("more eigenvalues requested than interior nodes");
  Eigen::VectorXd mass(n);
  for (Eigen::Index s = 0; s < n; ++s) mass[s] = lap.node_coeff()[g.interior_nodes()[s]];
  const SparseMatrix& stiff = lap.interior_matrix();

  if (!opts.force_iterative && static_cast<std::size_t>(n) <= opts.dense_limit) {
    Eigen::MatrixXd a = Eigen::MatrixXd(stiff);
    Eigen::MatrixXd b = mass.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, b, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalFailure("dense generalized eigensolver failed");
    std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + count);
    return out;
  }

  const Factorization factor(stiff);
  const Eigen::Index p = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * count, count + 8));
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);

  Eigen::VectorXd previous = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  double worst = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Eigen::MatrixXd y = factor.solve(mass.asDiagonal() * x);
    Eigen::MatrixXd ah = y.transpose() * (stiff * y);
    Eigen::MatrixXd bh = y.transpose() * (mass.asDiagonal() * y);
    ah = 0.5 * (ah + ah.transpose()).eval();
    bh = 0.5 * (bh + bh.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(ah, bh);
    if (es.info() != Eigen::Success) throw NumericalFailure("Rayleigh-Ritz step failed at iteration " + std::to_string(it));
    const Eigen::VectorXd theta = es.eigenvalues();
    x = y * es.eigenvectors();
    worst = 0.0;
    for (int k = 0; k < count; ++k) worst = std::max(worst, std::abs(theta[k] - previous[k]) / std::abs(theta[k]));
    previous = theta;
    if (worst <= opts.tol) return std::vector<double>(theta.data(), theta.data() + count);
  }
  std::ostringstream os;
  os << "subspace iteration did not converge in " << opts.max_iterations
     << " iterations (block " << p << ", worst relative change " << worst << ")";
  throw NumericalFailure(os.str());
}

/// One row per eigenvalue index n: window (lambda_{n-1}/B1, lambda_n/B2), with
/// lambda_0/B1 taken as 0. Nonempty rows are the admissible omega^2 windows.
struct WindowRow {
  int n = 0;
  double lambda_n = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool nonempty = false;
};

struct FrequencyWindows {
  double b1 = 0.0;
  double b2 = 0.0;
  std::vector<double> eigenvalues;
  std::vector<WindowRow> rows;

  std::vector<WindowRow> windows() const {
    std::vector<WindowRow> w;
    for (const auto& r : rows)
      if (r.nonempty) w.push_back(r);
    return w;
  }
  std::vector<int> dropped() const {
    std::vector<int> d;
    for (const auto& r : rows)
      if (!r.nonempty) d.push_back(r.n);
    return d;
  }
  /// omega^2 below this value is classified reliably.
  double covered_up_to() const { return rows.empty() ? 0.0 : rows.back().hi; }
};

inline FrequencyWindows windows_from_eigenvalues(std::vector<double> eigenvalues, double b1, double b2) {
  if (!(b1 > 0.0) || !(b2 >= b1)) throw InvalidArgument("window bounds need 0 < B1 <= B2");
  FrequencyWindows fw{b1, b2, std::move(eigenvalues), {}};
  for (std::size_t k = 0; k < fw.eigenvalues.size(); ++k) {
    WindowRow r;
    r.n = static_cast<int>(k) + 1;
    r.lambda_n = fw.eigenvalues[k];
    r.lo = k == 0 ? 0.0 : fw.eigenvalues[k - 1] / b1;
    r.hi = fw.eigenvalues[k] / b2;
    r.nonempty = r.lo < r.hi;
    fw.rows.push_back(r);
  }
  return fw;
}

inline FrequencyWindows admissible_windows(std::span<const double> extents, double b1, double b2, int count) {
  return windows_from_eigenvalues(box_dirichlet_eigenvalues(extents, count), b1, b2);
}

/// Windows with enough eigenvalues to classify omega^2 (count doubles until
/// lambda_count/B2 exceeds omega^2, capped at max_count).
inline FrequencyWindows admissible_windows_covering(std::span<const double> extents, double b1, double b2,
                                                    double omega2, int max_count = 1 << 16) {
  int count = 8;
  for (;;) {
    FrequencyWindows fw = admissible_windows(extents, b1, b2, count);
    if (fw.covered_up_to() > omega2 || count >= max_count) return fw;
    count *= 2;
  }
}

struct FrequencySafety {
  bool inside = false;
  /// Index n of the containing window (inside) or of the nearest one.
  int window = 0;
  double lo = 0.0;
  double hi = 0.0;
  /// Distance to the nearest edge of the containing window, or to the
  /// nearest window when outside.
  double distance = 0.0;
  /// distance / omega^2.
  double relative_margin = 0.0;
  /// omega^2 lies beyond the last computed window.
  bool beyond_range = false;
};

inline FrequencySafety frequency_safety(double omega2, const FrequencyWindows& fw) {
  if (!(omega2 > 0.0)) throw InvalidArgument("omega^2 must be positive");
  FrequencySafety out;
  out.beyond_range = omega2 >= fw.covered_up_to();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : fw.rows) {
    if (!r.nonempty) continue;
    if (omega2 > r.lo && omega2 < r.hi) {
      out.inside = true;
      out.window = r.n;
      out.lo = r.lo;
      out.hi = r.hi;
      out.distance = std::min(omega2 - r.lo, r.hi - omega2);
      out.relative_margin = out.distance / omega2;
      out.beyond_range = false;
      return out;
    }
    const double d = omega2 <= r.lo ? r.lo - omega2 : omega2 - r.hi;
    if (d < best) {
      best = d;
      out.window = r.n;
      out.lo = r.lo;
      out.hi = r.hi;
    }
  }
  out.distance = best;
  out.relative_margin = best / omega2;
  return out;
}

/// CSV columns: n, lambda_n, window_lo, window_hi, nonempty.
inline void write_windows_csv(std::ostream& os, const FrequencyWindows& fw) {
  os << "n,lambda_n,window_lo,window_hi,nonempty\n";
  char buf[160];
  for (const auto& r : fw.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", r.n, r.lambda_n, r.lo, r.hi, r.nonempty ? 1 : 0);
    os << buf;
  }
}

}  // namespace helmstab

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/geometry.hpp"
#include "helmstab/log.hpp"
#include "helmstab/model.hpp"

namespace helmstab {

/// Monte-Carlo check of ||f||^2_{H^s} <= 2 sum_j c_j^2 ||chi_j||^2_{H^s} for a
/// piecewise-constant f = sum_j c_j chi_j. The H^s norm is the L2 part (exact)
/// plus the Gagliardo double integral over Omega x Omega (sampled).
struct SobolevReport {
  double s_prime = 0.0;
  std::size_t samples = 0;
  std::size_t rejected = 0;
  double lhs = 0.0;  // estimate of ||f||^2_{H^s}
  double lhs_se = 0.0;
  double rhs = 0.0;  // estimate of 2 sum_j c_j^2 ||chi_j||^2_{H^s}
  double rhs_se = 0.0;
  double difference = 0.0;  // rhs - lhs, estimated from paired samples
  double difference_se = 0.0;
  std::vector<double> indicator_norms;  // ||chi_j||^2_{H^s} estimates
  bool holds = false;                   // difference >= -3 standard errors
};

inline SobolevReport fractional_sobolev_check(const CubicalPartition& p, std::span<const double> values,
                                              double s_prime, std::size_t samples, std::uint64_t seed) {
  if (!(s_prime > 0.0 && s_prime < 0.5)) throw InvalidArgument("s' must lie in (0, 1/2)");
  if (values.size() != p.size()) throw InvalidArgument("need one value per subdomain");
  if (samples < 2) throw InvalidArgument("need at least two sample pairs");
  if (samples < 10000) log::warn("only ", samples, " sample pairs; error bars will be wide");
  const BoxGrid& g = p.grid();
  const int dim = g.dim();
  const double vol = g.volume();
  const double weight = vol * vol;
  const double r_min = 1e-6 * g.diameter();
  const double power = -(dim + 2.0 * s_prime);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    Point x{0, 0, 0};
    for (int a = 0; a < dim; ++a) x[a] = unit(rng) * g.extent(a);
    return x;
  };

  SobolevReport rep;
  rep.s_prime = s_prime;
  rep.samples = samples;
  const std::size_t n = p.size();
  std::vector<double> ind_sum(n, 0.0);
  double sl = 0, sl2 = 0, sr = 0, sr2 = 0, sd = 0, sd2 = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    Point x, y;
    double r = 0.0;
    for (;;) {
      x = draw();
      y = draw();
      double r2 = 0.0;
      for (int a = 0; a < dim; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
      r = std::sqrt(r2);
      if (r >= r_min) break;
      ++rep.rejected;
    }
    const int jx = p.subdomain_at(x);
    const int jy = p.subdomain_at(y);
    double lt = 0.0, rt = 0.0;
    if (jx != jy) {
      const double k = weight * std::pow(r, power);
      const double cx = values[jx], cy = values[jy];
      lt = (cx - cy) * (cx - cy) * k;
      rt = 2.0 * (cx * cx + cy * cy) * k;
      ind_sum[jx] += k;
      ind_sum[jy] += k;
    }
    sl += lt;
    sl2 += lt * lt;
    sr += rt;
    sr2 += rt * rt;
    const double d = rt - lt;
    sd += d;
    sd2 += d * d;
  }
  const auto m = static_cast<double>(samples);
  auto se = [m](double s, double s2) {
    const double mean = s / m;
    const double var = std::max(0.0, (s2 / m - mean * mean) * m / (m - 1.0));
    return std::sqrt(var / m);
  };
  double l2_lhs = 0.0, l2_rhs = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double vj = p.volume(static_cast<int>(j));
    l2_lhs += values[j] * values[j] * vj;
    l2_rhs += 2.0 * values[j] * values[j] * vj;
    rep.indicator_norms.push_back(vj + ind_sum[j] / m);
  }
  rep.lhs = l2_lhs + sl / m;
  rep.lhs_se = se(sl, sl2);
  rep.rhs = l2_rhs + sr / m;
  rep.rhs_se = se(sr, sr2);
  rep.difference = (l2_rhs - l2_lhs) + sd / m;
  rep.difference_se = se(sd, sd2);
  rep.holds = rep.difference >= -3.0 * rep.difference_se;
  return rep;
}

inline SobolevReport fractional_sobolev_check(const SquaredSlownessModel& m, double s_prime, std::size_t samples,
                                              std::uint64_t seed) {
  return fractional_sobolev_check(m.partition(), m.values(), s_prime, samples, seed);
}

}  // namespace helmstab

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/forward.hpp"
#include "helmstab/model.hpp"

namespace helmstab {

inline constexpr const char* kNormKind = "weighted-l2-opnorm";

struct StabilityRecord {
  std::size_t n = 0;  // subdomain count
  double omega2 = 0.0;
  double model_l2 = 0.0;
  double model_linf = 0.0;
  double volume = 0.0;  // |Omega|
  double r0 = 0.0;
  double data_norm = 0.0;
  double data_frobenius = 0.0;
  double c_est = 0.0;     // model_l2 / data_norm
  double c_est_sq = 0.0;  // c_est^2
  double lower_bound = std::numeric_limits<double>::quiet_NaN();
  double upper_bound = std::numeric_limits<double>::quiet_NaN();
  bool bound_saturated = false;
  AcquisitionMode mode = AcquisitionMode::full;
  std::string norm_kind = kNormKind;

  double freq_hz() const { return std::sqrt(omega2) / (2.0 * std::numbers::pi); }
};

struct BoundConstants {
  double k = 0.0;   // upper-bound exponent constant
  double k1 = 0.0;  // lower-bound exponent constant
  double b2 = 0.0;
  std::size_t records_used = 0;    // records entering k1
  std::size_t k_records_used = 0;  // smallest-N records entering k
};

struct BoundValues {
  double lower = 0.0;
  double upper = 0.0;
  bool lower_saturated = false;
  bool upper_saturated = false;
  bool saturated() const { return lower_saturated || upper_saturated; }
};

/// lower = exp(k1 N^(1/5)) / (4 omega^2), upper = exp(k (1 + omega^2 b2) N^(4/7)) / omega^2.
/// Values beyond double range saturate at the largest finite double.
inline BoundValues evaluate_bounds(double n, double omega2, const BoundConstants& c) {
  if (!(n >= 1.0)) throw InvalidArgument("N must be >= 1");
  if (!(omega2 > 0.0)) throw InvalidArgument("omega^2 must be positive");
  constexpr double kMax = std::numeric_limits<double>::max();
  const double log_max = std::log(kMax);
  BoundValues out;
  const double ll = c.k1 * std::pow(n, 0.2) - std::log(4.0 * omega2);
  const double lu = c.k * (1.0 + omega2 * c.b2) * std::pow(n, 4.0 / 7.0) - std::log(omega2);
  out.lower_saturated = ll >= log_max;
  out.upper_saturated = lu >= log_max;
  out.lower = out.lower_saturated ? kMax : std::exp(c.k1 * std::pow(n, 0.2)) / (4.0 * omega2);
  out.upper = out.upper_saturated ? kMax : std::exp(c.k * (1.0 + omega2 * c.b2) * std::pow(n, 4.0 / 7.0)) / omega2;
  if (!std::isfinite(out.lower)) {
    out.lower = kMax;
    out.lower_saturated = true;
  }
  if (!std::isfinite(out.upper)) {
    out.upper = kMax;
    out.upper_saturated = true;
  }
  return out;
}

inline void apply_bounds(StabilityRecord& r, const BoundConstants& c) {
  const auto b = evaluate_bounds(static_cast<double>(r.n), r.omega2, c);
  r.lower_bound = b.lower;
  r.upper_bound = b.upper;
  r.bound_saturated = b.saturated();
}

/// Stability record from already computed data matrices.
inline StabilityRecord estimate_constant_from_data(const SquaredSlownessModel& m1, const SquaredSlownessModel& m2,
                                                   const DtnData& d1, const DtnData& d2) {
  detail::require_same_partition(m1, m2);
  if (m1 == m2) throw DegenerateInput("models are identical; the stability ratio is undefined");
  StabilityRecord r;
  r.n = m1.size();
  r.omega2 = d1.omega2;
  r.mode = d1.acquisition.mode;
  r.model_l2 = l2_distance(m1, m2);
  r.model_linf = linf_distance(m1, m2);
  r.volume = m1.grid().volume();
  r.r0 = m1.partition().r0();
  const auto norm = dtn_operator_norm(d1, d2);
  r.data_norm = norm.opnorm;
  r.data_frobenius = norm.frobenius;
  const double scale = std::max(weighted_operator_norm(d1.acquisition, d1.values).opnorm,
                                weighted_operator_norm(d2.acquisition, d2.values).opnorm);
  if (!(r.data_norm > 1e-14 * scale)) {
    std::ostringstream os;
    os << "data difference " << r.data_norm << " is below 1e-14 of the data scale " << scale;
    throw IllConditioned(os.str());
  }
  r.c_est = r.model_l2 / r.data_norm;
  r.c_est_sq = r.c_est * r.c_est;
  return r;
}

/// c_est = ||c1 - c2||_L2 / ||F(c1) - F(c2)||.
inline StabilityRecord estimate_constant(const SquaredSlownessModel& m1, const SquaredSlownessModel& m2, double omega2,
                                         const Acquisition& acq, const ForwardOptions& opts = {},
                                         const std::optional<BoundConstants>& constants = std::nullopt) {
  detail::require_same_partition(m1, m2);
  if (m1 == m2) throw DegenerateInput("models are identical; the stability ratio is undefined");
  const DtnData d1 = forward_map(m1, omega2, acq, opts);
  const DtnData d2 = forward_map(m2, omega2, acq, opts);
  StabilityRecord r = estimate_constant_from_data(m1, m2, d1, d2);
  if (constants) apply_bounds(r, *constants);
  return r;
}

struct FitOptions {
  /// Records (smallest N first) entering k; 0 means ceil(n / 2).
  std::size_t first_scales = 0;
};

/// k1 = mean log(4 omega^2 C_i) / N_i^(1/5) over all records;
/// k = mean log(omega^2 C_i) / ((1 + omega^2 B2) N_i^(4/7)) over the first scales.
inline BoundConstants fit_constants(const std::vector<StabilityRecord>& records, double b2,
                                    const FitOptions& opts = {}) {
  if (records.empty()) throw InvalidArgument("fitting needs at least one record");
  const double w2 = records.front().omega2;
  for (const auto& r : records) {
    if (r.omega2 != w2) throw InvalidArgument("records used in one fit must share omega^2");
    if (!(r.c_est > 0.0)) throw InvalidArgument("record with c_est <= 0 cannot be fitted");
  }
  BoundConstants c;
  c.b2 = b2;
  c.records_used = records.size();
  double s1 = 0.0;
  for (const auto& r : records) s1 += std::log(4.0 * r.omega2 * r.c_est) / std::pow(static_cast<double>(r.n), 0.2);
  c.k1 = s1 / static_cast<double>(records.size());

  std::vector<const StabilityRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->n < b->n; });
  std::size_t m = opts.first_scales == 0 ? (records.size() + 1) / 2 : opts.first_scales;
  m = std::min(m, records.size());
  double sk = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& r = *sorted[i];
    sk += std::log(r.omega2 * r.c_est) / ((1.0 + r.omega2 * b2) * std::pow(static_cast<double>(r.n), 4.0 / 7.0));
  }
  c.k = sk / static_cast<double>(m);
  c.k_records_used = m;
  return c;
}

struct LinfRow {
  std::size_t n = 0;
  double l2 = 0.0;
  double linf = 0.0;
  double l2_over_sqrt_volume = 0.0;
  bool lower_holds = false;
  /// linf r0^(dim/2) / l2: the constant needed for the upper direction.
  double upper_constant = 0.0;
};

/// L2 against Linf per record: L2/sqrt|Omega| <= Linf is checked (within
/// four ulps of rounding); the upper direction is reported.
inline std::vector<LinfRow> linf_stability_report(const std::vector<StabilityRecord>& records, int dim) {
  std::vector<LinfRow> rows;
  for (const auto& r : records) {
    LinfRow row;
    row.n = r.n;
    row.l2 = r.model_l2;
    row.linf = r.model_linf;
    row.l2_over_sqrt_volume = r.model_l2 / std::sqrt(r.volume);
    row.lower_holds = row.l2_over_sqrt_volume <= row.linf * (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
    row.upper_constant = r.model_l2 > 0.0 ? r.model_linf * std::pow(r.r0, 0.5 * dim) / r.model_l2 : 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline void write_linf_report_csv(std::ostream& os, const std::vector<LinfRow>& rows) {
  os << "N,model_l2,model_linf,l2_over_sqrt_volume,lower_holds,upper_constant\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d,%.17g\n", r.n, r.l2, r.linf, r.l2_over_sqrt_volume,
                  r.lower_holds ? 1 : 0, r.upper_constant);
    os << buf;
  }
}

inline constexpr const char* kRecordsHeader =
    "N,omega2,freq_hz,model_l2,data_norm,c_est,c_est_sq,lower_bound,upper_bound,mode,norm_kind";

inline void write_records_csv(std::ostream& os, const std::vector<StabilityRecord>& records) {
  os << kRecordsHeader << '\n';
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%s\n", r.n, r.omega2,
                  r.freq_hz(), r.model_l2, r.data_norm, r.c_est, r.c_est_sq, r.lower_bound, r.upper_bound,
                  to_string(r.mode), r.norm_kind.c_str());
    os << buf;
  }
}

/// Reads the columns written by write_records_csv. Fields not stored there
/// (Linf norm, volume, r0) are left at zero.
inline std::vector<StabilityRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) return {};
  if (line != kRecordsHeader) throw InvalidArgument("unexpected records header: " + line);
  std::vector<StabilityRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw InvalidArgument("records line " + std::to_string(lineno) + " needs 11 fields");
    try {
      StabilityRecord r;
      r.n = std::stoul(f[0]);
      r.omega2 = std::stod(f[1]);
      r.model_l2 = std::stod(f[3]);
      r.data_norm = std::stod(f[4]);
      r.c_est = std::stod(f[5]);
      r.c_est_sq = std::stod(f[6]);
      r.lower_bound = std::stod(f[7]);
      r.upper_bound = std::stod(f[8]);
      if (f[9] == "full") {
        r.mode = AcquisitionMode::full;
      } else if (f[9] == "top") {
        r.mode = AcquisitionMode::top_only;
      } else {
        throw InvalidArgument("unknown mode '" + f[9] + "'");
      }
      r.norm_kind = f[10];
      out.push_back(r);
    } catch (const std::logic_error& e) {
      throw InvalidArgument("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace helmstab

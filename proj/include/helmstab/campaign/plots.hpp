#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "helmstab/log.hpp"
#include "helmstab/stability.hpp"

namespace helmstab::campaign {

namespace detail {

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : std::numeric_limits<double>::quiet_NaN(); }
inline double loglog(double x) { return safe_log(safe_log(x)); }

inline std::string freq_tag(double omega2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", std::sqrt(omega2) / (2.0 * std::numbers::pi));
  return buf;
}

}  // namespace detail

struct ModeComparison {
  double omega2 = 0.0;
  std::vector<std::size_t> n;
  std::vector<double> diff_loglog;  // loglog(c_top) - loglog(c_full)
  std::vector<double> diff_log;     // log(c_top) - log(c_full)
  double mean = 0.0;                // over finite diff_loglog entries
  double spread = 0.0;              // max - min of the same
  double stddev = 0.0;
  std::size_t finite = 0;
};

/// Per-N difference of log log c_est between top-only and full data.
inline ModeComparison compare_modes(const std::vector<StabilityRecord>& records, double omega2) {
  ModeComparison mc;
  mc.omega2 = omega2;
  std::map<std::size_t, std::pair<double, double>> by_n;
  std::map<std::size_t, int> seen;
  for (const auto& r : records) {
    if (r.omega2 != omega2) continue;
    auto& e = by_n[r.n];
    (r.mode == AcquisitionMode::full ? e.first : e.second) = r.c_est;
    seen[r.n] |= r.mode == AcquisitionMode::full ? 1 : 2;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, s = 0, s2 = 0;
  for (const auto& [n, c] : by_n) {
    if (seen[n] != 3) continue;
    const double d = detail::loglog(c.second) - detail::loglog(c.first);
    mc.n.push_back(n);
    mc.diff_loglog.push_back(d);
    mc.diff_log.push_back(detail::safe_log(c.second) - detail::safe_log(c.first));
    if (std::isfinite(d)) {
      ++mc.finite;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      s += d;
      s2 += d * d;
    }
  }
  if (mc.finite > 0) {
    const auto m = static_cast<double>(mc.finite);
    mc.mean = s / m;
    mc.spread = hi - lo;
    mc.stddev = std::sqrt(std::max(0.0, s2 / m - mc.mean * mc.mean));
  }
  return mc;
}

/// Writes, per (frequency, mode), plot_<f>Hz_<mode>.dat with columns
///   log_N  log_cw2  loglog_cw2  loglog_csq_w2  loglog_lower_w2  loglog_upper_w2
/// and, per frequency with both modes, modes_<f>Hz.dat. Undefined logs are nan.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<StabilityRecord>& records,
                                                     const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> written;
  if (records.empty()) {
    log::warn("no records; no plot data written");
    return written;
  }
  std::filesystem::create_directories(out_dir);
  std::map<std::pair<double, int>, std::vector<const StabilityRecord*>> groups;
  for (const auto& r : records) groups[{r.omega2, static_cast<int>(r.mode)}].push_back(&r);
  char buf[512];
  for (auto& [key, rs] : groups) {
    std::stable_sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->n < b->n; });
    const auto path = out_dir / ("plot_" + detail::freq_tag(key.first) + "Hz_" +
                                 to_string(static_cast<AcquisitionMode>(key.second)) + ".dat");
    std::ofstream os(path);
    std::snprintf(buf, sizeof buf, "# omega2 = %.17g, mode = %s; x = log N, y = log / log log of C omega^2\n",
                  key.first, to_string(static_cast<AcquisitionMode>(key.second)));
    os << buf << "# log_N log_cw2 loglog_cw2 loglog_csq_w2 loglog_lower_w2 loglog_upper_w2\n";
    for (const auto* r : rs) {
      const double w2 = r->omega2;
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", std::log(static_cast<double>(r->n)),
                    detail::safe_log(r->c_est * w2), detail::loglog(r->c_est * w2), detail::loglog(r->c_est_sq * w2),
                    detail::loglog(r->lower_bound * w2), detail::loglog(r->upper_bound * w2));
      os << buf;
    }
    written.push_back(path);
  }
  std::vector<double> freqs;
  for (const auto& [key, rs] : groups)
    if (std::find(freqs.begin(), freqs.end(), key.first) == freqs.end()) freqs.push_back(key.first);
  for (double w2 : freqs) {
    const auto mc = compare_modes(records, w2);
    if (mc.n.empty()) continue;
    const auto path = out_dir / ("modes_" + detail::freq_tag(w2) + "Hz.dat");
    std::ofstream os(path);
    std::snprintf(buf, sizeof buf, "# omega2 = %.17g; loglog(c_top) - loglog(c_full): mean %.17g spread %.17g std %.17g\n",
                  w2, mc.mean, mc.spread, mc.stddev);
    os << buf << "# log_N diff_loglog diff_log\n";
    for (std::size_t i = 0; i < mc.n.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", std::log(static_cast<double>(mc.n[i])), mc.diff_loglog[i],
                    mc.diff_log[i]);
      os << buf;
    }
    written.push_back(path);
  }
  return written;
}

inline std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& records_csv,
                                                     const std::filesystem::path& out_dir) {
  std::ifstream is(records_csv);
  if (!is) throw InvalidArgument("cannot open records file " + records_csv.string());
  return emit_plots(read_records_csv(is), out_dir);
}

}  // namespace helmstab::campaign

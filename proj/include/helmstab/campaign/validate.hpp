#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "helmstab/campaign/config.hpp"
#include "helmstab/log.hpp"
#include "helmstab/spectrum.hpp"

namespace helmstab::campaign {

struct FrequencyCheck {
  double hz = 0.0;
  double omega2 = 0.0;
  FrequencySafety safety;
  std::string status;  // ok | near-edge | outside
};

struct ValidationReport {
  bool ok = false;
  std::string error;  // first schema/parse error
  int error_line = 0;
  std::vector<std::string> warnings;
  std::vector<FrequencyCheck> frequencies;
  double coarse_min = 0.0;  // c^-2 range of the models on the coarsest scale
  double coarse_max = 0.0;

  std::string summary() const;
};

inline std::string ValidationReport::summary() const {
  if (!ok) return "error: " + error + "\n";
  std::string out = "ok\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "coarse model c^-2 range: [%.6g, %.6g]\n", coarse_min, coarse_max);
  out += buf;
  out += "freq_hz      omega2        window  lo            hi            margin    status\n";
  for (const auto& f : frequencies) {
    std::snprintf(buf, sizeof buf, "%-12.6g %-13.6g %-7d %-13.6g %-13.6g %-9.3g %s\n", f.hz, f.omega2,
                  f.safety.window, f.safety.lo, f.safety.hi, f.safety.relative_margin, f.status.c_str());
    out += buf;
  }
  for (const auto& w : warnings) out += "warning: " + w + "\n";
  return out;
}

/// Schema check plus a window pre-check of every frequency against the model
/// bounds. Frequencies within 5% of a window edge are flagged.
inline ValidationReport validate_config(const ExperimentConfig& c) {
  ValidationReport rep;
  std::vector<double> ext(c.extents);
  try {
    const BoxGrid g = c.grid();
    const auto f1 = build_field(c, c.c1, c.seed);
    const auto f2 = build_field(c, c.c2, c.seed + 1);
    const auto coarse = build_partition(g, c.scales.front());
    const auto p1 = from_gridded_field(f1, coarse, c.bounds);
    const auto p2 = from_gridded_field(f2, coarse, c.bounds);
    rep.coarse_min = std::min(p1.model.min_value(), p2.model.min_value());
    rep.coarse_max = std::max(p1.model.max_value(), p2.model.max_value());
    if (p1.clamped + p2.clamped > 0) {
      rep.warnings.push_back(std::to_string(p1.clamped + p2.clamped) +
                             " coarse subdomain values were clamped into the slowness bounds");
    }
    for (const auto& s : c.scales) build_partition(g, s);
    for (auto mode : c.modes) make_acquisition(g, mode, c.source_spacing, c.receiver_spacing, c.sigma);
  } catch (const ConfigError& e) {
    rep.error = e.what();
    rep.error_line = e.line();
    return rep;
  } catch (const std::exception& e) {
    rep.error = e.what();
    return rep;
  }
  for (double hz : c.frequencies) {
    FrequencyCheck fc;
    fc.hz = hz;
    fc.omega2 = ExperimentConfig::omega2_of(hz);
    const auto fw = admissible_windows_covering(ext, c.bounds.b1, c.bounds.b2, fc.omega2);
    fc.safety = frequency_safety(fc.omega2, fw);
    char buf[320];
    if (!fc.safety.inside) {
      fc.status = "outside";
      std::snprintf(buf, sizeof buf,
                    "%.6g Hz (omega^2 = %.6g) is outside every admissible window lambda_{n-1}/B1 < omega^2 < "
                    "lambda_n/B2 for the model bounds; uniform well-posedness is not guaranteed",
                    hz, fc.omega2);
      rep.warnings.emplace_back(buf);
    } else if (fc.safety.relative_margin < 0.05) {
      fc.status = "near-edge";
      std::snprintf(buf, sizeof buf, "%.6g Hz is within %.2g%% of the edge of window %d", hz,
                    100.0 * fc.safety.relative_margin, fc.safety.window);
      rep.warnings.emplace_back(buf);
    } else {
      fc.status = "ok";
    }
    rep.frequencies.push_back(fc);
  }
  rep.ok = true;
  return rep;
}

inline ValidationReport validate_config(const std::filesystem::path& path) {
  try {
    return validate_config(load_config(path));
  } catch (const ConfigError& e) {
    ValidationReport rep;
    rep.error = e.what();
    rep.error_line = e.line();
    return rep;
  }
}

}  // namespace helmstab::campaign

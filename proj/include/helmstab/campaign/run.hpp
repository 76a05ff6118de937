#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "helmstab/campaign/config.hpp"
#include "helmstab/campaign/plots.hpp"
#include "helmstab/dtn_io.hpp"
#include "helmstab/forward.hpp"
#include "helmstab/log.hpp"
#include "helmstab/stability.hpp"

namespace helmstab::campaign {

enum ExitCode : int { kSuccess = 0, kConfigError = 1, kPartialFailure = 2, kTotalFailure = 3 };

struct CellFailure {
  double hz = 0.0;
  std::size_t n = 0;
  AcquisitionMode mode = AcquisitionMode::full;
  std::string error;
};

struct FitRow {
  double omega2 = 0.0;
  AcquisitionMode mode = AcquisitionMode::full;
  BoundConstants constants;
};

struct RunResult {
  int exit_code = kSuccess;
  std::vector<StabilityRecord> records;
  std::vector<FitRow> fits;
  std::vector<CellFailure> failures;
  std::size_t cells = 0;
};

namespace detail {

/// Writes to path.tmp and renames over path, so a crash never leaves a
/// half-written file behind.
template <typename Fn>
void atomic_write(const std::filesystem::path& path, Fn&& write, bool binary = false) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, binary ? std::ios::binary : std::ios::out);
    if (!os) throw InvalidArgument("cannot write " + tmp.string());
    write(os);
    os.flush();
    if (!os) throw InvalidArgument("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_constants_csv(std::ostream& os, const std::vector<FitRow>& fits, int dim) {
  os << "freq_hz,omega2,mode,k1,k,b2,records_used,k_records_used,exponents\n";
  char buf[512];
  for (const auto& f : fits) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%.17g,%.17g,%.17g,%zu,%zu,%s\n",
                  std::sqrt(f.omega2) / (2.0 * std::numbers::pi), f.omega2, to_string(f.mode), f.constants.k1,
                  f.constants.k, f.constants.b2, f.constants.records_used, f.constants.k_records_used,
                  dim == 3 ? "3D" : "3D-nominal");
    os << buf;
  }
}

class SystemCache {
 public:
  explicit SystemCache(bool enabled) : enabled_(enabled) {}

  std::shared_ptr<const HelmholtzSystem> get(const SquaredSlownessModel& m, double omega2,
                                             AssembleOptions::Timings& t) {
    const auto key = std::make_pair(m.fingerprint(), omega2);
    if (enabled_) {
      if (auto it = map_.find(key); it != map_.end()) {
        t = {};
        return it->second;
      }
    }
    AssembleOptions opts;
    opts.timings = &t;
    auto sys = std::make_shared<const HelmholtzSystem>(assemble(m.grid(), to_cell_field(m), omega2, opts));
    if (enabled_) map_[key] = sys;
    return sys;
  }
  void clear() { map_.clear(); }

 private:
  bool enabled_;
  std::map<std::pair<std::uint64_t, double>, std::shared_ptr<const HelmholtzSystem>> map_;
};

}  // namespace detail

/// Runs every (frequency, scale, mode) cell, then fits bound constants per
/// (frequency, mode). Failing cells are logged and skipped.
inline RunResult run_campaign(const ExperimentConfig& c) {
  RunResult res;
  namespace fs = std::filesystem;
  fs::create_directories(c.output_dir);
  const auto records_path = c.output_dir / "records.csv";
  const BoxGrid g = c.grid();

  std::vector<double> f1, f2;
  try {
    f1 = build_field(c, c.c1, c.seed);
    f2 = build_field(c, c.c2, c.seed + 1);
  } catch (const std::exception& e) {
    log::warn("cannot build models: ", e.what());
    res.exit_code = kTotalFailure;
    return res;
  }
  std::map<AcquisitionMode, Acquisition> acqs;
  for (auto mode : c.modes) acqs.emplace(mode, make_acquisition(g, mode, c.source_spacing, c.receiver_spacing, c.sigma));

  auto flush_records = [&] {
    detail::atomic_write(records_path, [&](std::ostream& os) { write_records_csv(os, res.records); });
  };
  flush_records();

  ForwardOptions fo;
  fo.kind = c.dtn;
  fo.workers = c.workers;
  fo.override_window_check = c.override_window_check;

  for (double hz : c.frequencies) {
    const double w2 = ExperimentConfig::omega2_of(hz);
    detail::SystemCache cache(c.cache);
    for (const auto& blocks : c.scales) {
      std::optional<SquaredSlownessModel> m1, m2;
      std::string scale_error;
      try {
        const auto p = build_partition(g, blocks);
        auto p1 = from_gridded_field(f1, p, c.bounds);
        auto p2 = from_gridded_field(f2, p, c.bounds);
        if (p1.clamped + p2.clamped > 0)
          log::warn("N=", p.size(), ": ", p1.clamped + p2.clamped, " subdomain values clamped into bounds");
        m1.emplace(std::move(p1.model));
        m2.emplace(std::move(p2.model));
      } catch (const std::exception& e) {
        scale_error = e.what();
      }
      for (auto mode : c.modes) {
        ++res.cells;
        std::size_t n = 1;
        for (int b : blocks) n *= static_cast<std::size_t>(b);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          if (!scale_error.empty()) throw InvalidArgument(scale_error);
          if (*m1 == *m2) throw DegenerateInput("models are identical; the stability ratio is undefined");
          check_window(*m1, w2, c.override_window_check);
          check_window(*m2, w2, c.override_window_check);
          const auto& acq = acqs.at(mode);
          AssembleOptions::Timings t1, t2;
          const auto s1 = cache.get(*m1, w2, t1);
          const auto s2 = cache.get(*m2, w2, t2);
          const auto ts = std::chrono::steady_clock::now();
          auto data = [&](const SquaredSlownessModel& m, const HelmholtzSystem& sys) {
            DtnData d;
            d.acquisition = acq;
            d.omega2 = w2;
            d.kind = c.dtn;
            d.values = forward_values(sys, acq, fo);
            d.model_hash = m.fingerprint();
            d.grid_hash = g.fingerprint();
            return d;
          };
          const DtnData d1 = data(*m1, *s1);
          const DtnData d2 = data(*m2, *s2);
          const double solve_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
          StabilityRecord r = estimate_constant_from_data(*m1, *m2, d1, d2);
          res.records.push_back(r);
          flush_records();
          char buf[400];
          std::snprintf(buf, sizeof buf,
                        "cell f=%g Hz N=%zu mode=%s: c_est=%.6g data_norm=%.6g | assembly %.3fs factorization %.3fs "
                        "solve/source %.2es total %.3fs",
                        hz, n, to_string(mode), r.c_est, r.data_norm, t1.assembly + t2.assembly,
                        t1.factorization + t2.factorization, solve_s / (2.0 * acq.num_sources()),
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          log::info(buf);
        } catch (const std::exception& e) {
          res.failures.push_back({hz, n, mode, e.what()});
          log::warn("cell f=", hz, " Hz N=", n, " mode=", to_string(mode), " failed: ", e.what());
        }
      }
    }
  }

  // fit per (frequency, mode) and fill the bound columns
  std::map<std::pair<double, int>, std::vector<std::size_t>> groups;
  std::vector<std::pair<double, int>> order;
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const auto key = std::make_pair(res.records[i].omega2, static_cast<int>(res.records[i].mode));
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(i);
  }
  for (const auto& key : order) {
    std::vector<StabilityRecord> rs;
    for (auto i : groups[key]) rs.push_back(res.records[i]);
    try {
      FitRow row{key.first, static_cast<AcquisitionMode>(key.second), fit_constants(rs, c.bounds.b2, {c.first_scales})};
      for (auto i : groups[key]) apply_bounds(res.records[i], row.constants);
      res.fits.push_back(row);
    } catch (const std::exception& e) {
      log::warn("fit failed for omega^2=", key.first, ": ", e.what());
    }
  }
  flush_records();
  detail::atomic_write(c.output_dir / "constants.csv",
                       [&](std::ostream& os) { detail::write_constants_csv(os, res.fits, g.dim()); });
  detail::atomic_write(c.output_dir / "linf.csv",
                       [&](std::ostream& os) { write_linf_report_csv(os, linf_stability_report(res.records, g.dim())); });
  if (!res.records.empty()) emit_plots(res.records, c.output_dir / "plots");

  if (res.failures.empty()) {
    res.exit_code = kSuccess;
  } else if (res.failures.size() == res.cells) {
    res.exit_code = kTotalFailure;
  } else {
    res.exit_code = kPartialFailure;
  }
  log::info("campaign finished: ", res.records.size(), " records, ", res.failures.size(), " failed cells");
  return res;
}

/// Single forward map of model c1 at one frequency, written as binary data.
inline DtnData run_forward(const ExperimentConfig& c, double hz, AcquisitionMode mode, const std::vector<int>& blocks) {
  const BoxGrid g = c.grid();
  const auto p = build_partition(g, blocks);
  const auto m = from_gridded_field(build_field(c, c.c1, c.seed), p, c.bounds).model;
  const auto acq = make_acquisition(g, mode, c.source_spacing, c.receiver_spacing, c.sigma);
  ForwardOptions fo;
  fo.kind = c.dtn;
  fo.workers = c.workers;
  fo.override_window_check = c.override_window_check;
  return forward_map(m, ExperimentConfig::omega2_of(hz), acq, fo);
}

}  // namespace helmstab::campaign

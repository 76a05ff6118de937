#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "helmstab/campaign.hpp"
#include "helmstab/dtn_io.hpp"
#include "helmstab/spectrum.hpp"

namespace cmp = helmstab::campaign;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  bool override_window = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required = true) {
  auto* opt = app->add_option("--config", f.config, "experiment config (YAML)");
  if (config_required) opt->required();
  app->add_option("--out", f.out, "output directory");
  app->add_option("--workers", f.workers, "worker threads for per-source solves");
  app->add_option("--seed", f.seed, "RNG seed for randomized generators");
  app->add_flag("--override-window-check", f.override_window, "run frequencies outside admissible windows");
}

cmp::ExperimentConfig load(const CommonFlags& f) {
  auto c = cmp::load_config(f.config);
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.workers) c.workers = *f.workers;
  if (f.seed) c.seed = *f.seed;
  if (f.override_window) c.override_window_check = true;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"helmstab: stability experiments for the discrete Helmholtz Dirichlet-to-Neumann map"};
  app.require_subcommand(1);

  CommonFlags run_f, val_f, win_f, fwd_f;
  auto* run = app.add_subcommand("run", "run a stability campaign");
  add_common(run, run_f);

  auto* validate = app.add_subcommand("validate", "check a config and pre-check frequencies");
  add_common(validate, val_f);

  std::string records_csv, plot_out;
  auto* plot = app.add_subcommand("plot-data", "write plot-data files from a records CSV");
  plot->add_option("records", records_csv, "records.csv from a campaign")->required();
  plot->add_option("--out", plot_out, "output directory")->required();

  int win_count = 16;
  auto* windows = app.add_subcommand("windows", "print admissible frequency windows for the config's bounds");
  add_common(windows, win_f);
  windows->add_option("--count", win_count, "number of eigenvalues");

  double fwd_hz = 0.0;
  std::string fwd_mode = "full";
  std::vector<int> fwd_blocks;
  std::string fwd_file;
  auto* forward = app.add_subcommand("forward", "single forward map of model c1 to a data file");
  add_common(forward, fwd_f);
  forward->add_option("--frequency", fwd_hz, "frequency in Hz")->required();
  forward->add_option("--mode", fwd_mode, "full or top")->check(CLI::IsMember({"full", "top"}));
  forward->add_option("--blocks", fwd_blocks, "blocks per axis (default: finest configured scale)");
  forward->add_option("--file", fwd_file, "output file (default: <out>/forward.hsdt)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto c = load(run_f);
      return cmp::run_campaign(c).exit_code;
    }
    if (*validate) {
      const auto c = load(val_f);
      const auto rep = cmp::validate_config(c);
      std::cout << rep.summary();
      return rep.ok ? cmp::kSuccess : cmp::kConfigError;
    }
    if (*plot) {
      const auto files = cmp::emit_plots(records_csv, plot_out);
      for (const auto& f : files) std::cout << f.string() << '\n';
      return cmp::kSuccess;
    }
    if (*windows) {
      const auto c = load(win_f);
      const auto fw = helmstab::admissible_windows(c.extents, c.bounds.b1, c.bounds.b2, win_count);
      helmstab::write_windows_csv(std::cout, fw);
      return cmp::kSuccess;
    }
    if (*forward) {
      const auto c = load(fwd_f);
      const auto mode = fwd_mode == "top" ? helmstab::AcquisitionMode::top_only : helmstab::AcquisitionMode::full;
      const auto blocks = fwd_blocks.empty() ? c.scales.back() : fwd_blocks;
      const auto d = cmp::run_forward(c, fwd_hz, mode, blocks);
      std::filesystem::create_directories(c.output_dir);
      const auto path = fwd_file.empty() ? (c.output_dir / "forward.hsdt").string() : fwd_file;
      helmstab::save_dtn(path, d, c.dim());
      std::cout << path << ": " << d.values.rows() << " sources x " << d.values.cols() << " receivers\n";
      return cmp::kSuccess;
    }
  } catch (const helmstab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cmp::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cmp::kTotalFailure;
  }
  return cmp::kSuccess;
}

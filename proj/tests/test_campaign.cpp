#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helmstab/campaign.hpp"
#include "helmstab/log.hpp"

using namespace helmstab;
using namespace helmstab::campaign;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(grid:
  extents: [1.0, 1.0]
  cells: [16, 16]
models:
  quantity: velocity
  bounds:
    velocity: [1.5, 2.5]
  c1: {generator: two_layer, top: 1.8, bottom: 2.2, interface_depth: 0.4}
  c2: {generator: linear_depth, top: 1.8, bottom: 2.2}
frequencies: [0.9]
scales:
  - [1, 1]
  - [2, 2]
  - [4, 4]
acquisition:
  modes: [full, top]
  source_spacing: [0.25, 0.25]
  receiver_spacing: [0.125, 0.125]
  sigma: 0.08
output:
  dir: unused
seed: 3
)";

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("helmstab_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig small(const fs::path& out) {
  auto c = parse_config_text(kSmall);
  c.output_dir = out;
  return c;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HELMSTAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class CampaignTest : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("HELMSTAB_OUT");
    unsetenv("HELMSTAB_WORKERS");
  }
};

}  // namespace

TEST_F(CampaignTest, ParsesSmallConfig) {
  const auto c = parse_config_text(kSmall);
  EXPECT_EQ(c.dim(), 2);
  EXPECT_EQ(c.scales.size(), 3u);
  EXPECT_DOUBLE_EQ(c.bounds.b1, 1.0 / 6.25);
  EXPECT_DOUBLE_EQ(c.bounds.b2, 1.0 / 2.25);
  EXPECT_EQ(c.modes.size(), 2u);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.dtn, DtnKind::sampled);
}

TEST_F(CampaignTest, MissingFieldNamesFieldAndLine) {
  const auto text = replace(kSmall, "  sigma: 0.08\n", "");
  try {
    parse_config_text(text);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("acquisition.sigma"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 16);  // first line of the acquisition mapping
  }
}

TEST_F(CampaignTest, BadValuesAreRejected) {
  EXPECT_THROW(parse_config_text(replace(kSmall, "[16, 16]", "[16, 1]")), ConfigError);
  EXPECT_THROW(parse_config_text(replace(kSmall, "[0.9]", "[]")), ConfigError);
  EXPECT_THROW(parse_config_text(replace(kSmall, "  - [4, 4]\n", "  - [2, 2]\n")), ConfigError);
  EXPECT_THROW(parse_config_text(replace(kSmall, "[full, top]", "[full, side]")), ConfigError);
  EXPECT_THROW(parse_config_text(replace(kSmall, "sigma: 0.08", "sigma: abc")), ConfigError);
  EXPECT_THROW(parse_config_text("grid: [1, 2"), ConfigError);
  try {
    parse_config_text(replace(kSmall, "[1.5, 2.5]", "[2.5, 1.5]"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 7);
  }
}

TEST_F(CampaignTest, EnvironmentOverrides) {
  setenv("HELMSTAB_OUT", "/tmp/elsewhere", 1);
  setenv("HELMSTAB_WORKERS", "3", 1);
  const auto c = parse_config_text(kSmall);
  EXPECT_EQ(c.output_dir, fs::path("/tmp/elsewhere"));
  EXPECT_EQ(c.workers, 3u);
  setenv("HELMSTAB_WORKERS", "many", 1);
  EXPECT_THROW(parse_config_text(kSmall), ConfigError);
}

TEST_F(CampaignTest, ValidateReportsWindows) {
  auto rep = validate_config(parse_config_text(kSmall));
  ASSERT_TRUE(rep.ok) << rep.error;
  ASSERT_EQ(rep.frequencies.size(), 1u);
  EXPECT_EQ(rep.frequencies[0].status, "ok");
  EXPECT_EQ(rep.summary().substr(0, 3), "ok\n");
  // (2 pi 1.2)^2 = 56.8 lies above lambda_1/B2 = 44.4 and below lambda_1/B1 = 123
  rep = validate_config(parse_config_text(replace(kSmall, "[0.9]", "[1.2]")));
  ASSERT_TRUE(rep.ok);
  EXPECT_EQ(rep.frequencies[0].status, "outside");
  EXPECT_FALSE(rep.warnings.empty());
}

TEST_F(CampaignTest, ValidateMissingFile) {
  const auto rep = validate_config(fs::path("/nonexistent/config.yaml"));
  EXPECT_FALSE(rep.ok);
  EXPECT_NE(rep.error.find("cannot open"), std::string::npos);
}

TEST_F(CampaignTest, SmallCampaignWritesOutputs) {
  const auto out = scratch("small");
  const auto res = run_campaign(small(out));
  EXPECT_EQ(res.exit_code, kSuccess);
  EXPECT_EQ(res.records.size(), 6u);
  EXPECT_EQ(res.fits.size(), 2u);
  for (const char* f : {"records.csv", "constants.csv", "linf.csv", "plots/plot_0.9Hz_full.dat",
                        "plots/plot_0.9Hz_top.dat", "plots/modes_0.9Hz.dat"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::ifstream is(out / "records.csv");
  const auto back = read_records_csv(is);
  ASSERT_EQ(back.size(), 6u);
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].c_est, res.records[i].c_est);
    EXPECT_FALSE(std::isnan(back[i].lower_bound));
    EXPECT_EQ(back[i].c_est_sq, back[i].c_est * back[i].c_est);
  }
  // top data is a sub-block of full data
  for (std::size_t i = 0; i + 1 < res.records.size(); i += 2) {
    EXPECT_EQ(res.records[i].mode, AcquisitionMode::full);
    EXPECT_LE(res.records[i + 1].data_norm, res.records[i].data_norm);
  }
}

TEST_F(CampaignTest, RerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  auto ca = small(a), cb = small(b);
  cb.cache = false;
  cb.workers = 3;
  run_campaign(ca);
  run_campaign(cb);
  for (const char* f : {"records.csv", "constants.csv", "linf.csv", "plots/plot_0.9Hz_top.dat"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST_F(CampaignTest, IdenticalModelsFailEveryCell) {
  const auto out = scratch("degenerate");
  auto c = small(out);
  c.c2 = c.c1;
  log::ScopedCapture cap;
  const auto res = run_campaign(c);
  EXPECT_EQ(res.exit_code, kTotalFailure);
  EXPECT_EQ(res.failures.size(), 6u);
  EXPECT_TRUE(res.records.empty());
}

TEST_F(CampaignTest, OutOfWindowFrequencyIsAPartialFailure) {
  const auto out = scratch("partial");
  auto c = small(out);
  c.frequencies = {0.9, 1.2};
  log::ScopedCapture cap;
  const auto res = run_campaign(c);
  EXPECT_EQ(res.exit_code, kPartialFailure);
  EXPECT_EQ(res.records.size(), 6u);
  EXPECT_EQ(res.failures.size(), 6u);
}

TEST_F(CampaignTest, EmitPlotsEdgeCases) {
  const auto out = scratch("plots");
  {
    log::ScopedCapture cap;
    EXPECT_TRUE(emit_plots(std::vector<StabilityRecord>{}, out / "empty").empty());
    EXPECT_EQ(cap.warnings.size(), 1u);
    EXPECT_FALSE(fs::exists(out / "empty"));
  }
  StabilityRecord r;
  r.n = 4;
  r.omega2 = ExperimentConfig::omega2_of(0.9);
  r.c_est = 2.0;
  r.c_est_sq = 4.0;
  const auto files = emit_plots(std::vector<StabilityRecord>{r}, out / "one");
  ASSERT_EQ(files.size(), 1u);
  const auto text = slurp(files[0]);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("nan"), std::string::npos);  // bounds unset
}

TEST_F(CampaignTest, CompareModes) {
  std::vector<StabilityRecord> rs;
  for (std::size_t n : {4u, 16u}) {
    for (auto [mode, c] : {std::pair{AcquisitionMode::full, 2.0}, std::pair{AcquisitionMode::top_only, 3.0}}) {
      StabilityRecord r;
      r.n = n;
      r.omega2 = 10.0;
      r.mode = mode;
      r.c_est = c * static_cast<double>(n);
      rs.push_back(r);
    }
  }
  const auto mc = compare_modes(rs, 10.0);
  ASSERT_EQ(mc.n.size(), 2u);
  EXPECT_NEAR(mc.diff_log[0], std::log(1.5), 1e-14);
  EXPECT_NEAR(mc.diff_loglog[0], std::log(std::log(12.0)) - std::log(std::log(8.0)), 1e-14);
  EXPECT_EQ(mc.finite, 2u);
}

TEST_F(CampaignTest, ConstantsCsvMarksDimension) {
  std::ostringstream os;
  campaign::detail::write_constants_csv(os, {FitRow{10.0, AcquisitionMode::full, {0.1, 0.2, 0.3, 2, 1}}}, 2);
  EXPECT_NE(os.str().find("3D-nominal"), std::string::npos);
}

TEST_F(CampaignTest, CliExitCodes) {
  const auto dir = scratch("cli");
  {
    std::ofstream(dir / "good.yaml") << kSmall;
    std::ofstream(dir / "bad.yaml") << replace(kSmall, "  sigma: 0.08\n", "");
    auto same = replace(kSmall, "{generator: linear_depth, top: 1.8, bottom: 2.2}",
                        "{generator: two_layer, top: 1.8, bottom: 2.2, interface_depth: 0.4}");
    std::ofstream(dir / "same.yaml") << same;
  }
  const std::string d = dir.string();
  EXPECT_EQ(run_cli("validate --config " + d + "/good.yaml"), 0);
  EXPECT_EQ(run_cli("validate --config " + d + "/bad.yaml"), 1);
  EXPECT_EQ(run_cli("run --config " + d + "/bad.yaml"), 1);
  EXPECT_EQ(run_cli("run --config " + d + "/same.yaml --out " + d + "/same"), 3);
  EXPECT_EQ(run_cli("run --config " + d + "/good.yaml --out " + d + "/run --workers 2"), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "records.csv"));
  EXPECT_EQ(run_cli("plot-data " + d + "/run/records.csv --out " + d + "/replot"), 0);
  EXPECT_EQ(slurp(dir / "run/plots/plot_0.9Hz_full.dat"), slurp(dir / "replot/plot_0.9Hz_full.dat"));
  EXPECT_EQ(run_cli("windows --config " + d + "/good.yaml --count 4"), 0);
  EXPECT_EQ(run_cli("forward --config " + d + "/good.yaml --frequency 0.9 --mode top --blocks 2 2 --out " + d), 0);
  const auto data = load_dtn((dir / "forward.hsdt").string());
  EXPECT_EQ(data.values.rows(), 4);
  EXPECT_EQ(data.values.cols(), 8);
  EXPECT_NE(run_cli("bogus"), 0);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "helmstab/log.hpp"
#include "helmstab/sobolev.hpp"
#include "helmstab/stability.hpp"

using namespace helmstab;

namespace {

const SlownessBounds kBounds{1.0, 2.0};

double omega2_of(double hz) { return std::pow(2.0 * std::numbers::pi * hz, 2); }

StabilityRecord synthetic(std::size_t n, double omega2, double c) {
  StabilityRecord r;
  r.n = n;
  r.omega2 = omega2;
  r.c_est = c;
  r.c_est_sq = c * c;
  return r;
}

}  // namespace

TEST(EstimateConstant, ConstantShiftSingleSubdomain) {
  const auto g = build_grid({1.5, 1.0}, {24, 16});
  const auto p = build_partition(g, {1, 1});
  const double s = 0.2;
  const SquaredSlownessModel m1(p, std::vector<double>{1.3}, kBounds), m2(p, std::vector<double>{1.3 + s}, kBounds);
  const auto acq = make_acquisition(g, AcquisitionMode::full, {0.25, 0.25}, {0.125, 0.125}, 0.08);
  const auto r = estimate_constant(m1, m2, 3.0, acq);
  EXPECT_NEAR(r.model_l2, s * std::sqrt(1.5), 1e-14);
  EXPECT_TRUE(std::isfinite(r.c_est));
  EXPECT_GT(r.c_est, 0.0);
  EXPECT_EQ(r.c_est_sq, r.c_est * r.c_est);
  EXPECT_TRUE(std::isnan(r.lower_bound));
  EXPECT_EQ(r.norm_kind, kNormKind);
}

TEST(EstimateConstant, IdenticalModelsAreDegenerate) {
  const auto g = build_grid({1.0, 1.0}, {16, 16});
  const auto p = build_partition(g, {2, 2});
  const SquaredSlownessModel m(p, std::vector<double>{1.2, 1.4, 1.6, 1.8}, kBounds);
  const auto acq = make_acquisition(g, AcquisitionMode::full, {0.25, 0.25}, {0.125, 0.125}, 0.08);
  EXPECT_THROW(estimate_constant(m, m, 3.0, acq), DegenerateInput);
}

TEST(EstimateConstant, TinyDataDifferenceIsIllConditioned) {
  const auto g = build_grid({1.0, 1.0}, {16, 16});
  const auto p = build_partition(g, {2, 2});
  const SquaredSlownessModel m1(p, std::vector<double>{1.2, 1.4, 1.6, 1.8}, kBounds);
  const SquaredSlownessModel m2(p, std::vector<double>{1.2, 1.4, 1.6, 1.8 + 1e-15}, kBounds);
  const auto acq = make_acquisition(g, AcquisitionMode::full, {0.25, 0.25}, {0.125, 0.125}, 0.08);
  auto d1 = forward_map(m1, 3.0, acq);
  auto d2 = d1;
  EXPECT_THROW(estimate_constant_from_data(m1, m2, d1, d2), IllConditioned);
}

TEST(EstimateConstant, TopOnlyRatioAtLeastFull) {
  const auto g = build_grid({1.0, 1.0}, {24, 24});
  const auto p = build_partition(g, {3, 3});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1.1, 1.9);
  std::vector<double> a(9), b(9);
  for (auto* v : {&a, &b})
    for (double& x : *v) x = u(rng);
  const SquaredSlownessModel m1(p, a, kBounds), m2(p, b, kBounds);
  const auto full = make_acquisition(g, AcquisitionMode::full, {0.25, 0.25}, {0.125, 0.125}, 0.08);
  const auto top = make_acquisition(g, AcquisitionMode::top_only, {0.25, 0.25}, {0.125, 0.125}, 0.08);
  const auto rf = estimate_constant(m1, m2, 3.0, full);
  const auto rt = estimate_constant(m1, m2, 3.0, top);
  EXPECT_LE(rt.data_norm, rf.data_norm);
  EXPECT_GE(rt.c_est, rf.c_est);
}

TEST(Bounds, PlugIn) {
  const double w2 = omega2_of(5.0);
  const auto b = evaluate_bounds(1.0, w2, {.k = 0.0, .k1 = 1.0});
  EXPECT_NEAR(b.lower, std::numbers::e / (4.0 * w2), 1e-15 * b.lower);
  EXPECT_NEAR(b.upper, 1.0 / w2, 1e-15);
  EXPECT_FALSE(b.saturated());
}

TEST(Bounds, FieldConstants) {
  const double w2 = omega2_of(10.0);
  const BoundConstants c{.k = 0.05, .k1 = 0.7, .b2 = 1.0 / (1400.0 * 1400.0)};
  EXPECT_LT(w2 * c.b2, 0.01);
  for (double n : {8.0, 64.0, 512.0}) {
    const auto b = evaluate_bounds(n, w2, c);
    EXPECT_NEAR(b.lower, std::exp(0.7 * std::pow(n, 0.2)) / (4 * w2), 1e-14 * b.lower);
    EXPECT_NEAR(b.upper, std::exp(0.05 * (1 + w2 * c.b2) * std::pow(n, 4.0 / 7.0)) / w2, 1e-14 * b.upper);
  }
}

TEST(Bounds, RatioGrowsWithN) {
  const BoundConstants c{.k = 0.3, .k1 = 0.2, .b2 = 0.01};
  double prev = 0.0;
  for (double n = 1; n <= 4096; n *= 4) {
    const auto b = evaluate_bounds(n, 4.0, c);
    const double ratio = b.upper / b.lower;
    EXPECT_GT(ratio, prev);
    prev = ratio;
  }
}

TEST(Bounds, SaturateWithFlag) {
  const auto b = evaluate_bounds(1e12, 4.0, {.k = 1.0, .k1 = 1.0, .b2 = 1.0});
  EXPECT_TRUE(b.upper_saturated);
  EXPECT_EQ(b.upper, std::numeric_limits<double>::max());
  EXPECT_THROW(evaluate_bounds(0.5, 4.0, {}), InvalidArgument);
  EXPECT_THROW(evaluate_bounds(2.0, 0.0, {}), InvalidArgument);
}

TEST(Fit, LowerConstantInversion) {
  const double w2 = 7.0;
  const double n = 32.0;
  // log(4 w2 C) = N^(1/5)
  const auto r = synthetic(32, w2, std::exp(std::pow(n, 0.2)) / (4 * w2));
  EXPECT_NEAR(fit_constants({r}, 0.0).k1, 1.0, 1e-14);
}

TEST(Fit, RoundTripUpperFormula) {
  const double w2 = omega2_of(0.9);
  const BoundConstants truth{.k = 0.1, .k1 = 0.4, .b2 = 0.25};
  std::vector<StabilityRecord> rs;
  for (std::size_t n : {4u, 16u, 64u, 256u}) rs.push_back(synthetic(n, w2, evaluate_bounds(double(n), w2, truth).upper));
  const auto c = fit_constants(rs, truth.b2, {.first_scales = 4});
  EXPECT_NEAR(c.k, 0.1, 1e-12);
  rs.clear();
  for (std::size_t n : {4u, 16u, 64u, 256u}) rs.push_back(synthetic(n, w2, evaluate_bounds(double(n), w2, truth).lower));
  EXPECT_NEAR(fit_constants(rs, truth.b2).k1, 0.4, 1e-12);
}

TEST(Fit, UsesFirstScalesForUpperConstant) {
  const double w2 = 3.0;
  std::vector<StabilityRecord> rs{synthetic(64, w2, 1e6), synthetic(4, w2, 2.0), synthetic(16, w2, 5.0),
                                  synthetic(256, w2, 1e9)};
  const auto c = fit_constants(rs, 0.1);
  EXPECT_EQ(c.k_records_used, 2u);
  const double expect = 0.5 * (std::log(w2 * 2.0) / (1.3 * std::pow(4.0, 4.0 / 7.0)) +
                               std::log(w2 * 5.0) / (1.3 * std::pow(16.0, 4.0 / 7.0)));
  EXPECT_NEAR(c.k, expect, 1e-14);
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit_constants({}, 0.1), InvalidArgument);
  EXPECT_THROW(fit_constants({synthetic(4, 3.0, 0.0)}, 0.1), InvalidArgument);
  EXPECT_THROW(fit_constants({synthetic(4, 3.0, 1.0), synthetic(8, 4.0, 1.0)}, 0.1), InvalidArgument);
}

TEST(Linf, ConstantAndSingleSubdomainDifferences) {
  const auto g = build_grid({2.0, 1.0}, {16, 8});
  const auto p = build_partition(g, {2, 2});
  const std::vector<double> a{1.2, 1.4, 1.6, 1.8};
  std::vector<double> b = a, c = a;
  for (double& x : b) x += 0.1;
  c[3] -= 0.3;
  const SquaredSlownessModel ma(p, a, kBounds), mb(p, b, kBounds), mc(p, c, kBounds);
  StabilityRecord r1, r2;
  for (auto [r, m] : {std::pair{&r1, &mb}, std::pair{&r2, &mc}}) {
    r->n = 4;
    r->model_l2 = l2_distance(ma, *m);
    r->model_linf = linf_distance(ma, *m);
    r->volume = g.volume();
    r->r0 = p.r0();
  }
  const auto rows = linf_stability_report({r1, r2}, 2);
  EXPECT_NEAR(rows[0].linf, 0.1, 1e-15);
  EXPECT_NEAR(rows[0].l2, 0.1 * std::sqrt(2.0), 1e-15);
  EXPECT_TRUE(rows[0].lower_holds);
  EXPECT_NEAR(rows[1].linf, 0.3, 1e-15);
  EXPECT_NEAR(rows[1].l2, 0.3 * std::sqrt(p.volume(3)), 1e-15);
  EXPECT_TRUE(rows[1].lower_holds);
  std::ostringstream os;
  write_linf_report_csv(os, rows);
  const auto text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Linf, RandomPairsLowerSandwich) {
  const auto g = build_grid({1.0, 1.0}, {20, 20});
  const auto p = build_partition(g, {5, 5});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  std::vector<StabilityRecord> rs;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(25), b(25);
    for (auto* v : {&a, &b})
      for (double& x : *v) x = u(rng);
    const SquaredSlownessModel ma(p, a, kBounds), mb(p, b, kBounds);
    StabilityRecord r;
    r.model_l2 = l2_distance(ma, mb);
    r.model_linf = linf_distance(ma, mb);
    r.volume = g.volume();
    rs.push_back(r);
  }
  for (const auto& row : linf_stability_report(rs, 2)) EXPECT_TRUE(row.lower_holds);
}

TEST(Records, CsvRoundTrip) {
  std::vector<StabilityRecord> rs{synthetic(4, 3.0, 1.0 / 3.0), synthetic(16, 3.0, std::numbers::pi)};
  rs[1].mode = AcquisitionMode::top_only;
  rs[1].lower_bound = 0.125;
  rs[1].upper_bound = 1e300;
  std::stringstream ss;
  write_records_csv(ss, rs);
  const auto back = read_records_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].c_est, rs[0].c_est);
  EXPECT_EQ(back[1].c_est_sq, rs[1].c_est_sq);
  EXPECT_EQ(back[1].mode, AcquisitionMode::top_only);
  EXPECT_EQ(back[1].upper_bound, 1e300);
  EXPECT_TRUE(std::isnan(back[0].lower_bound));
  std::stringstream bad("N,omega2\n");
  EXPECT_THROW(read_records_csv(bad), InvalidArgument);
}

TEST(Sobolev, SingleSubdomainHoldsWithSlack) {
  const auto g = build_grid({1.0, 1.0}, {8, 8});
  const auto p = build_partition(g, {1, 1});
  const std::vector<double> v{1.5};
  const auto r = fractional_sobolev_check(p, v, 0.25, 20000, 1);
  // no jumps: only the L2 parts, rhs = 2 lhs
  EXPECT_NEAR(r.rhs, 2.0 * r.lhs, 1e-12);
  EXPECT_TRUE(r.holds);
}

TEST(Sobolev, TwoSubdomainsWithOneZero) {
  const auto g = build_grid({1.0, 1.0}, {8, 8});
  const auto p = build_partition(g, {2, 1});
  const std::vector<double> v{0.0, 1.0};
  const auto r = fractional_sobolev_check(p, v, 0.25, 200000, 2);
  // f = chi_D2: lhs = ||chi_D2||^2, rhs = 2 ||chi_D2||^2 from the same samples
  EXPECT_NEAR(r.lhs, r.indicator_norms[1], 1e-9 * r.lhs);
  EXPECT_NEAR(r.rhs, 2.0 * r.indicator_norms[1], 1e-9 * r.rhs);
  EXPECT_TRUE(r.holds);
}

TEST(Sobolev, RandomFourByFourHolds) {
  const auto g = build_grid({1.0, 1.0}, {16, 16});
  const auto p = build_partition(g, {4, 4});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  std::vector<double> v(16);
  for (double& x : v) x = u(rng);
  const auto r = fractional_sobolev_check(p, v, 0.25, 200000, 4);
  EXPECT_TRUE(r.holds);
  EXPECT_GT(r.difference, 0.0);
}

TEST(Sobolev, ArgumentsAndWarning) {
  const auto g = build_grid({1.0, 1.0}, {8, 8});
  const auto p = build_partition(g, {2, 2});
  const std::vector<double> v{1, 2, 1, 2};
  EXPECT_THROW(fractional_sobolev_check(p, v, 0.5, 20000, 1), InvalidArgument);
  EXPECT_THROW(fractional_sobolev_check(p, v, 0.0, 20000, 1), InvalidArgument);
  EXPECT_THROW(fractional_sobolev_check(p, std::vector<double>{1.0}, 0.25, 20000, 1), InvalidArgument);
  log::ScopedCapture cap;
  fractional_sobolev_check(p, v, 0.25, 100, 1);
  EXPECT_EQ(cap.warnings.size(), 1u);
}

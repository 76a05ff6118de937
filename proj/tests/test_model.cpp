#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helmstab/model.hpp"
#include "helmstab/model_io.hpp"

using namespace helmstab;

namespace {
const SlownessBounds kBounds{0.5, 4.0};
}

TEST(Model, ValuesMustRespectBounds) {
  const auto g = build_grid({1.0, 1.0}, {4, 4});
  const auto p = build_partition(g, {2, 1});
  EXPECT_NO_THROW(SquaredSlownessModel(p, {1.0, 2.0}, kBounds));
  EXPECT_THROW(SquaredSlownessModel(p, {1.0, 5.0}, kBounds), InvalidArgument);
  EXPECT_THROW(SquaredSlownessModel(p, {1.0}, kBounds), InvalidArgument);
  EXPECT_THROW(SquaredSlownessModel(p, {1.0, 2.0}, SlownessBounds{0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(SquaredSlownessModel(p, {1.0, 2.0}, SlownessBounds{2.0, 1.0}), InvalidArgument);
}

TEST(Projection, ConstantFieldIsExact) {
  const auto g = build_grid({1.0, 1.0, 1.0}, {6, 6, 6});
  const auto p = build_partition(g, {4, 3, 2});
  const auto r = from_gridded_field(generators::constant(g, 1.7), p, kBounds);
  EXPECT_EQ(r.clamped, 0u);
  for (double v : r.model.values()) EXPECT_NEAR(v, 1.7, 1e-15);
}

TEST(Projection, CheckerboardAveragesToMean) {
  const auto g = build_grid({1.0, 1.0}, {4, 4});
  std::vector<double> f(g.num_cells());
  for (std::size_t c = 0; c < f.size(); ++c) {
    const auto m = g.cell_multi(c);
    f[c] = (m[0] + m[1]) % 2 == 0 ? 1.0 : 3.0;
  }
  const auto r = from_gridded_field(f, build_partition(g, {1, 1}), kBounds);
  EXPECT_NEAR(r.model.value(0), 2.0, 1e-15);
}

TEST(Projection, ClampsAndCounts) {
  const auto g = build_grid({1.0, 1.0}, {4, 4});
  const auto p = build_partition(g, {2, 1});
  std::vector<double> f(g.num_cells(), 1.0);
  for (std::size_t c = 0; c < f.size(); ++c)
    if (g.cell_multi(c)[0] >= 2) f[c] = 10.0;
  const auto r = from_gridded_field(f, p, kBounds);
  EXPECT_EQ(r.clamped, 1u);
  EXPECT_DOUBLE_EQ(r.model.value(1), 4.0);
  f[0] = -1.0;
  EXPECT_THROW(from_gridded_field(f, p, kBounds), InvalidArgument);
}

TEST(Projection, RoundTripOnOwnPartition) {
  const auto g = build_grid({1.0, 2.0}, {9, 7});
  const auto p = build_partition(g, {4, 3});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  std::vector<double> v(p.size());
  for (double& x : v) x = u(rng);
  const SquaredSlownessModel m(p, v, kBounds);
  const auto back = from_gridded_field(to_cell_field(m), p, kBounds).model;
  for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(back.value(j), v[j], 1e-14 * v[j]);
}

TEST(Projection, NestedCoarsening) {
  const auto g = build_grid({1.0, 1.0}, {8, 8});
  const auto coarse = build_partition(g, {2, 2});
  const auto fine = refine_partition(coarse, 2);
  std::vector<double> v(fine.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = 1.0 + 0.1 * static_cast<double>(j);
  const SquaredSlownessModel m(fine, v, kBounds);
  const auto c = project(m, coarse).model;
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    double s = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < fine.size(); ++i)
      if (fine.parent_map()[i] == static_cast<int>(j)) {
        s += v[i];
        ++k;
      }
    EXPECT_EQ(k, 4);
    EXPECT_NEAR(c.value(j), s / 4.0, 1e-14);
  }
  EXPECT_THROW(project(c, fine), InvalidArgument);
}

TEST(Distance, Examples) {
  const auto cube = build_grid({1.0, 1.0, 1.0}, {2, 2, 2});
  const auto whole = build_partition(cube, {1, 1, 1});
  const SquaredSlownessModel a(whole, {3.5}, kBounds), b(whole, {0.5}, kBounds);
  EXPECT_DOUBLE_EQ(l2_distance(a, b), 3.0);
  EXPECT_DOUBLE_EQ(l2_distance(a, a), 0.0);

  const auto sq = build_grid({1.0, 1.0}, {4, 4});
  const auto q = build_partition(sq, {2, 2});
  const SquaredSlownessModel m1(q, {2.0, 1.0, 3.0, 1.0}, kBounds), m2(q, {1.0, 2.0, 1.0, 1.0}, kBounds);
  EXPECT_NEAR(l2_distance(m1, m2), std::sqrt(6.0 / 4.0), 1e-15);
  EXPECT_DOUBLE_EQ(linf_distance(m1, m2), 2.0);
  EXPECT_DOUBLE_EQ(linf_distance(m1, m1), 0.0);
  EXPECT_THROW(l2_distance(m1, a), InvalidArgument);
}

TEST(Distance, Sandwich) {
  const auto g = build_grid({2.0, 1.0}, {10, 6});
  const auto p = build_partition(g, {5, 3});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(p.size()), y(p.size());
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const SquaredSlownessModel a(p, x, kBounds), b(p, y, kBounds);
    const double l2 = l2_distance(a, b), li = linf_distance(a, b);
    EXPECT_LE(l2 / std::sqrt(g.volume()), li);
    // upper direction with the constant that is exact for piecewise constants
    EXPECT_LE(li, l2 / std::sqrt(*std::min_element(p.volumes().begin(), p.volumes().end())) * (1.0 + 1e-12));
  }
}

TEST(CellField, PiecewiseOnOctants) {
  const auto g = build_grid({1.0, 1.0, 1.0}, {4, 4, 4});
  const auto p = build_partition(g, {2, 2, 2});
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
  const auto f = to_cell_field(p, v);
  for (std::size_t c = 0; c < f.size(); ++c) {
    const auto m = g.cell_multi(c);
    const int j = m[0] / 2 + 2 * (m[1] / 2) + 4 * (m[2] / 2);
    EXPECT_EQ(f[c], v[j]);
  }
  const auto one = to_cell_field(build_partition(g, {1, 1, 1}), std::vector<double>{2.5});
  for (double x : one) EXPECT_EQ(x, 2.5);
}

TEST(Generators, LayersAndGradient) {
  const auto g = build_grid({1.0, 1.0}, {4, 4});
  const auto two = generators::two_layer(g, 1.0, 2.0, 0.5);
  for (std::size_t c = 0; c < two.size(); ++c) EXPECT_EQ(two[c], g.cell_center(c)[1] < 0.5 ? 1.0 : 2.0);
  const auto lin = generators::linear_depth(g, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(lin[g.cell_index({0, 0, 0})], 1.125);
  EXPECT_DOUBLE_EQ(lin[g.cell_index({0, 3, 0})], 1.875);
  const auto s = generators::to_squared_slowness({2.0, 4.0}, Quantity::velocity);
  EXPECT_DOUBLE_EQ(s[0], 0.25);
  EXPECT_DOUBLE_EQ(s[1], 0.0625);
}

TEST(ModelIo, BinaryRoundTrip) {
  GriddedField f{{1.0, 2.0, 3.0}, {2, 3, 4}, Quantity::velocity, {}};
  for (int i = 0; i < 24; ++i) f.values.push_back(1500.0 + i);
  std::stringstream ss;
  write_model(ss, f);
  EXPECT_EQ(ss.str().substr(0, 4), "HSMD");
  EXPECT_EQ(ss.str().size(), 4u + 2 + 1 + 1 + 3 * 4 + 3 * 8 + 24 * 8);
  const auto back = read_model(ss);
  EXPECT_EQ(back.cells, f.cells);
  EXPECT_EQ(back.extents, f.extents);
  EXPECT_EQ(back.values, f.values);
  EXPECT_EQ(back.quantity, Quantity::velocity);
  EXPECT_DOUBLE_EQ(back.squared_slowness()[0], 1.0 / (1500.0 * 1500.0));
}

TEST(ModelIo, RejectsCorruptInput) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_model(bad), InvalidArgument);
  GriddedField f{{1.0, 1.0}, {2, 2}, Quantity::squared_slowness, {1, 2, 3, 4}};
  std::stringstream ss;
  write_model(ss, f);
  std::string s = ss.str();
  s.resize(s.size() - 3);
  std::stringstream cut(s);
  EXPECT_THROW(read_model(cut), InvalidArgument);
}

TEST(ModelIo, TextLoader) {
  std::stringstream ss("# header\n1.0\n2.0 # trailing\n\n3.0\n4.0\n");
  const auto f = read_model_text(ss, {1.0, 1.0}, {2, 2}, Quantity::squared_slowness);
  EXPECT_EQ(f.values, (std::vector<double>{1, 2, 3, 4}));
  std::stringstream few("1\n2\n");
  EXPECT_THROW(read_model_text(few, {1.0, 1.0}, {2, 2}, Quantity::squared_slowness), InvalidArgument);
  std::stringstream junk("1\nabc\n");
  EXPECT_THROW(read_model_text(junk, {1.0, 1.0}, {1, 2}, Quantity::squared_slowness), InvalidArgument);
}

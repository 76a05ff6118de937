#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "helmstab/binary_io.hpp"
#include "helmstab/error.hpp"
#include "helmstab/geometry.hpp"

namespace helmstab {

/// A priori bounds B1 <= c^-2 <= B2, in s^2/m^2.
struct SlownessBounds {
  double b1 = 0.0;
  double b2 = 0.0;

  void validate() const {
    if (!(b1 > 0.0) || !(b2 >= b1) || !std::isfinite(b2)) {
      throw InvalidArgument("slowness bounds need 0 < B1 <= B2");
    }
  }
};

/// What a field of numbers stores: wavespeed c (m/s) or squared slowness c^-2.
enum class Quantity : std::uint8_t { velocity = 0, squared_slowness = 1 };

inline double to_squared_slowness(double v, Quantity q) {
  return q == Quantity::velocity ? 1.0 / (v * v) : v;
}

/// Piecewise-constant squared slowness c^-2 = sum_j c_j chi_{D_j}.
class SquaredSlownessModel {
 public:
  SquaredSlownessModel(CubicalPartition partition, std::vector<double> values, SlownessBounds bounds)
      : partition_(std::move(partition)), values_(std::move(values)), bounds_(bounds) {
    bounds_.validate();
    if (values_.size() != partition_.size()) {
      throw InvalidArgument("model needs one value per subdomain");
    }
    for (double v : values_) {
      if (!(v >= bounds_.b1 && v <= bounds_.b2)) {
        throw InvalidArgument("model value " + std::to_string(v) + " outside [B1, B2]");
      }
    }
  }

  const CubicalPartition& partition() const { return partition_; }
  const BoxGrid& grid() const { return partition_.grid(); }
  std::span<const double> values() const { return values_; }
  double value(std::size_t j) const { return values_[j]; }
  std::size_t size() const { return values_.size(); }
  const SlownessBounds& bounds() const { return bounds_; }

  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_value() const { return *std::max_element(values_.begin(), values_.end()); }

  std::uint64_t fingerprint() const {
    io::Fnv1a h;
    h.value(partition_.fingerprint());
    h.values(std::span<const double>(values_));
    return h.digest();
  }

  friend bool operator==(const SquaredSlownessModel& a, const SquaredSlownessModel& b) {
    return a.partition_.same_layout(b.partition_) && a.values_ == b.values_;
  }

 private:
  CubicalPartition partition_;
  std::vector<double> values_;
  SlownessBounds bounds_;
};

struct ProjectionResult {
  SquaredSlownessModel model;
  std::size_t clamped = 0;
};

/// Volume-weighted mean of a per-cell c^-2 field over every subdomain (the
/// L2 projection onto piecewise constants), clamped into [B1, B2].
inline ProjectionResult from_gridded_field(std::span<const double> field, const CubicalPartition& partition,
                                           SlownessBounds bounds) {
  bounds.validate();
  const BoxGrid& grid = partition.grid();
  if (field.size() != grid.num_cells()) throw InvalidArgument("field length must equal the cell count");
  std::vector<double> sums(partition.size(), 0.0);
  const double cv = grid.cell_volume();
  for (std::size_t c = 0; c < field.size(); ++c) {
    if (!(field[c] > 0.0) || !std::isfinite(field[c])) {
      throw InvalidArgument("field value at cell " + std::to_string(c) + " is not a positive number");
    }
    sums[partition.subdomain_of_cell(c)] += field[c] * cv;
  }
  std::size_t clamped = 0;
  for (std::size_t j = 0; j < sums.size(); ++j) {
    double v = sums[j] / partition.volume(j);
    if (v < bounds.b1 || v > bounds.b2) {
      v = std::clamp(v, bounds.b1, bounds.b2);
      ++clamped;
    }
    sums[j] = v;
  }
  return {SquaredSlownessModel(partition, std::move(sums), bounds), clamped};
}

/// Each cell receives the value of its subdomain.
inline std::vector<double> to_cell_field(const SquaredSlownessModel& m) {
  const auto& p = m.partition();
  std::vector<double> out(p.grid().num_cells());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = m.value(p.subdomain_of_cell(c));
  return out;
}

/// Same, for an arbitrary per-subdomain vector (model directions).
inline std::vector<double> to_cell_field(const CubicalPartition& p, std::span<const double> per_subdomain) {
  if (per_subdomain.size() != p.size()) throw InvalidArgument("need one value per subdomain");
  std::vector<double> out(p.grid().num_cells());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = per_subdomain[p.subdomain_of_cell(c)];
  return out;
}

/// Haar coarsening of a model onto a partition it refines.
inline ProjectionResult project(const SquaredSlownessModel& m, const CubicalPartition& coarse) {
  if (!m.partition().refines(coarse)) throw InvalidArgument("target partition is not nested in the model's");
  return from_gridded_field(to_cell_field(m), coarse, m.bounds());
}

namespace detail {
inline void require_same_partition(const SquaredSlownessModel& a, const SquaredSlownessModel& b) {
  if (!a.partition().same_layout(b.partition())) throw InvalidArgument("models live on different partitions");
}
}  // namespace detail

/// sqrt(sum_j (c1_j - c2_j)^2 |D_j|), exact for piecewise constants.
inline double l2_distance(const SquaredSlownessModel& a, const SquaredSlownessModel& b) {
  detail::require_same_partition(a, b);
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a.value(j) - b.value(j);
    s += d * d * a.partition().volume(j);
  }
  return std::sqrt(s);
}

inline double linf_distance(const SquaredSlownessModel& a, const SquaredSlownessModel& b) {
  detail::require_same_partition(a, b);
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s = std::max(s, std::abs(a.value(j) - b.value(j)));
  return s;
}

/// Per-cell generators used for synthetic experiments. Depth is the last axis,
/// increasing away from the top face (coordinate 0).
namespace generators {

inline std::vector<double> constant(const BoxGrid& g, double value) {
  return std::vector<double>(g.num_cells(), value);
}

/// Two layers split at a depth; values in the given quantity.
inline std::vector<double> two_layer(const BoxGrid& g, double top, double bottom, double interface_depth) {
  std::vector<double> f(g.num_cells());
  const int z = g.dim() - 1;
  for (std::size_t c = 0; c < f.size(); ++c) f[c] = g.cell_center(c)[z] < interface_depth ? top : bottom;
  return f;
}

/// Linear-in-depth profile evaluated at cell centers. Stand-in for a smooth
/// 1D starting model; the value varies linearly from `top` at depth 0 to
/// `bottom` at the full depth.
inline std::vector<double> linear_depth(const BoxGrid& g, double top, double bottom) {
  std::vector<double> f(g.num_cells());
  const int z = g.dim() - 1;
  for (std::size_t c = 0; c < f.size(); ++c) {
    const double t = g.cell_center(c)[z] / g.extent(z);
    f[c] = top + (bottom - top) * t;
  }
  return f;
}

inline std::vector<double> to_squared_slowness(std::vector<double> f, Quantity q) {
  for (double& v : f) {
    if (!(v > 0.0)) throw InvalidArgument("field values must be positive");
    v = helmstab::to_squared_slowness(v, q);
  }
  return f;
}

}  // namespace generators

}  // namespace helmstab

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "helmstab/binary_io.hpp"
#include "helmstab/error.hpp"

namespace helmstab {

inline constexpr int kMaxDim = 3;

using Point = std::array<double, kMaxDim>;
using Index3 = std::array<int, kMaxDim>;

/// One of the 2*dim faces of the box. side 0 is the low coordinate plane
/// (outward normal -e_axis), side 1 the high one (+e_axis).
struct Face {
  int axis = 0;
  int side = 0;

  int id() const { return 2 * axis + side; }
  double normal_sign() const { return side == 0 ? -1.0 : 1.0; }
  friend bool operator==(const Face&, const Face&) = default;
};

/// Uniform structured grid on [0,L_0] x ... x [0,L_{dim-1}], dim in {2,3}.
///
/// Nodes and cells are numbered x-fastest. Every node is either interior or
/// boundary; boundary nodes carry a slot index into the boundary arrays and
/// one assigned face (for edge and corner nodes the touching face with the
/// lowest axis index). Boundary weights lump the surface measure of all
/// faces touching the node (trapezoid rule per face), so they sum to |dOmega|.
///
/// Copies are cheap: the index tables are shared and immutable.
class BoxGrid {
 public:
  BoxGrid(std::span<const double> extents, std::span<const int> cells_per_axis) {
    const auto dim = extents.size();
    if (dim < 2 || dim > 3 || cells_per_axis.size() != dim) {
      throw InvalidArgument("grid needs 2 or 3 axes with one cell count per axis");
    }
    auto t = std::make_shared<Tables>();
    t->dim = static_cast<int>(dim);
    for (int a = 0; a < kMaxDim; ++a) {
      if (a < t->dim) {
        if (!(extents[a] > 0.0) || !std::isfinite(extents[a])) {
          throw InvalidArgument("grid extent on axis " + std::to_string(a) + " must be positive");
        }
        if (cells_per_axis[a] < 2) {
          throw InvalidArgument("grid needs at least 2 cells on axis " + std::to_string(a));
        }
        t->extents[a] = extents[a];
        t->cells[a] = cells_per_axis[a];
        t->spacing[a] = extents[a] / cells_per_axis[a];
        t->nodes[a] = cells_per_axis[a] + 1;
      } else {
        t->extents[a] = 1.0;
        t->cells[a] = 1;
        t->spacing[a] = 1.0;
        t->nodes[a] = 1;
      }
    }
    t->num_nodes = static_cast<std::size_t>(t->nodes[0]) * t->nodes[1] * t->nodes[2];
    t->num_cells = static_cast<std::size_t>(t->cells[0]) * t->cells[1] * t->cells[2];
    t->slot.assign(t->num_nodes, 0);
    t->boundary.assign(t->num_nodes, 0);
    for (std::size_t n = 0; n < t->num_nodes; ++n) {
      const Index3 m = multi(*t, n);
      bool on_boundary = false;
      Face assigned{};
      double weight = 0.0;
      for (int a = 0; a < t->dim; ++a) {
        for (int side = 0; side < 2; ++side) {
          if (m[a] != (side == 0 ? 0 : t->nodes[a] - 1)) continue;
          if (!on_boundary) assigned = Face{a, side};
          on_boundary = true;
          double w = 1.0;
          for (int b = 0; b < t->dim; ++b) {
            if (b == a) continue;
            const bool end = m[b] == 0 || m[b] == t->nodes[b] - 1;
            w *= t->spacing[b] * (end ? 0.5 : 1.0);
          }
          weight += w;
        }
      }
      if (on_boundary) {
        t->boundary[n] = 1;
        t->slot[n] = t->boundary_nodes.size();
        t->boundary_nodes.push_back(n);
        t->boundary_faces.push_back(assigned);
        t->boundary_weights.push_back(weight);
      } else {
        t->slot[n] = t->interior_nodes.size();
        t->interior_nodes.push_back(n);
      }
    }
    tables_ = std::move(t);
  }

  int dim() const { return tables_->dim; }
  double extent(int a) const { return tables_->extents[a]; }
  int cells(int a) const { return tables_->cells[a]; }
  int nodes(int a) const { return tables_->nodes[a]; }
  double spacing(int a) const { return tables_->spacing[a]; }
  double min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < dim(); ++a) h = std::min(h, spacing(a));
    return h;
  }
  double max_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < dim(); ++a) h = std::max(h, spacing(a));
    return h;
  }

  std::size_t num_nodes() const { return tables_->num_nodes; }
  std::size_t num_cells() const { return tables_->num_cells; }
  std::size_t num_interior() const { return tables_->interior_nodes.size(); }
  std::size_t num_boundary() const { return tables_->boundary_nodes.size(); }
  int num_faces() const { return 2 * dim(); }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= spacing(a);
    return v;
  }
  double volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= extent(a);
    return v;
  }
  double diameter() const {
    double s = 0.0;
    for (int a = 0; a < dim(); ++a) s += extent(a) * extent(a);
    return std::sqrt(s);
  }

  std::size_t node_index(const Index3& m) const {
    return static_cast<std::size_t>(m[0]) +
           static_cast<std::size_t>(nodes(0)) * (m[1] + static_cast<std::size_t>(nodes(1)) * m[2]);
  }
  Index3 node_multi(std::size_t n) const { return multi(*tables_, n); }

  std::size_t cell_index(const Index3& m) const {
    return static_cast<std::size_t>(m[0]) +
           static_cast<std::size_t>(cells(0)) * (m[1] + static_cast<std::size_t>(dim() == 3 ? cells(1) : 1) * m[2]);
  }
  Index3 cell_multi(std::size_t c) const {
    Index3 m{0, 0, 0};
    m[0] = static_cast<int>(c % cells(0));
    c /= cells(0);
    m[1] = static_cast<int>(c % cells(1));
    if (dim() == 3) m[2] = static_cast<int>(c / cells(1));
    return m;
  }

  Point node_position(std::size_t n) const {
    const Index3 m = node_multi(n);
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim(); ++a) p[a] = m[a] * spacing(a);
    return p;
  }
  Point cell_center(std::size_t c) const {
    const Index3 m = cell_multi(c);
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim(); ++a) p[a] = (m[a] + 0.5) * spacing(a);
    return p;
  }

  /// Cell containing a point inside the closed box (points on cell faces go
  /// to the upper cell, the last plane to the last cell).
  std::size_t cell_at(const Point& p) const {
    Index3 m{0, 0, 0};
    for (int a = 0; a < dim(); ++a) {
      int i = static_cast<int>(std::floor(p[a] / spacing(a)));
      m[a] = std::clamp(i, 0, cells(a) - 1);
    }
    return cell_index(m);
  }

  bool is_boundary_node(std::size_t n) const { return tables_->boundary[n] != 0; }
  std::span<const std::size_t> interior_nodes() const { return tables_->interior_nodes; }
  std::span<const std::size_t> boundary_nodes() const { return tables_->boundary_nodes; }
  /// Slot of a node in either the interior or the boundary array.
  std::size_t slot(std::size_t n) const { return tables_->slot[n]; }

  Face boundary_face(std::size_t slot) const { return tables_->boundary_faces[slot]; }
  double boundary_weight(std::size_t slot) const { return tables_->boundary_weights[slot]; }
  std::span<const double> boundary_weights() const { return tables_->boundary_weights; }

  /// Trapezoid share of the domain volume owned by a node.
  double node_volume(std::size_t n) const {
    const Index3 m = node_multi(n);
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) {
      const bool end = m[a] == 0 || m[a] == nodes(a) - 1;
      v *= spacing(a) * (end ? 0.5 : 1.0);
    }
    return v;
  }

  bool on_face(std::size_t n, const Face& f) const {
    const Index3 m = node_multi(n);
    return m[f.axis] == (f.side == 0 ? 0 : nodes(f.axis) - 1);
  }

  /// Boundary slots of every node on the plane of face f, edges included.
  std::vector<std::size_t> face_slots(const Face& f) const {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < num_boundary(); ++s) {
      if (on_face(boundary_nodes()[s], f)) out.push_back(s);
    }
    return out;
  }

  /// The face whose plane contains p (lowest axis first), if any.
  bool face_containing(const Point& p, Face& out, double tol_rel = 1e-9) const {
    for (int a = 0; a < dim(); ++a) {
      const double tol = tol_rel * extent(a);
      if (std::abs(p[a]) <= tol) {
        out = Face{a, 0};
        return inside_closed(p, tol_rel);
      }
      if (std::abs(p[a] - extent(a)) <= tol) {
        out = Face{a, 1};
        return inside_closed(p, tol_rel);
      }
    }
    return false;
  }

  bool inside_closed(const Point& p, double tol_rel = 1e-9) const {
    for (int a = 0; a < dim(); ++a) {
      const double tol = tol_rel * extent(a);
      if (p[a] < -tol || p[a] > extent(a) + tol) return false;
    }
    return true;
  }

  bool same_shape(const BoxGrid& o) const {
    if (dim() != o.dim()) return false;
    for (int a = 0; a < dim(); ++a) {
      if (cells(a) != o.cells(a) || extent(a) != o.extent(a)) return false;
    }
    return true;
  }

  std::uint64_t fingerprint() const {
    io::Fnv1a h;
    h.value(dim());
    for (int a = 0; a < dim(); ++a) {
      h.value(cells(a));
      h.value(extent(a));
    }
    return h.digest();
  }

 private:
  struct Tables {
    int dim = 0;
    std::array<double, kMaxDim> extents{};
    std::array<int, kMaxDim> cells{};
    std::array<double, kMaxDim> spacing{};
    std::array<int, kMaxDim> nodes{};
    std::size_t num_nodes = 0;
    std::size_t num_cells = 0;
    std::vector<std::uint8_t> boundary;
    std::vector<std::size_t> slot;
    std::vector<std::size_t> interior_nodes;
    std::vector<std::size_t> boundary_nodes;
    std::vector<Face> boundary_faces;
    std::vector<double> boundary_weights;
  };

  static Index3 multi(const Tables& t, std::size_t n) {
    Index3 m{0, 0, 0};
    m[0] = static_cast<int>(n % t.nodes[0]);
    n /= t.nodes[0];
    m[1] = static_cast<int>(n % t.nodes[1]);
    m[2] = static_cast<int>(n / t.nodes[1]);
    return m;
  }

  std::shared_ptr<const Tables> tables_;
};

inline BoxGrid build_grid(std::span<const double> extents, std::span<const int> cells_per_axis) {
  return BoxGrid(extents, cells_per_axis);
}

inline BoxGrid build_grid(std::initializer_list<double> extents, std::initializer_list<int> cells) {
  return BoxGrid(std::span<const double>(extents.begin(), extents.size()),
                 std::span<const int>(cells.begin(), cells.size()));
}

namespace detail {

// Splits [begin, end) into `parts` cell-aligned pieces whose widths differ by
// at most one cell; the leading pieces take the extra cells.
inline std::vector<int> split_range(int begin, int end, int parts) {
  const int width = end - begin;
  const int base = width / parts;
  const int extra = width % parts;
  std::vector<int> edges{begin};
  for (int p = 0; p < parts; ++p) edges.push_back(edges.back() + base + (p < extra ? 1 : 0));
  return edges;
}

}  // namespace detail

/// Tensor-product decomposition of the grid into N axis-aligned blocks.
/// Subdomains are numbered x-fastest over the block multi-index.
class CubicalPartition {
 public:
  CubicalPartition(BoxGrid grid, std::array<std::vector<int>, kMaxDim> edges, std::vector<int> parent = {})
      : grid_(std::move(grid)), edges_(std::move(edges)), parent_(std::move(parent)) {
    for (int a = 0; a < kMaxDim; ++a) {
      if (a >= grid_.dim()) {
        edges_[a] = {0, 1};
        continue;
      }
      const auto& e = edges_[a];
      if (e.size() < 2 || e.front() != 0 || e.back() != grid_.cells(a)) {
        throw InvalidArgument("partition edges must span all cells on axis " + std::to_string(a));
      }
      for (std::size_t i = 1; i < e.size(); ++i) {
        if (e[i] <= e[i - 1]) throw InvalidArgument("partition blocks must contain at least one cell");
      }
    }
    std::size_t n = 1;
    for (int a = 0; a < grid_.dim(); ++a) n *= blocks(a);
    volumes_.assign(n, 0.0);
    // per-axis cell -> block lookup
    std::array<std::vector<int>, kMaxDim> block_of;
    for (int a = 0; a < kMaxDim; ++a) {
      const int ncell = a < grid_.dim() ? grid_.cells(a) : 1;
      block_of[a].resize(ncell);
      for (int b = 0; b + 1 < static_cast<int>(edges_[a].size()); ++b) {
        for (int c = edges_[a][b]; c < edges_[a][b + 1]; ++c) block_of[a][c] = b;
      }
    }
    cell_to_subdomain_.resize(grid_.num_cells());
    const double cv = grid_.cell_volume();
    for (std::size_t c = 0; c < grid_.num_cells(); ++c) {
      const Index3 m = grid_.cell_multi(c);
      const int j = subdomain_index({block_of[0][m[0]], block_of[1][m[1]], block_of[2][m[2]]});
      cell_to_subdomain_[c] = j;
      volumes_[j] += cv;
    }
    r0_ = grid_.extent(0) / blocks(0);
    for (int a = 1; a < grid_.dim(); ++a) r0_ = std::min(r0_, grid_.extent(a) / blocks(a));
    if (!parent_.empty() && parent_.size() != n) throw InvalidArgument("parent map size mismatch");
  }

  const BoxGrid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  int blocks(int a) const { return static_cast<int>(edges_[a].size()) - 1; }
  std::size_t size() const { return volumes_.size(); }
  std::span<const int> edges(int a) const { return edges_[a]; }
  const std::array<std::vector<int>, kMaxDim>& all_edges() const { return edges_; }

  int subdomain_of_cell(std::size_t c) const { return cell_to_subdomain_[c]; }
  std::span<const int> cell_to_subdomain() const { return cell_to_subdomain_; }
  int subdomain_at(const Point& p) const { return cell_to_subdomain_[grid_.cell_at(p)]; }

  double volume(std::size_t j) const { return volumes_[j]; }
  std::span<const double> volumes() const { return volumes_; }
  double r0() const { return r0_; }

  /// Parent subdomain for every subdomain when produced by refine_partition.
  std::span<const int> parent_map() const { return parent_; }

  int subdomain_index(const Index3& b) const {
    return b[0] + blocks(0) * (b[1] + blocks(1) * b[2]);
  }
  Index3 block_multi(int j) const {
    Index3 b{0, 0, 0};
    b[0] = j % blocks(0);
    j /= blocks(0);
    b[1] = j % blocks(1);
    b[2] = j / blocks(1);
    return b;
  }

  /// Cell index range [lo, hi) of subdomain j along axis a.
  std::array<int, 2> cell_range(int j, int a) const {
    const Index3 b = block_multi(j);
    return {edges_[a][b[a]], edges_[a][b[a] + 1]};
  }

  bool same_layout(const CubicalPartition& o) const {
    if (!grid_.same_shape(o.grid_)) return false;
    for (int a = 0; a < dim(); ++a) {
      if (edges_[a] != o.edges_[a]) return false;
    }
    return true;
  }

  /// True when every block of `coarse` is a union of blocks of this partition.
  bool refines(const CubicalPartition& coarse) const {
    if (!grid_.same_shape(coarse.grid_)) return false;
    for (int a = 0; a < dim(); ++a) {
      for (int e : coarse.edges_[a]) {
        if (!std::binary_search(edges_[a].begin(), edges_[a].end(), e)) return false;
      }
    }
    return true;
  }

  std::uint64_t fingerprint() const {
    io::Fnv1a h;
    h.value(grid_.fingerprint());
    for (int a = 0; a < dim(); ++a) h.values(std::span<const int>(edges_[a]));
    return h.digest();
  }

 private:
  BoxGrid grid_;
  std::array<std::vector<int>, kMaxDim> edges_;
  std::vector<int> parent_;
  std::vector<int> cell_to_subdomain_;
  std::vector<double> volumes_;
  double r0_ = 0.0;
};

inline CubicalPartition build_partition(const BoxGrid& grid, std::span<const int> blocks_per_axis) {
  if (static_cast<int>(blocks_per_axis.size()) != grid.dim()) {
    throw InvalidArgument("partition needs one block count per grid axis");
  }
  std::array<std::vector<int>, kMaxDim> edges;
  for (int a = 0; a < grid.dim(); ++a) {
    const int b = blocks_per_axis[a];
    if (b < 1) throw InvalidArgument("block counts must be positive");
    if (b > grid.cells(a)) {
      throw InvalidArgument("more blocks than cells on axis " + std::to_string(a));
    }
    edges[a] = detail::split_range(0, grid.cells(a), b);
  }
  return CubicalPartition(grid, std::move(edges));
}

inline CubicalPartition build_partition(const BoxGrid& grid, std::initializer_list<int> blocks) {
  return build_partition(grid, std::span<const int>(blocks.begin(), blocks.size()));
}

/// Splits every block into factor^dim children. Fails when some block is
/// narrower than `factor` cells on an axis.
inline CubicalPartition refine_partition(const CubicalPartition& p, int factor) {
  if (factor < 2) throw InvalidArgument("refinement factor must be at least 2");
  std::array<std::vector<int>, kMaxDim> edges;
  std::array<std::vector<int>, kMaxDim> parent_block;
  for (int a = 0; a < p.dim(); ++a) {
    const auto e = p.edges(a);
    edges[a] = {0};
    for (int b = 0; b + 1 < static_cast<int>(e.size()); ++b) {
      if (e[b + 1] - e[b] < factor) {
        throw InvalidArgument("block " + std::to_string(b) + " on axis " + std::to_string(a) +
                              " has fewer cells than the refinement factor");
      }
      const auto sub = detail::split_range(e[b], e[b + 1], factor);
      edges[a].insert(edges[a].end(), sub.begin() + 1, sub.end());
      for (int k = 0; k < factor; ++k) parent_block[a].push_back(b);
    }
  }
  for (int a = p.dim(); a < kMaxDim; ++a) parent_block[a] = {0};
  std::size_t n = 1;
  for (int a = 0; a < p.dim(); ++a) n *= edges[a].size() - 1;
  const int bx = static_cast<int>(parent_block[0].size());
  const int by = static_cast<int>(parent_block[1].size());
  std::vector<int> parent(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int i0 = static_cast<int>(j % bx);
    const int i1 = static_cast<int>((j / bx) % by);
    const int i2 = static_cast<int>(j / (static_cast<std::size_t>(bx) * by));
    parent[j] = p.subdomain_index({parent_block[0][i0], parent_block[1][i1], parent_block[2][i2]});
  }
  return CubicalPartition(p.grid(), std::move(edges), std::move(parent));
}

}  // namespace helmstab

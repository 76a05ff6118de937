#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "helmstab/binary_io.hpp"
#include "helmstab/error.hpp"
#include "helmstab/geometry.hpp"
#include "helmstab/model.hpp"

namespace helmstab {

/// A per-cell field together with the grid it lives on.
struct GriddedField {
  std::vector<double> extents;
  std::vector<int> cells;
  Quantity quantity = Quantity::squared_slowness;
  std::vector<double> values;  // x-fastest cell order

  BoxGrid grid() const { return build_grid(extents, cells); }
  /// Values converted to c^-2.
  std::vector<double> squared_slowness() const { return generators::to_squared_slowness(values, quantity); }
};

inline constexpr std::uint16_t kModelFormatVersion = 1;

// "HSMD" | version u16 | dim u8 | quantity u8 | cells u32 x dim | extents f64 x dim | values f64...
inline void write_model(std::ostream& os, const GriddedField& f) {
  const auto dim = f.cells.size();
  if (dim != f.extents.size() || dim < 2 || dim > 3) throw InvalidArgument("bad field geometry");
  io::put_magic(os, "HSMD");
  io::put_uint<std::uint16_t>(os, kModelFormatVersion);
  io::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(dim));
  io::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(f.quantity));
  for (int c : f.cells) io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(c));
  for (double e : f.extents) io::put_f64(os, e);
  for (double v : f.values) io::put_f64(os, v);
}

inline GriddedField read_model(std::istream& is) {
  if (io::get_magic(is) != "HSMD") throw InvalidArgument("not a model file (bad magic)");
  const auto version = io::get_uint<std::uint16_t>(is);
  if (version != kModelFormatVersion) throw InvalidArgument("unsupported model file version " + std::to_string(version));
  GriddedField f;
  const int dim = io::get_uint<std::uint8_t>(is);
  if (dim < 2 || dim > 3) throw InvalidArgument("model file dimension must be 2 or 3");
  const auto q = io::get_uint<std::uint8_t>(is);
  if (q > 1) throw InvalidArgument("unknown quantity flag in model file");
  f.quantity = static_cast<Quantity>(q);
  std::size_t n = 1;
  for (int a = 0; a < dim; ++a) {
    f.cells.push_back(static_cast<int>(io::get_uint<std::uint32_t>(is)));
    n *= static_cast<std::size_t>(f.cells.back());
  }
  for (int a = 0; a < dim; ++a) f.extents.push_back(io::get_f64(is));
  f.values.resize(n);
  for (auto& v : f.values) v = io::get_f64(is);
  return f;
}

inline void save_model(const std::string& path, const GriddedField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open " + path + " for writing");
  write_model(os, f);
}

inline GriddedField load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open model file " + path);
  return read_model(is);
}

/// Plain-text values, one per line in x-fastest order; the geometry comes
/// from the caller. Blank lines and '#' comments are skipped.
inline GriddedField read_model_text(std::istream& is, std::vector<double> extents, std::vector<int> cells,
                                    Quantity q) {
  GriddedField f{std::move(extents), std::move(cells), q, {}};
  std::size_t n = 1;
  for (int c : f.cells) n *= static_cast<std::size_t>(c);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double v = 0.0;
    if (!(ls >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw InvalidArgument("model text line " + std::to_string(lineno) + ": not a number");
    }
    f.values.push_back(v);
  }
  if (f.values.size() != n) {
    throw InvalidArgument("model text has " + std::to_string(f.values.size()) + " values, grid needs " +
                          std::to_string(n));
  }
  return f;
}

inline GriddedField load_model_text(const std::string& path, std::vector<double> extents, std::vector<int> cells,
                                    Quantity q) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open model file " + path);
  return read_model_text(is, std::move(extents), std::move(cells), q);
}

}  // namespace helmstab

#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helmstab/error.hpp"
#include "helmstab/forward.hpp"
#include "helmstab/geometry.hpp"
#include "helmstab/model.hpp"
#include "helmstab/model_io.hpp"

namespace helmstab::campaign {

/// Where a model comes from: a generator or a file.
struct ModelSpec {
  std::string generator;  // constant | two_layer | linear_depth | random_blocks | file
  double value = 0.0;
  double top = 0.0;
  double bottom = 0.0;
  double interface_depth = 0.0;
  std::vector<int> blocks;
  double low = 0.0;
  double high = 0.0;
  std::string path;
  std::string format = "binary";  // binary | text
  int line = 0;
};

struct ExperimentConfig {
  std::filesystem::path source;  // config file path (relative paths resolve against its directory)
  std::vector<double> extents;
  std::vector<int> cells;
  Quantity quantity = Quantity::velocity;
  SlownessBounds bounds;
  ModelSpec c1;
  ModelSpec c2;
  std::vector<double> frequencies;  // Hz
  std::vector<std::vector<int>> scales;
  std::vector<AcquisitionMode> modes{AcquisitionMode::full};
  std::vector<double> source_spacing;
  std::vector<double> receiver_spacing;
  double sigma = 0.0;
  DtnKind dtn = DtnKind::sampled;
  std::size_t first_scales = 0;
  std::filesystem::path output_dir = "out";
  bool cache = true;
  unsigned workers = 0;
  std::uint64_t seed = 0;
  bool override_window_check = false;

  int dim() const { return static_cast<int>(extents.size()); }
  BoxGrid grid() const { return build_grid(extents, cells); }
  static double omega2_of(double hz) { return std::pow(2.0 * std::numbers::pi * hz, 2); }
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

[[noreturn]] inline void fail(const YAML::Node& at, const std::string& what) {
  const int line = line_of(at);
  throw ConfigError(what, line);
}

inline YAML::Node require(const YAML::Node& parent, const std::string& key, const std::string& path) {
  if (!parent.IsMap()) fail(parent, "'" + path + "' must be a mapping");
  YAML::Node n = parent[key];
  if (!n) fail(parent, "missing required field '" + (path.empty() ? key : path + "." + key) + "'");
  return n;
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail(n, "field '" + field + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, "field '" + field + "' has an invalid value '" + n.Scalar() + "'");
  }
}

template <typename T>
std::vector<T> sequence(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence()) fail(n, "field '" + field + "' must be a list");
  std::vector<T> out;
  for (const auto& e : n) out.push_back(scalar<T>(e, field));
  return out;
}

template <typename T>
T optional_scalar(const YAML::Node& parent, const std::string& key, const std::string& field, T fallback) {
  if (!parent || !parent.IsMap() || !parent[key]) return fallback;
  return scalar<T>(parent[key], field);
}

inline ModelSpec parse_model(const YAML::Node& n, const std::string& field) {
  ModelSpec m;
  m.line = line_of(n);
  if (!n.IsMap()) fail(n, "field '" + field + "' must be a mapping");
  if (n["file"]) {
    m.generator = "file";
    m.path = scalar<std::string>(n["file"], field + ".file");
    m.format = optional_scalar<std::string>(n, "format", field + ".format", "binary");
    if (m.format != "binary" && m.format != "text") fail(n["format"], "field '" + field + ".format' must be binary or text");
    return m;
  }
  m.generator = scalar<std::string>(require(n, "generator", field), field + ".generator");
  auto num = [&](const char* key) { return scalar<double>(require(n, key, field), field + "." + key); };
  if (m.generator == "constant") {
    m.value = num("value");
  } else if (m.generator == "two_layer") {
    m.top = num("top");
    m.bottom = num("bottom");
    m.interface_depth = num("interface_depth");
  } else if (m.generator == "linear_depth") {
    m.top = num("top");
    m.bottom = num("bottom");
  } else if (m.generator == "random_blocks") {
    m.blocks = sequence<int>(require(n, "blocks", field), field + ".blocks");
    m.low = num("low");
    m.high = num("high");
  } else {
    fail(n["generator"], "unknown generator '" + m.generator + "' in '" + field + "'");
  }
  return m;
}

inline AcquisitionMode parse_mode(const YAML::Node& n) {
  const auto s = scalar<std::string>(n, "acquisition.modes");
  if (s == "full") return AcquisitionMode::full;
  if (s == "top" || s == "top_only") return AcquisitionMode::top_only;
  fail(n, "unknown acquisition mode '" + s + "' (full or top)");
}

}  // namespace detail

/// Parses and schema-checks a config document. Environment overrides
/// HELMSTAB_OUT and HELMSTAB_WORKERS apply on top.
inline ExperimentConfig parse_config(const YAML::Node& root, const std::filesystem::path& source = {}) {
  using namespace detail;
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping at the top level", 1);
  ExperimentConfig c;
  c.source = source;

  const auto grid = require(root, "grid", "");
  c.extents = sequence<double>(require(grid, "extents", "grid"), "grid.extents");
  c.cells = sequence<int>(require(grid, "cells", "grid"), "grid.cells");
  if (c.extents.size() != c.cells.size() || c.extents.size() < 2 || c.extents.size() > 3) {
    fail(grid, "grid.extents and grid.cells need 2 or 3 entries each");
  }
  for (double e : c.extents)
    if (!(e > 0.0)) fail(grid["extents"], "grid.extents must be positive");
  for (int n : c.cells)
    if (n < 2) fail(grid["cells"], "grid.cells must be >= 2");

  const auto models = require(root, "models", "");
  const auto q = optional_scalar<std::string>(models, "quantity", "models.quantity", "velocity");
  if (q == "velocity") {
    c.quantity = Quantity::velocity;
  } else if (q == "squared_slowness") {
    c.quantity = Quantity::squared_slowness;
  } else {
    fail(models["quantity"], "models.quantity must be velocity or squared_slowness");
  }
  const auto bounds = require(models, "bounds", "models");
  if (bounds["velocity"]) {
    const auto v = sequence<double>(bounds["velocity"], "models.bounds.velocity");
    if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] >= v[0])) fail(bounds, "models.bounds.velocity needs [vmin, vmax]");
    c.bounds = {1.0 / (v[1] * v[1]), 1.0 / (v[0] * v[0])};
  } else if (bounds["squared_slowness"]) {
    const auto v = sequence<double>(bounds["squared_slowness"], "models.bounds.squared_slowness");
    if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] >= v[0])) fail(bounds, "models.bounds.squared_slowness needs [B1, B2]");
    c.bounds = {v[0], v[1]};
  } else {
    fail(bounds, "models.bounds needs 'velocity' or 'squared_slowness'");
  }
  c.c1 = parse_model(require(models, "c1", "models"), "models.c1");
  c.c2 = parse_model(require(models, "c2", "models"), "models.c2");

  const auto freqs = require(root, "frequencies", "");
  c.frequencies = sequence<double>(freqs, "frequencies");
  if (c.frequencies.empty()) fail(freqs, "field 'frequencies' must not be empty");
  for (double f : c.frequencies)
    if (!(f > 0.0)) fail(freqs, "frequencies must be positive");

  const auto scales = require(root, "scales", "");
  if (!scales.IsSequence() || scales.size() == 0) fail(scales, "field 'scales' must be a non-empty list");
  long prev = 0;
  for (const auto& s : scales) {
    auto b = sequence<int>(s, "scales");
    if (b.size() != c.extents.size()) fail(s, "each scale needs one block count per axis");
    long n = 1;
    for (int k : b) {
      if (k < 1) fail(s, "block counts must be >= 1");
      n *= k;
    }
    if (n <= prev) fail(s, "scales must be strictly increasing in N");
    prev = n;
    c.scales.push_back(std::move(b));
  }

  const auto acq = require(root, "acquisition", "");
  if (acq["modes"]) {
    c.modes.clear();
    if (!acq["modes"].IsSequence()) fail(acq["modes"], "field 'acquisition.modes' must be a list");
    for (const auto& m : acq["modes"]) c.modes.push_back(parse_mode(m));
    if (c.modes.empty()) fail(acq["modes"], "field 'acquisition.modes' must not be empty");
  }
  c.source_spacing = sequence<double>(require(acq, "source_spacing", "acquisition"), "acquisition.source_spacing");
  c.receiver_spacing =
      sequence<double>(require(acq, "receiver_spacing", "acquisition"), "acquisition.receiver_spacing");
  if (c.source_spacing.size() != c.extents.size() || c.receiver_spacing.size() != c.extents.size()) {
    fail(acq, "acquisition spacings need one entry per axis");
  }
  c.sigma = scalar<double>(require(acq, "sigma", "acquisition"), "acquisition.sigma");
  if (!(c.sigma > 0.0)) fail(acq["sigma"], "acquisition.sigma must be positive");
  const auto dtn = optional_scalar<std::string>(acq, "dtn", "acquisition.dtn", "sampled");
  if (dtn == "sampled") {
    c.dtn = DtnKind::sampled;
  } else if (dtn == "flux") {
    c.dtn = DtnKind::flux;
  } else {
    fail(acq["dtn"], "acquisition.dtn must be sampled or flux");
  }

  c.first_scales = optional_scalar<std::size_t>(root["fit"], "first_scales", "fit.first_scales", 0);
  if (root["output"]) {
    c.output_dir = optional_scalar<std::string>(root["output"], "dir", "output.dir", "out");
    c.cache = optional_scalar<bool>(root["output"], "cache", "output.cache", true);
  }
  c.workers = optional_scalar<unsigned>(root, "workers", "workers", 0);
  c.seed = optional_scalar<std::uint64_t>(root, "seed", "seed", 0);
  c.override_window_check = optional_scalar<bool>(root, "override_window_check", "override_window_check", false);

  if (const char* out = std::getenv("HELMSTAB_OUT"); out && *out) c.output_dir = out;
  if (const char* w = std::getenv("HELMSTAB_WORKERS"); w && *w) {
    try {
      c.workers = static_cast<unsigned>(std::stoul(w));
    } catch (const std::exception&) {
      throw ConfigError(std::string("HELMSTAB_WORKERS is not a number: ") + w, 0);
    }
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& source = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("parse error: ") + e.msg, e.mark.line + 1);
  }
  return parse_config(root, source);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string(), 0);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

/// Per-cell c^-2 field for a model spec on the config grid.
inline std::vector<double> build_field(const ExperimentConfig& c, const ModelSpec& m, std::uint64_t seed) {
  const BoxGrid g = c.grid();
  std::vector<double> f;
  if (m.generator == "constant") {
    f = generators::constant(g, m.value);
  } else if (m.generator == "two_layer") {
    f = generators::two_layer(g, m.top, m.bottom, m.interface_depth);
  } else if (m.generator == "linear_depth") {
    f = generators::linear_depth(g, m.top, m.bottom);
  } else if (m.generator == "random_blocks") {
    const auto p = build_partition(g, m.blocks);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(m.low, m.high);
    std::vector<double> per(p.size());
    for (double& v : per) v = u(rng);
    f = to_cell_field(p, per);
  } else if (m.generator == "file") {
    std::filesystem::path path = m.path;
    if (path.is_relative() && !c.source.empty()) path = c.source.parent_path() / path;
    if (m.format == "binary") {
      GriddedField gf = load_model(path.string());
      if (gf.cells != c.cells || gf.extents != c.extents) {
        throw ConfigError("model file " + path.string() + " does not match the configured grid", m.line);
      }
      return gf.squared_slowness();
    }
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open model file " + path.string(), m.line);
    return read_model_text(is, c.extents, c.cells, c.quantity).squared_slowness();
  } else {
    throw ConfigError("unknown generator '" + m.generator + "'", m.line);
  }
  return generators::to_squared_slowness(std::move(f), c.quantity);
}

}  // namespace helmstab::campaign

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include "helmstab/binary_io.hpp"
#include "helmstab/error.hpp"
#include "helmstab/forward.hpp"

namespace helmstab {

inline constexpr std::uint16_t kDtnFormatVersion = 1;
inline constexpr std::string_view kDtnMagic = "HSDT";
inline constexpr std::string_view kDerivativeMagic = "HSDF";

// magic | version u16 | dim u8 | mode u8 | kind u8 | omega2 f64 | ns u32 | nr u32 | sigma f64
// | model hash u64 | grid hash u64 | source xyz f64 x 3 x ns | receiver xyz f64 x 3 x nr
// | source weights | receiver weights | values row-major f64
inline void write_dtn(std::ostream& os, const DtnData& d, int dim, std::string_view magic = kDtnMagic) {
  const Acquisition& a = d.acquisition;
  if (d.values.rows() != static_cast<Eigen::Index>(a.num_sources()) ||
      d.values.cols() != static_cast<Eigen::Index>(a.num_receivers())) {
    throw InvalidArgument("data matrix does not match the acquisition");
  }
  io::put_magic(os, magic);
  io::put_uint<std::uint16_t>(os, kDtnFormatVersion);
  io::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(dim));
  io::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(a.mode));
  io::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(d.kind));
  io::put_f64(os, d.omega2);
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(a.num_sources()));
  io::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(a.num_receivers()));
  io::put_f64(os, a.sigma);
  io::put_uint<std::uint64_t>(os, d.model_hash);
  io::put_uint<std::uint64_t>(os, d.grid_hash);
  for (const auto& p : a.sources)
    for (double x : p.position) io::put_f64(os, x);
  for (const auto& p : a.receivers)
    for (double x : p.position) io::put_f64(os, x);
  for (double w : a.source_weights) io::put_f64(os, w);
  for (double w : a.receiver_weights) io::put_f64(os, w);
  for (Eigen::Index s = 0; s < d.values.rows(); ++s)
    for (Eigen::Index r = 0; r < d.values.cols(); ++r) io::put_f64(os, d.values(s, r));
}

/// Positions and weights are restored; node indices are not stored.
inline DtnData read_dtn(std::istream& is, std::string_view magic = kDtnMagic) {
  if (io::get_magic(is) != magic) throw InvalidArgument("bad magic in DtN data file");
  const auto version = io::get_uint<std::uint16_t>(is);
  if (version != kDtnFormatVersion) throw InvalidArgument("unsupported DtN data version " + std::to_string(version));
  DtnData d;
  const int dim = io::get_uint<std::uint8_t>(is);
  if (dim < 2 || dim > 3) throw InvalidArgument("DtN data dimension must be 2 or 3");
  const auto mode = io::get_uint<std::uint8_t>(is);
  const auto kind = io::get_uint<std::uint8_t>(is);
  if (mode > 1 || kind > 1) throw InvalidArgument("unknown mode or kind flag in DtN data");
  d.acquisition.mode = static_cast<AcquisitionMode>(mode);
  d.kind = static_cast<DtnKind>(kind);
  d.omega2 = io::get_f64(is);
  const auto ns = io::get_uint<std::uint32_t>(is);
  const auto nr = io::get_uint<std::uint32_t>(is);
  d.acquisition.sigma = io::get_f64(is);
  d.model_hash = io::get_uint<std::uint64_t>(is);
  d.grid_hash = io::get_uint<std::uint64_t>(is);
  auto points = [&](std::vector<BoundaryPoint>& out, std::uint32_t n) {
    out.resize(n);
    for (auto& p : out)
      for (double& x : p.position) x = io::get_f64(is);
  };
  points(d.acquisition.sources, ns);
  points(d.acquisition.receivers, nr);
  d.acquisition.source_weights.resize(ns);
  d.acquisition.receiver_weights.resize(nr);
  for (double& w : d.acquisition.source_weights) w = io::get_f64(is);
  for (double& w : d.acquisition.receiver_weights) w = io::get_f64(is);
  d.values.resize(ns, nr);
  for (Eigen::Index s = 0; s < d.values.rows(); ++s)
    for (Eigen::Index r = 0; r < d.values.cols(); ++r) d.values(s, r) = io::get_f64(is);
  return d;
}

inline void save_dtn(const std::string& path, const DtnData& d, int dim, std::string_view magic = kDtnMagic) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open " + path + " for writing");
  write_dtn(os, d, dim, magic);
}

inline DtnData load_dtn(const std::string& path, std::string_view magic = kDtnMagic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open DtN data file " + path);
  return read_dtn(is, magic);
}

}  // namespace helmstab

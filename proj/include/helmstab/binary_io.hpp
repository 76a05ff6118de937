#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "helmstab/error.hpp"

namespace helmstab::io {

// Little-endian encoders independent of host byte order.
template <typename UInt>
void put_uint(std::ostream& os, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    os.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

inline void put_f64(std::ostream& os, double v) { put_uint(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), 4); }

template <typename UInt>
UInt get_uint(std::istream& is) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw InvalidArgument("truncated binary stream");
    v |= static_cast<UInt>(static_cast<std::uint8_t>(c)) << (8 * i);
  }
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_uint<std::uint64_t>(is)); }

inline std::string get_magic(std::istream& is) {
  std::string m(4, '\0');
  is.read(m.data(), 4);
  if (is.gcount() != 4) throw InvalidArgument("truncated binary stream (magic)");
  return m;
}

/// FNV-1a, 64 bit. Used for model and grid fingerprints in metadata.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  template <typename T>
  void values(std::span<const T> v) {
    bytes(v.data(), v.size_bytes());
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace helmstab::io

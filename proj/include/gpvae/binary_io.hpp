#pragma once
// Little-endian primitives for the on-disk formats (checkpoints, batch
// containers, packed masks).

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "gpvae/error.hpp"

namespace gpvae::io {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

template <class T>
  requires std::is_arithmetic_v<T>
void write(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
  requires std::is_arithmetic_v<T>
T read(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("unexpected end of file");
  return v;
}

inline void write_doubles(std::ostream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::istream& is, std::span<double> v) {
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw IoError("unexpected end of file");
}

inline void write_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

inline void expect_magic(std::istream& is, std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!is || got != magic) throw IoError("not a " + std::string(what) + " file (bad magic)");
}

/// Packs booleans 8 per byte, least significant bit first.
inline std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> flags) {
  std::vector<std::uint8_t> out((flags.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

inline std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count) {
  std::vector<std::uint8_t> out(count, 0);
  for (std::size_t i = 0; i < count; ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return out;
}

}  // namespace gpvae::io

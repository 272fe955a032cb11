#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

// Little-endian primitives shared by the dataset and checkpoint formats.
namespace lom::binio {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 4);
}

inline void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_bytes(std::ostream& os, const std::string& s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Readers return false on a short read instead of throwing so callers can
// attach context (record index, field name) to the error.
inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return true;
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return true;
}

inline bool get_u8(std::istream& is, std::uint8_t& v) {
  const int c = is.get();
  if (c == std::char_traits<char>::eof()) return false;
  v = static_cast<std::uint8_t>(c);
  return true;
}

inline bool get_f64(std::istream& is, double& v) {
  std::uint64_t bits;
  if (!get_u64(is, bits)) return false;
  v = std::bit_cast<double>(bits);
  return true;
}

inline bool get_bytes(std::istream& is, std::size_t n, std::string& s) {
  s.resize(n);
  return n == 0 || static_cast<bool>(is.read(s.data(), static_cast<std::streamsize>(n)));
}

}  // namespace lom::binio

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace modreach {

inline void write_exact(std::ostream& os, const void* data, size_t n) {
  os.write(static_cast<const char*>(data), std::streamsize(n));
  if (!os) throw std::runtime_error("write failed");
}

inline void read_exact(std::istream& is, void* data, size_t n, const std::string& what) {
  is.read(static_cast<char*>(data), std::streamsize(n));
  if (size_t(is.gcount()) != n) throw std::runtime_error("truncated " + what);
}

inline void write_u32le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                        (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
  write_exact(os, b, 4);
}

inline uint32_t read_u32le(std::istream& is, const std::string& what) {
  unsigned char b[4];
  read_exact(is, b, 4, what);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

// Little-endian float arrays; asserts the build target is already LE IEEE754.
static_assert(sizeof(float) == 4);

inline void write_f32_array(std::ostream& os, const float* data, size_t n) {
  write_exact(os, data, n * sizeof(float));
}

inline void read_f32_array(std::istream& is, float* data, size_t n, const std::string& what) {
  read_exact(is, data, n * sizeof(float), what);
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t file_checksum(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), std::streamsize(buf.size()));
    h = fnv1a64(buf.data(), size_t(f.gcount()), h);
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[size_t(i)] = digits[v & 0xf];
  return s;
}

}  // namespace modreach

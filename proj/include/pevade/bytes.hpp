#pragma once

#include <cassert>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace pevade {

using Bytes = std::vector<std::uint8_t>;

/// Half-open byte range [begin, end).
struct ByteInterval {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t off) const { return off >= begin && off < end; }
  bool overlaps(const ByteInterval& o) const {
    return begin < o.end && o.begin < end;
  }
  friend bool operator==(const ByteInterval&, const ByteInterval&) = default;
};

inline std::size_t total_length(const std::vector<ByteInterval>& ivs) {
  std::size_t n = 0;
  for (const auto& iv : ivs) n += iv.size();
  return n;
}

/// True when intervals are sorted by begin and pairwise disjoint.
inline bool sorted_disjoint(const std::vector<ByteInterval>& ivs) {
  for (std::size_t i = 1; i < ivs.size(); ++i) {
    if (ivs[i].begin < ivs[i - 1].end) return false;
  }
  return true;
}

// Little-endian scalar access. Callers bounds-check first.
inline std::uint16_t read_u16(const Bytes& b, std::size_t off) {
  assert(off + 2 <= b.size());
  return static_cast<std::uint16_t>(b[off]) |
         static_cast<std::uint16_t>(b[off + 1]) << 8;
}

inline std::uint32_t read_u32(const Bytes& b, std::size_t off) {
  assert(off + 4 <= b.size());
  return static_cast<std::uint32_t>(b[off]) |
         static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 |
         static_cast<std::uint32_t>(b[off + 3]) << 24;
}

inline void write_u16(Bytes& b, std::size_t off, std::uint16_t v) {
  assert(off + 2 <= b.size());
  b[off] = static_cast<std::uint8_t>(v & 0xFF);
  b[off + 1] = static_cast<std::uint8_t>(v >> 8);
}

inline void write_u32(Bytes& b, std::size_t off, std::uint32_t v) {
  assert(off + 4 <= b.size());
  b[off] = static_cast<std::uint8_t>(v & 0xFF);
  b[off + 1] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
  b[off + 2] = static_cast<std::uint8_t>((v >> 16) & 0xFF);
  b[off + 3] = static_cast<std::uint8_t>((v >> 24) & 0xFF);
}

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& data);

/// splitmix64 step; used to derive independent per-item seeds from one master
/// seed so results do not depend on scheduling or iteration order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace pevade

#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace memscrape {

using Bytes = std::vector<std::uint8_t>;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 finalizer; used to fold several seed components into one.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

/// Bounded draw from the raw engine output. mt19937_64's output sequence
/// is pinned by the standard, unlike uniform_int_distribution, so results
/// reproduce across platforms. Modulo bias is irrelevant at our ranges.
inline std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
  return n ? rng() % n : 0;
}

inline Bytes random_bytes(std::uint64_t seed, std::size_t len) {
  std::mt19937_64 rng(seed);
  Bytes out(len);
  std::size_t i = 0;
  while (i < len) {
    std::uint64_t w = rng();
    for (int k = 0; k < 8 && i < len; ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(w >> (8 * k));
    }
  }
  return out;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%llx", static_cast<unsigned long long>(v));
  return buf;
}

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace memscrape

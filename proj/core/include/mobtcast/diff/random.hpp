#pragma once

#include <cstdint>
#include <string_view>

namespace mobtcast::diff {

/// SplitMix64 finalizer; a stateless bijective mix of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a run seed and a stream name
/// ("init", "shuffle", "dropout", "sampling", ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) from a 64-bit word.
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace mobtcast::diff

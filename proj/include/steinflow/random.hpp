#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace steinflow {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace detail

/// Derive an independent stream seed from a master seed and a stable name.
/// Adding new consumers never shifts the streams of existing ones.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view key, std::uint64_t index = 0) {
  return detail::splitmix64(detail::splitmix64(master ^ detail::fnv1a(key)) + index);
}

inline Rng make_stream(std::uint64_t master, std::string_view key, std::uint64_t index = 0) {
  return Rng(stream_seed(master, key, index));
}

}  // namespace steinflow

#pragma once

#include <cstdint>
#include <random>

namespace mixcam {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives independent seed values from (seed, salt...) tuples so that every
// sample / epoch / step owns its own reproducible stream.
constexpr std::uint64_t seed_mix(std::uint64_t a) { return splitmix64(a); }

template <typename... Rest>
constexpr std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return seed_mix(splitmix64(a ^ splitmix64(b)), static_cast<std::uint64_t>(rest)...);
}

template <typename... Salts>
std::mt19937_64 make_rng(std::uint64_t seed, Salts... salts) {
  return std::mt19937_64(seed_mix(seed, static_cast<std::uint64_t>(salts)...));
}

}  // namespace mixcam

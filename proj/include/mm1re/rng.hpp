#pragma once

#include <cstdint>
#include <random>

namespace mm1re {

using RandomStream = std::mt19937_64;

// Tags for the independent substreams of one replica. Every point process of
// the coupled construction draws from its own substream so that the standard
// queue sees the same arrivals and services whatever epsilon is.
enum class Substream : std::uint64_t {
  arrivals = 1,
  services = 2,
  extra = 3,
  environment = 4,
  start_state = 5,
  busy_period = 6,
  decomposition = 7,
  second_busy_period = 8,
  bootstrap = 9,
  oracle = 10,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

inline RandomStream make_stream(std::uint64_t seed, std::uint64_t replica,
                                Substream which) {
  return RandomStream{
      derive_seed(seed, replica, static_cast<std::uint64_t>(which))};
}

inline double uniform01(RandomStream& rng) {
  return std::uniform_real_distribution<double>{0.0, 1.0}(rng);
}

inline double exponential(RandomStream& rng, double rate) {
  return std::exponential_distribution<double>{rate}(rng);
}

inline double standard_normal(RandomStream& rng) {
  return std::normal_distribution<double>{0.0, 1.0}(rng);
}

}  // namespace mm1re

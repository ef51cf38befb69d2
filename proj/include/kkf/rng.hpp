#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace kkf {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to key independent streams off (seed, index).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic child stream for (seed, index, lane). Streams for different
/// indices are independent of the order in which they are created.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t lane = 0) {
  const std::uint64_t key = mix64(mix64(mix64(seed) ^ index) ^ (lane * 0xd1b54a32d192ed03ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(lane)};
  return Rng(seq);
}

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

}  // namespace kkf

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace iiss {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; derives independent child seeds from (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Uniform direction on the unit sphere in R^n.
inline Eigen::VectorXd random_direction(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  do {
    for (Eigen::Index k = 0; k < n; ++k) v(k) = normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

/// Uniform point in the closed ball of the given radius.
inline Eigen::VectorXd random_in_ball(Rng& rng, Eigen::Index n, double radius) {
  const double u = uniform(rng, 0.0, 1.0);
  return random_direction(rng, n) * radius * std::pow(u, 1.0 / static_cast<double>(n));
}

}  // namespace iiss

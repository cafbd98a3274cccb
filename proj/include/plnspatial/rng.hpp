#pragma once

#include <cstdint>
#include <random>

namespace plnspatial {

/// SplitMix64 step; used to derive independent stream seeds from a master
/// seed and an index (chain, replicate).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double gamma(double shape, double scale) { return std::gamma_distribution<double>(shape, scale)(engine_); }
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }
  int poisson(double mean) { return std::poisson_distribution<int>(mean)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace plnspatial

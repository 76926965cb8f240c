#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace copeval {

/// Seeded generator owning one independent stream per (seed, stream id).
///
/// Streams derived from distinct (seed, stream) pairs are seeded through
/// std::seed_seq and never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform double in [0, 1) built from the top 53 bits of one draw.
  double uniform();
  double normal();
  /// Inverse-CDF draw: `cdf` is nondecreasing with last entry 1.
  std::size_t categorical(std::span<const double> cdf);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace copeval

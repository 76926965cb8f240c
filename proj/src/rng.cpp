#include "copeval/rng.hpp"

#include <algorithm>

namespace copeval {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  engine_.seed(seq);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() { return gauss_(engine_); }

std::size_t Rng::categorical(std::span<const double> cdf) {
  const double u = uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) {
    // u landed beyond a last entry that rounded below 1: take the last positive bin.
    auto last = cdf.size() - 1;
    while (last > 0 && cdf[last] == cdf[last - 1]) --last;
    return last;
  }
  return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace copeval

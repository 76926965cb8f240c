#pragma once

#include <cmath>
#include <random>

#include "copeval/mdp.hpp"

namespace testutil {

using copeval::Index;
using copeval::Matrix;
using copeval::Vector;

// Independent generator so fixtures do not depend on the library RNG.
inline Matrix random_stochastic(Index rows, Index cols, std::mt19937_64& gen, double floor = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = floor + u(gen);
    m.row(i) /= m.row(i).sum();
  }
  return m;
}

inline copeval::FiniteMdp random_mdp(Index n, Index a, std::uint64_t seed, double discount = 0.9) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  copeval::FiniteMdp mdp;
  for (Index k = 0; k < a; ++k) mdp.transition.push_back(random_stochastic(n, n, gen, 0.05));
  mdp.reward = Matrix(n, a);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < a; ++k) mdp.reward(i, k) = u(gen);
  }
  mdp.discount = discount;
  mdp.initial_dist = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return mdp;
}

inline copeval::StochasticPolicy random_policy(Index n, Index a, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return {random_stochastic(n, a, gen, 0.2)};
}

inline double sup_diff(const Vector& x, const Vector& y) { return (x - y).cwiseAbs().maxCoeff(); }

}  // namespace testutil

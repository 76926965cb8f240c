#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "copeval/types.hpp"

namespace copeval {

/// Per-state running means over a time-ordered sample, with standard errors
/// from non-overlapping batch means (samples inside a stream are correlated).
class PerStateBatchMeans {
 public:
  PerStateBatchMeans(Index n_states, std::int64_t total_samples, int n_batches = 50);

  /// Records `value` for `state` at the next time index.
  void add(Index state, double value);
  /// Advances time without recording anything.
  void skip() { ++time_; }

  Vector mean() const;
  Vector std_error() const;
  std::vector<std::int64_t> visits() const;
  /// Number of batches in which the state appeared.
  std::vector<int> populated_batches() const;

 private:
  Index n_states_;
  std::int64_t total_;
  int n_batches_;
  std::int64_t time_ = 0;
  std::vector<double> sums_;
  std::vector<std::int64_t> counts_;
};

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);
double median(std::vector<double> xs);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> ranks(std::span<const double> xs);
double spearman(std::span<const double> xs, std::span<const double> ys);

/// One-sided Mann-Whitney test of H1: X is stochastically smaller than Y.
/// Exact null distribution of U (ties counted as 1/2, continuity at the observed value).
double mann_whitney_less(std::span<const double> xs, std::span<const double> ys);

/// Rank test for larger dispersion of Y than X: Mann-Whitney on absolute
/// deviations from each group's median.
double dispersion_greater(std::span<const double> xs, std::span<const double> ys);

/// One-sided Wilcoxon signed-rank test on paired samples, H1: x_i - y_i tends
/// to be negative. Zero differences are dropped; exact null distribution.
double signed_rank_less(std::span<const double> xs, std::span<const double> ys);

}  // namespace copeval

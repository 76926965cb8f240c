#include "copeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "copeval/errors.hpp"

namespace copeval {

PerStateBatchMeans::PerStateBatchMeans(Index n_states, std::int64_t total_samples, int n_batches)
    : n_states_(n_states),
      total_(std::max<std::int64_t>(total_samples, 1)),
      n_batches_(n_batches),
      sums_(static_cast<std::size_t>(n_states * n_batches), 0.0),
      counts_(static_cast<std::size_t>(n_states * n_batches), 0) {
  if (n_batches < 2) throw InvalidArgument("batch means need at least two batches");
}

void PerStateBatchMeans::add(Index state, double value) {
  const auto batch = std::min<std::int64_t>(time_ * n_batches_ / total_, n_batches_ - 1);
  const auto k = static_cast<std::size_t>(state * n_batches_ + batch);
  sums_[k] += value;
  ++counts_[k];
  ++time_;
}

Vector PerStateBatchMeans::mean() const {
  Vector m = Vector::Constant(n_states_, std::nan(""));
  for (Index s = 0; s < n_states_; ++s) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (int b = 0; b < n_batches_; ++b) {
      sum += sums_[static_cast<std::size_t>(s * n_batches_ + b)];
      count += counts_[static_cast<std::size_t>(s * n_batches_ + b)];
    }
    if (count > 0) m(s) = sum / static_cast<double>(count);
  }
  return m;
}

Vector PerStateBatchMeans::std_error() const {
  Vector se = Vector::Constant(n_states_, std::nan(""));
  for (Index s = 0; s < n_states_; ++s) {
    std::vector<double> batch_means;
    for (int b = 0; b < n_batches_; ++b) {
      const auto k = static_cast<std::size_t>(s * n_batches_ + b);
      if (counts_[k] > 0) batch_means.push_back(sums_[k] / static_cast<double>(counts_[k]));
    }
    if (batch_means.size() >= 2) {
      se(s) = std::sqrt(sample_variance(batch_means) / static_cast<double>(batch_means.size()));
    }
  }
  return se;
}

std::vector<std::int64_t> PerStateBatchMeans::visits() const {
  std::vector<std::int64_t> v(static_cast<std::size_t>(n_states_), 0);
  for (Index s = 0; s < n_states_; ++s) {
    for (int b = 0; b < n_batches_; ++b) v[static_cast<std::size_t>(s)] += counts_[static_cast<std::size_t>(s * n_batches_ + b)];
  }
  return v;
}

std::vector<int> PerStateBatchMeans::populated_batches() const {
  std::vector<int> v(static_cast<std::size_t>(n_states_), 0);
  for (Index s = 0; s < n_states_; ++s) {
    for (int b = 0; b < n_batches_; ++b) {
      if (counts_[static_cast<std::size_t>(s * n_batches_ + b)] > 0) ++v[static_cast<std::size_t>(s)];
    }
  }
  return v;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return std::nan("");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw InvalidArgument("spearman needs two equal-length samples");
  const auto rx = ranks(xs);
  const auto ry = ranks(ys);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double mann_whitney_less(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n1 = xs.size();
  const std::size_t n2 = ys.size();
  if (n1 == 0 || n2 == 0) throw InvalidArgument("mann-whitney needs nonempty samples");
  // U counts pairs with x > y; small U supports "X smaller".
  double u = 0.0;
  for (double x : xs) {
    for (double y : ys) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  // Number of arrangements with U = k, over C(n1 + n2, n1) equally likely rankings:
  // count[i][j][k] via the recursion f(i, j, k) = f(i - 1, j, k - j) + f(i, j - 1, k).
  const std::size_t max_u = n1 * n2;
  std::vector<std::vector<double>> prev(n2 + 1, std::vector<double>(max_u + 1, 0.0));
  for (std::size_t j = 0; j <= n2; ++j) prev[j][0] = 1.0;
  for (std::size_t i = 1; i <= n1; ++i) {
    std::vector<std::vector<double>> cur(n2 + 1, std::vector<double>(max_u + 1, 0.0));
    cur[0][0] = 1.0;
    for (std::size_t j = 1; j <= n2; ++j) {
      for (std::size_t k = 0; k <= i * j; ++k) {
        cur[j][k] = cur[j - 1][k] + (k >= j ? prev[j][k - j] : 0.0);
      }
    }
    prev = std::move(cur);
  }
  const auto& dist = prev[n2];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double tail = 0.0;
  for (std::size_t k = 0; k <= max_u; ++k) {
    if (static_cast<double>(k) <= u + 1e-9) tail += dist[k];
  }
  return tail / total;
}

double dispersion_greater(std::span<const double> xs, std::span<const double> ys) {
  const double mx = median(std::vector<double>(xs.begin(), xs.end()));
  const double my = median(std::vector<double>(ys.begin(), ys.end()));
  std::vector<double> dx, dy;
  for (double x : xs) dx.push_back(std::abs(x - mx));
  for (double y : ys) dy.push_back(std::abs(y - my));
  return mann_whitney_less(dx, dy);
}

double signed_rank_less(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("signed-rank test needs paired samples");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] != ys[i]) diffs.push_back(xs[i] - ys[i]);
  }
  if (diffs.empty()) return 1.0;
  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  // Tied ranks are half-integers, so work with doubled ranks.
  const auto r = ranks(mags);
  std::vector<std::size_t> twice(r.size());
  std::size_t observed = 0, max_sum = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    twice[i] = static_cast<std::size_t>(std::lround(2.0 * r[i]));
    max_sum += twice[i];
    if (diffs[i] > 0) observed += twice[i];
  }
  std::vector<double> count(max_sum + 1, 0.0);
  count[0] = 1.0;
  for (std::size_t w : twice) {
    for (std::size_t k = max_sum + 1; k-- > w;) count[k] += count[k - w];
  }
  const double total = std::accumulate(count.begin(), count.end(), 0.0);
  const double tail = std::accumulate(count.begin(), count.begin() + static_cast<std::ptrdiff_t>(observed) + 1, 0.0);
  return tail / total;
}

}  // namespace copeval

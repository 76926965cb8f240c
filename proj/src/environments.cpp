#include "copeval/environments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "copeval/errors.hpp"
#include "copeval/learners.hpp"

namespace copeval {

TabularProblem build_chain(const ChainSpec& spec) {
  const Index n = spec.n_states;
  if (n < 2) throw InvalidArgument("chain needs at least two states");
  if (!(spec.epsilon > 0.0 && spec.epsilon < 0.5)) throw InvalidArgument("chain epsilon must lie in (0, 0.5)");
  if (spec.rewards && spec.rewards->size() != n) throw InvalidArgument("chain reward vector has wrong length");

  TabularProblem out;
  FiniteMdp& mdp = out.mdp;
  mdp.transition.assign(2, Matrix::Zero(n, n));
  mdp.reward = Matrix::Zero(n, 2);
  for (Index s = 0; s < n; ++s) {
    mdp.transition[0](s, std::max<Index>(s - 1, 0)) = 1.0;
    mdp.transition[1](s, std::min<Index>(s + 1, n - 1)) = 1.0;
    const double r = spec.rewards ? (*spec.rewards)(s) : (s >= n / 2 ? 1.0 : 0.0);
    mdp.reward.row(s).setConstant(r);
  }
  mdp.discount = spec.discount;
  mdp.initial_dist = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double hi = 0.5 + spec.epsilon, lo = 0.5 - spec.epsilon;
  out.behavior = StochasticPolicy::state_independent(n, (Vector(2) << hi, lo).finished());
  out.target = StochasticPolicy::state_independent(n, (Vector(2) << lo, hi).finished());
  return out;
}

Vector chain_stationary_closed_form(Index n_states, double p_right) {
  const double log_q = std::log(p_right / (1.0 - p_right));
  Vector d(n_states);
  // Work in logs relative to the heaviest end to keep long chains finite.
  const double ref = log_q > 0.0 ? log_q * static_cast<double>(n_states - 1) : 0.0;
  for (Index s = 0; s < n_states; ++s) d(s) = std::exp(log_q * static_cast<double>(s) - ref);
  return d / d.sum();
}

FeatureMatrix chain_linear_features(Index n_states) {
  if (n_states < 2) throw InvalidArgument("linear features need at least two states");
  RowMatrix phi(n_states, 2);
  for (Index s = 0; s < n_states; ++s) {
    phi(s, 0) = 1.0;
    phi(s, 1) = static_cast<double>(s) / static_cast<double>(n_states - 1);
  }
  return FeatureMatrix(std::move(phi));
}

FeatureMatrix binary_features(Index n_states, int bits) {
  if (bits < 1 || bits > 62) throw InvalidArgument("feature bit width must lie in [1, 62]");
  RowMatrix phi(n_states, bits + 1);
  for (Index s = 0; s < n_states; ++s) {
    for (int b = 0; b < bits; ++b) phi(s, b) = static_cast<double>((static_cast<std::uint64_t>(s) >> b) & 1u);
    phi(s, bits) = 1.0;
  }
  return FeatureMatrix(std::move(phi));
}

RandomMdpProblem build_random_mdp(const RandomMdpSpec& spec) {
  const Index n = spec.n_states;
  const Index a_count = spec.n_actions;
  if (n < 2 || a_count < 2) throw InvalidArgument("random MDP needs at least two states and two actions");
  if (!(spec.policy_bias > 0.0 && spec.policy_bias < 1.0)) throw InvalidArgument("policy bias must lie in (0, 1)");
  int bits = 1;
  while ((Index{1} << bits) < n) ++bits;
  if (spec.feature_bits) bits = *spec.feature_bits;

  Rng rng(spec.seed);
  FiniteMdp mdp;
  mdp.transition.assign(static_cast<std::size_t>(a_count), Matrix::Zero(n, n));
  for (Index a = 0; a < a_count; ++a) {
    for (Index s = 0; s < n; ++s) {
      auto row = mdp.transition[static_cast<std::size_t>(a)].row(s);
      for (Index j = 0; j < n; ++j) row(j) = rng.uniform();
      row /= row.sum();
    }
  }
  mdp.reward = Matrix(n, a_count);
  for (Index s = 0; s < n; ++s) {
    for (Index a = 0; a < a_count; ++a) mdp.reward(s, a) = rng.uniform();
  }
  mdp.discount = spec.discount;
  mdp.initial_dist = Vector::Constant(n, 1.0 / static_cast<double>(n));

  const double rest = (1.0 - spec.policy_bias) / static_cast<double>(a_count - 1);
  Vector mu = Vector::Constant(a_count, rest), pi = Vector::Constant(a_count, rest);
  mu(0) = spec.policy_bias;
  pi(a_count - 1) = spec.policy_bias;
  RandomMdpProblem out{{std::move(mdp), StochasticPolicy::state_independent(n, mu),
                        StochasticPolicy::state_independent(n, pi)},
                       binary_features(n, bits)};
  return out;
}

// ---------------------------------------------------------------------------

Aggregator Aggregator::grid(std::vector<double> lower, std::vector<double> upper, int resolution) {
  if (lower.size() != upper.size() || lower.empty()) throw InvalidArgument("grid bounds mismatch");
  if (resolution < 1) throw InvalidArgument("grid resolution must be positive");
  Aggregator g;
  g.kind_ = AggregationSpec::Kind::grid;
  g.lower_ = std::move(lower);
  g.upper_ = std::move(upper);
  g.resolution_ = resolution;
  return g;
}

Aggregator Aggregator::kmeans(std::vector<double> lower, std::vector<double> upper,
                              const std::vector<std::vector<double>>& data, Index k, int iterations,
                              std::uint64_t seed) {
  if (k < 1) throw InvalidArgument("k-means needs at least one cluster");
  if (static_cast<Index>(data.size()) < k) throw InvalidArgument("k-means needs at least k training points");
  Aggregator m;
  m.kind_ = AggregationSpec::Kind::kmeans;
  m.lower_ = std::move(lower);
  m.upper_ = std::move(upper);
  std::vector<std::vector<double>> points;
  points.reserve(data.size());
  for (const auto& x : data) points.push_back(m.normalize(x, nullptr));

  Rng rng(seed, 0x6b6d);
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.uniform() * static_cast<double>(order.size() - static_cast<std::size_t>(i)));
    std::swap(order[static_cast<std::size_t>(i)], order[std::min(j, order.size() - 1)]);
    m.centers_.push_back(points[order[static_cast<std::size_t>(i)]]);
  }

  const std::size_t dim = m.lower_.size();
  std::vector<Index> label(points.size(), 0);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t p = 0; p < points.size(); ++p) label[p] = m.nearest_center(points[p]);
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t p = 0; p < points.size(); ++p) {
      const auto c = static_cast<std::size_t>(label[p]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[p][d];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t d = 0; d < dim; ++d) m.centers_[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  return m;
}

Index Aggregator::n_cells() const {
  if (kind_ == AggregationSpec::Kind::kmeans) return static_cast<Index>(centers_.size());
  Index n = 1;
  for (std::size_t d = 0; d < lower_.size(); ++d) n *= resolution_;
  return n;
}

std::vector<double> Aggregator::normalize(const std::vector<double>& obs, bool* outside) const {
  if (obs.size() != lower_.size()) throw InvalidArgument("observation has wrong dimension");
  std::vector<double> u(obs.size());
  bool out = false;
  for (std::size_t d = 0; d < obs.size(); ++d) {
    u[d] = (obs[d] - lower_[d]) / (upper_[d] - lower_[d]);
    if (u[d] < 0.0 || u[d] > 1.0) {
      out = true;
      u[d] = std::clamp(u[d], 0.0, 1.0);
    }
  }
  if (outside) *outside = out;
  return u;
}

Index Aggregator::assign(const std::vector<double>& obs, bool* fallback) const {
  if (kind_ == AggregationSpec::Kind::grid) {
    const auto u = normalize(obs, fallback);
    Index cell = 0, stride = 1;
    for (double x : u) {
      const Index idx = std::min<Index>(static_cast<Index>(x * resolution_), resolution_ - 1);
      cell += idx * stride;
      stride *= resolution_;
    }
    return cell;
  }
  return nearest_center(normalize(obs, fallback));
}

Index Aggregator::nearest_center(const std::vector<double>& u) const {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers_.size(); ++c) {
    double dist = 0.0;
    for (std::size_t d = 0; d < u.size(); ++d) dist += (u[d] - centers_[c][d]) * (u[d] - centers_[c][d]);
    if (dist < best_d) {
      best_d = dist;
      best = static_cast<Index>(c);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

Vector default_behavior_probs(SimulatorId id) {
  const Index a = make_simulator(id)->n_actions();
  return Vector::Constant(a, 1.0 / static_cast<double>(a));
}

Vector default_target_probs(SimulatorId id) {
  if (id == SimulatorId::cart_pole) {
    Vector w(21);
    for (Index a = 0; a < 21; ++a) w(a) = CartPole::action_value(a) > 1e-9 ? 1.5 : 1.0;
    return w / w.sum();
  }
  return (Vector(3) << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 2.0).finished();
}

AggregatedEnvironment::AggregatedEnvironment(AggregatedSpec spec) : spec_(std::move(spec)) {
  behavior_ = default_behavior_probs(spec_.simulator);
  target_ = spec_.target_equals_behavior ? behavior_ : default_target_probs(spec_.simulator);
  auto sim = make_simulator(spec_.simulator);
  const AggregationSpec& agg = spec_.aggregation;
  if (agg.kind == AggregationSpec::Kind::grid) {
    aggregator_ = Aggregator::grid(sim->lower(), sim->upper(), agg.resolution);
    return;
  }
  // Exploratory behavior trajectory for the cluster centers.
  Rng rng(agg.seed, 0x7472);
  std::vector<double> cdf(static_cast<std::size_t>(behavior_.size()));
  std::partial_sum(behavior_.data(), behavior_.data() + behavior_.size(), cdf.begin());
  cdf.back() = 1.0;
  std::vector<std::vector<double>> data;
  data.reserve(static_cast<std::size_t>(agg.training_steps));
  sim->reset(rng);
  for (std::int64_t t = 0; t < agg.training_steps; ++t) {
    data.push_back(sim->observation());
    if (sim->step(static_cast<Index>(rng.categorical(cdf)))) sim->reset(rng);
  }
  aggregator_ = Aggregator::kmeans(sim->lower(), sim->upper(), data, agg.n_clusters, agg.iterations, agg.seed);
}

std::unique_ptr<AggregatedStream> AggregatedEnvironment::stream(std::uint64_t seed, bool on_target) const {
  return std::make_unique<AggregatedStream>(*this, seed, on_target);
}

AggregatedStream::AggregatedStream(const AggregatedEnvironment& env, std::uint64_t seed, bool on_target)
    : env_(env), sim_(make_simulator(env.spec().simulator)), rng_(seed, on_target ? 2 : 1) {
  const Vector& act = on_target ? env.target_probs() : env.behavior_probs();
  cdf_.resize(static_cast<std::size_t>(act.size()));
  std::partial_sum(act.data(), act.data() + act.size(), cdf_.begin());
  cdf_.back() = 1.0;
  ratio_ = on_target ? Vector::Ones(act.size()) : Vector(env.target_probs().cwiseQuotient(env.behavior_probs()));
  sim_->reset(rng_);
  for (std::int64_t t = 0; t < env.spec().burn_in; ++t) {
    if (sim_->step(static_cast<Index>(rng_.categorical(cdf_)))) sim_->reset(rng_);
  }
}

Index AggregatedStream::cell() {
  bool fallback = false;
  const Index c = env_.aggregator().assign(sim_->observation(), &fallback);
  if (fallback) ++fallbacks_;
  return c;
}

Transition AggregatedStream::next() {
  Transition tr;
  tr.state = cell();
  tr.action = static_cast<Index>(rng_.categorical(cdf_));
  const bool terminal = sim_->step(tr.action);
  tr.reward = sim_->last_reward();
  tr.next_state = cell();
  tr.is_ratio = ratio_(tr.action);
  tr.episode_start = start_;
  start_ = false;
  if (terminal) {
    sim_->reset(rng_);
    start_ = true;
    ++episodes_;
  }
  return tr;
}

Vector reference_value_weights(const AggregatedEnvironment& env, std::int64_t steps, std::uint64_t seed, double alpha,
                               double discount) {
  LearnerConfig cfg;
  cfg.discount = discount;
  cfg.step_value = StepSchedule::constant(alpha);
  TdLearner td(Algorithm::td, cfg, env.features());
  auto stream = env.stream(seed, true);
  for (std::int64_t t = 0; t < steps; ++t) td.observe(stream->next());
  return td.value_weights();
}

Vector empirical_ratio_reference(const AggregatedEnvironment& env, std::int64_t steps, std::uint64_t seed) {
  const Index n = env.n_cells();
  Vector on = Vector::Zero(n), off = Vector::Zero(n);
  auto target = env.stream(seed, true);
  auto behavior = env.stream(seed + 1, false);
  for (std::int64_t t = 0; t < steps; ++t) {
    on(target->next().state) += 1.0;
    off(behavior->next().state) += 1.0;
  }
  Vector ratio = Vector::Zero(n);
  for (Index s = 0; s < n; ++s) {
    if (off(s) > 0.0) ratio(s) = on(s) / off(s);
  }
  return ratio;
}

}  // namespace copeval

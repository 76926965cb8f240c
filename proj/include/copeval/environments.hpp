#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "copeval/features.hpp"
#include "copeval/mdp.hpp"
#include "copeval/simulators.hpp"
#include "copeval/types.hpp"

namespace copeval {

struct TabularProblem {
  FiniteMdp mdp;
  StochasticPolicy behavior;
  StochasticPolicy target;
};

/// States 0..n-1, action 0 = left, 1 = right; stepping off either end self-loops.
/// The behavior moves left w.p. 0.5 + epsilon, the target moves right w.p. 0.5 + epsilon.
struct ChainSpec {
  Index n_states = 100;
  double epsilon = 0.01;
  /// Default: 1 on the right half (state >= n/2), 0 elsewhere.
  std::optional<Vector> rewards;
  double discount = 0.99;
};

TabularProblem build_chain(const ChainSpec& spec);

/// d(s) proportional to q^s, normalized, for the walk that steps right with
/// probability p: q = p / (1 - p).
Vector chain_stationary_closed_form(Index n_states, double p_right);

/// Rows (1, s / (n - 1)). Nonnegative, so usable as ratio features.
FeatureMatrix chain_linear_features(Index n_states);

struct RandomMdpSpec {
  Index n_states = 32;
  Index n_actions = 2;
  std::uint64_t seed = 0;
  /// Binary code width; defaults to ceil(log2 n_states).
  std::optional<int> feature_bits;
  /// Behavior picks action 0 w.p. this, target picks action 1 w.p. this.
  double policy_bias = 0.75;
  double discount = 0.99;
};

struct RandomMdpProblem {
  TabularProblem problem;
  FeatureMatrix features;
};

/// Transition rows iid U(0,1) normalized, rewards r(s,a) ~ U(0,1), uniform initial
/// distribution; features are the binary code of the state index plus a constant 1.
RandomMdpProblem build_random_mdp(const RandomMdpSpec& spec);

/// Row s holds the `bits` low bits of s followed by a constant 1.
FeatureMatrix binary_features(Index n_states, int bits);

// ---------------------------------------------------------------------------

struct AggregationSpec {
  enum class Kind { grid, kmeans };
  Kind kind = Kind::kmeans;
  /// Cells per dimension for the grid.
  int resolution = 10;
  Index n_clusters = 100;
  std::int64_t training_steps = 100000;
  int iterations = 50;
  std::uint64_t seed = 0;
};

struct AggregatedSpec {
  SimulatorId simulator = SimulatorId::mountain_car;
  AggregationSpec aggregation;
  /// Steps discarded after the initial reset of every stream.
  std::int64_t burn_in = 10000;
  /// Use the behavior policy as target (all ratios 1).
  bool target_equals_behavior = false;
};

/// Maps continuous observations to cells. Coordinates are normalized by the
/// simulator box; points outside the box are clamped and counted as fallbacks.
class Aggregator {
 public:
  Aggregator() = default;
  static Aggregator grid(std::vector<double> lower, std::vector<double> upper, int resolution);
  static Aggregator kmeans(std::vector<double> lower, std::vector<double> upper, const std::vector<std::vector<double>>& data,
                           Index k, int iterations, std::uint64_t seed);

  Index n_cells() const;
  Index assign(const std::vector<double>& obs, bool* fallback = nullptr) const;
  /// Cluster centers in normalized coordinates (empty for a grid).
  const std::vector<std::vector<double>>& centers() const { return centers_; }

 private:
  std::vector<double> normalize(const std::vector<double>& obs, bool* outside) const;
  Index nearest_center(const std::vector<double>& u) const;

  AggregationSpec::Kind kind_ = AggregationSpec::Kind::grid;
  std::vector<double> lower_;
  std::vector<double> upper_;
  int resolution_ = 1;
  std::vector<std::vector<double>> centers_;
};

/// Behavior is uniform; the target is (1/6, 1/3, 1/2) for the
/// three-action tasks, and for the pole 1.5 : 1 weight on positive vs nonpositive forces.
Vector default_behavior_probs(SimulatorId id);
Vector default_target_probs(SimulatorId id);

class AggregatedStream;

class AggregatedEnvironment {
 public:
  /// Trains the aggregation on a behavior trajectory (k-means) or builds the grid.
  explicit AggregatedEnvironment(AggregatedSpec spec);

  const AggregatedSpec& spec() const { return spec_; }
  Index n_cells() const { return aggregator_.n_cells(); }
  Index n_actions() const { return behavior_.size(); }
  FeatureMatrix features() const { return FeatureMatrix::identity(n_cells()); }
  const Aggregator& aggregator() const { return aggregator_; }
  const Vector& behavior_probs() const { return behavior_; }
  const Vector& target_probs() const { return target_; }

  /// Stream following the behavior (or, with on_target, the target policy, ratios then 1).
  std::unique_ptr<AggregatedStream> stream(std::uint64_t seed, bool on_target = false) const;

 private:
  AggregatedSpec spec_;
  Aggregator aggregator_;
  Vector behavior_;
  Vector target_;
};

/// Continuous trajectory reported through aggregated cells. After a terminal
/// step the simulator is reset; the next transition carries episode_start.
class AggregatedStream final : public TransitionSource {
 public:
  AggregatedStream(const AggregatedEnvironment& env, std::uint64_t seed, bool on_target);

  Transition next() override;
  std::int64_t fallbacks() const { return fallbacks_; }
  std::int64_t episodes() const { return episodes_; }

 private:
  Index cell();

  const AggregatedEnvironment& env_;
  std::unique_ptr<Simulator> sim_;
  Rng rng_;
  std::vector<double> cdf_;
  Vector ratio_;
  bool start_ = true;
  std::int64_t fallbacks_ = 0;
  std::int64_t episodes_ = 1;
};

/// On-policy TD(0) with constant step `alpha` on a target-policy stream.
Vector reference_value_weights(const AggregatedEnvironment& env, std::int64_t steps, std::uint64_t seed,
                               double alpha = 0.05, double discount = 0.99);

/// Empirical visit-frequency ratio (N_target / N_behavior) over two independent
/// long runs; cells never visited by the behavior get 0.
Vector empirical_ratio_reference(const AggregatedEnvironment& env, std::int64_t steps, std::uint64_t seed);

}  // namespace copeval

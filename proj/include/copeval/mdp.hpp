#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "copeval/rng.hpp"
#include "copeval/types.hpp"

namespace copeval {

/// Tabular MDP M = (S, A, P, R, zeta, gamma) with expected rewards.
struct FiniteMdp {
  /// transition[a](s, s') = Pr(s' | s, a).
  std::vector<Matrix> transition;
  /// reward(s, a) = E[r | s, a].
  Matrix reward;
  double discount = 0.99;
  Vector initial_dist;

  Index n_states() const { return reward.rows(); }
  Index n_actions() const { return reward.cols(); }
  double prob(Index s, Index a, Index next) const { return transition[static_cast<std::size_t>(a)](s, next); }

  /// Throws InvalidModel when a row, the initial distribution or the discount is malformed.
  void validate() const;
};

/// Per-state action distribution, probs(s, a) = policy(a | s).
struct StochasticPolicy {
  Matrix probs;

  Index n_states() const { return probs.rows(); }
  Index n_actions() const { return probs.cols(); }
  double operator()(Index s, Index a) const { return probs(s, a); }
  void validate() const;

  static StochasticPolicy uniform(Index n_states, Index n_actions);
  /// Same action distribution in every state.
  static StochasticPolicy state_independent(Index n_states, const Vector& action_probs);
};

/// State-to-state chain and reward vector induced by a policy.
struct InducedChain {
  Matrix p;
  Vector r;
};

/// One element of the experience stream.
struct Transition {
  Index state = 0;
  Index action = 0;
  double reward = 0.0;
  Index next_state = 0;
  /// rho_t = pi(a|s) / mu(a|s).
  double is_ratio = 1.0;
  /// First transition after a reset; learners restart traces and followers.
  bool episode_start = false;
};

InducedChain induce(const FiniteMdp& mdp, const StochasticPolicy& policy);

/// Irreducible and aperiodic. Reachability over the positive entries,
/// then the period as gcd of (level(u) + 1 - level(v)) over edges u->v of a BFS tree.
bool check_ergodic(const Matrix& p);
inline bool check_ergodic(const InducedChain& chain) { return check_ergodic(chain.p); }

/// Left Perron vector d with d^T P = d^T, sum(d) = 1.
/// Direct solve for n <= 2000, power iteration above. Throws ErgodicityViolation.
Vector stationary_distribution(const Matrix& p);
inline Vector stationary_distribution(const InducedChain& chain) { return stationary_distribution(chain.p); }

/// Solves (I - gamma P) V = R.
Vector value_function(const InducedChain& chain, double discount);

/// support(target(.|s)) is contained in support(behavior(.|s)) for every s.
bool check_proper(const StochasticPolicy& behavior, const StochasticPolicy& target);

/// Anything that emits transitions one at a time.
class TransitionSource {
 public:
  virtual ~TransitionSource() = default;
  virtual Transition next() = 0;
};

struct StreamOptions {
  enum class Start { stationary, initial_then_burn_in };
  Start start = Start::stationary;
  std::int64_t burn_in = 0;
  /// Standard deviation of zero-mean Gaussian noise added to every reward.
  double reward_noise_std = 0.0;
  std::uint64_t stream_id = 0;
};

/// Behavior-policy trajectory through a tabular MDP.
class TabularStream final : public TransitionSource {
 public:
  TabularStream(const FiniteMdp& mdp, const StochasticPolicy& behavior, const StochasticPolicy& target,
                std::uint64_t seed, StreamOptions options = {});

  Transition next() override;
  Index current_state() const { return state_; }
  const Vector& behavior_stationary() const { return d_behavior_; }

 private:
  Index n_states_;
  Index n_actions_;
  std::vector<double> action_cdf_;      // [s * A + a]
  std::vector<double> transition_cdf_;  // [(s * A + a) * S + s']
  Matrix reward_;
  Matrix ratio_;
  Vector d_behavior_;
  double noise_std_;
  Rng rng_;
  Index state_ = 0;

  Index step_from(Index s, Index& action);
};

void to_json(nlohmann::json& j, const FiniteMdp& mdp);
void from_json(const nlohmann::json& j, FiniteMdp& mdp);
void to_json(nlohmann::json& j, const StochasticPolicy& policy);
void from_json(const nlohmann::json& j, StochasticPolicy& policy);

}  // namespace copeval

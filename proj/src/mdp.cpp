#include "copeval/mdp.hpp"

#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "copeval/errors.hpp"

namespace copeval {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_distribution(const auto& row, const std::string& what) {
  if ((row.array() < 0.0).any()) throw InvalidModel(what + " has a negative entry");
  if (std::abs(row.sum() - 1.0) > kRowTolerance) throw InvalidModel(what + " does not sum to 1");
}

std::vector<Index> bfs_levels(const Matrix& p, bool reverse) {
  const Index n = p.rows();
  std::vector<Index> level(static_cast<std::size_t>(n), -1);
  std::queue<Index> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    for (Index v = 0; v < n; ++v) {
      const double w = reverse ? p(v, u) : p(u, v);
      if (w > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
        level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
        frontier.push(v);
      }
    }
  }
  return level;
}

}  // namespace

void FiniteMdp::validate() const {
  const Index s = n_states();
  const Index a = n_actions();
  if (s <= 0 || a <= 0) throw InvalidModel("MDP needs at least one state and one action");
  if (static_cast<Index>(transition.size()) != a) throw InvalidModel("transition tensor has wrong action count");
  for (Index k = 0; k < a; ++k) {
    const Matrix& t = transition[static_cast<std::size_t>(k)];
    if (t.rows() != s || t.cols() != s) throw InvalidModel("transition matrix has wrong shape");
    for (Index i = 0; i < s; ++i) {
      check_distribution(t.row(i), "transition row (s=" + std::to_string(i) + ", a=" + std::to_string(k) + ")");
    }
  }
  if (!reward.allFinite()) throw InvalidModel("reward table has non-finite entries");
  if (!(discount > 0.0 && discount < 1.0)) throw InvalidModel("discount must lie strictly inside (0, 1)");
  if (initial_dist.size() != s) throw InvalidModel("initial distribution has wrong length");
  check_distribution(initial_dist, "initial distribution");
}

void StochasticPolicy::validate() const {
  if (probs.rows() <= 0 || probs.cols() <= 0) throw InvalidModel("empty policy");
  for (Index i = 0; i < probs.rows(); ++i) {
    check_distribution(probs.row(i), "policy row " + std::to_string(i));
  }
}

StochasticPolicy StochasticPolicy::uniform(Index n_states, Index n_actions) {
  return {Matrix::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions))};
}

StochasticPolicy StochasticPolicy::state_independent(Index n_states, const Vector& action_probs) {
  StochasticPolicy policy{Matrix(n_states, action_probs.size())};
  for (Index i = 0; i < n_states; ++i) policy.probs.row(i) = action_probs.transpose();
  policy.validate();
  return policy;
}

InducedChain induce(const FiniteMdp& mdp, const StochasticPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw InvalidArgument("policy dimensions do not match the MDP");
  }
  const Index s = mdp.n_states();
  InducedChain chain{Matrix::Zero(s, s), Vector::Zero(s)};
  for (Index a = 0; a < mdp.n_actions(); ++a) {
    chain.p += policy.probs.col(a).asDiagonal() * mdp.transition[static_cast<std::size_t>(a)];
  }
  chain.r = (policy.probs.array() * mdp.reward.array()).rowwise().sum();
  return chain;
}

bool check_ergodic(const Matrix& p) {
  const Index n = p.rows();
  if (n == 0 || p.cols() != n) return false;
  const auto forward = bfs_levels(p, false);
  const auto backward = bfs_levels(p, true);
  for (Index v = 0; v < n; ++v) {
    if (forward[static_cast<std::size_t>(v)] < 0 || backward[static_cast<std::size_t>(v)] < 0) return false;
  }
  Index period = 0;
  for (Index u = 0; u < n; ++u) {
    for (Index v = 0; v < n; ++v) {
      if (p(u, v) > 0.0) {
        const Index gap = forward[static_cast<std::size_t>(u)] + 1 - forward[static_cast<std::size_t>(v)];
        period = std::gcd(period, gap < 0 ? -gap : gap);
      }
    }
  }
  return period == 1;
}

Vector stationary_distribution(const Matrix& p) {
  if (p.rows() != p.cols()) throw InvalidArgument("transition matrix must be square");
  if (!check_ergodic(p)) throw ErgodicityViolation("induced Markov chain is not ergodic");
  const Index n = p.rows();
  Vector d;
  if (n <= 2000) {
    Matrix system = p.transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    d = system.partialPivLu().solve(rhs);
  } else {
    d = Vector::Constant(n, 1.0 / static_cast<double>(n));
    for (int iter = 0; iter < 1000000; ++iter) {
      Vector next = p.transpose() * d;
      next /= next.sum();
      const double change = (next - d).lpNorm<1>();
      d = std::move(next);
      if (change < 1e-12) break;
    }
  }
  d = d.cwiseMax(0.0);
  d /= d.sum();
  if (d.minCoeff() <= 0.0) throw ErgodicityViolation("stationary distribution has a zero entry");
  return d;
}

Vector value_function(const InducedChain& chain, double discount) {
  if (!(discount > 0.0 && discount < 1.0)) throw InvalidArgument("discount must lie strictly inside (0, 1)");
  const Index n = chain.p.rows();
  const Matrix system = Matrix::Identity(n, n) - discount * chain.p;
  return system.partialPivLu().solve(chain.r);
}

bool check_proper(const StochasticPolicy& behavior, const StochasticPolicy& target) {
  if (behavior.n_states() != target.n_states() || behavior.n_actions() != target.n_actions()) {
    throw InvalidArgument("policy dimensions do not match");
  }
  return ((target.probs.array() <= 0.0) || (behavior.probs.array() > 0.0)).all();
}

TabularStream::TabularStream(const FiniteMdp& mdp, const StochasticPolicy& behavior,
                             const StochasticPolicy& target, std::uint64_t seed, StreamOptions options)
    : n_states_(mdp.n_states()),
      n_actions_(mdp.n_actions()),
      reward_(mdp.reward),
      ratio_(Matrix::Zero(mdp.n_states(), mdp.n_actions())),
      noise_std_(options.reward_noise_std),
      rng_(seed, options.stream_id) {
  mdp.validate();
  behavior.validate();
  target.validate();
  if (!check_proper(behavior, target)) throw ImproperSupport("target policy is not covered by the behavior policy");
  const InducedChain target_chain = induce(mdp, target);
  if (!check_ergodic(target_chain)) throw ErgodicityViolation("target-induced chain is not ergodic");
  d_behavior_ = stationary_distribution(induce(mdp, behavior));

  const auto s_count = static_cast<std::size_t>(n_states_);
  const auto a_count = static_cast<std::size_t>(n_actions_);
  action_cdf_.resize(s_count * a_count);
  transition_cdf_.resize(s_count * a_count * s_count);
  for (Index s = 0; s < n_states_; ++s) {
    double acc = 0.0;
    for (Index a = 0; a < n_actions_; ++a) {
      const double mu = behavior(s, a);
      acc += mu;
      action_cdf_[static_cast<std::size_t>(s * n_actions_ + a)] = acc;
      if (mu > 0.0) ratio_(s, a) = target(s, a) / mu;
      double tacc = 0.0;
      for (Index n = 0; n < n_states_; ++n) {
        tacc += mdp.prob(s, a, n);
        transition_cdf_[static_cast<std::size_t>((s * n_actions_ + a) * n_states_ + n)] = tacc;
      }
    }
  }

  if (options.start == StreamOptions::Start::stationary) {
    std::vector<double> cdf(s_count);
    std::partial_sum(d_behavior_.data(), d_behavior_.data() + n_states_, cdf.begin());
    state_ = static_cast<Index>(rng_.categorical(cdf));
  } else {
    std::vector<double> cdf(s_count);
    std::partial_sum(mdp.initial_dist.data(), mdp.initial_dist.data() + n_states_, cdf.begin());
    state_ = static_cast<Index>(rng_.categorical(cdf));
    for (std::int64_t i = 0; i < options.burn_in; ++i) {
      Index action = 0;
      state_ = step_from(state_, action);
    }
  }
}

Index TabularStream::step_from(Index s, Index& action) {
  const std::span<const double> acdf(action_cdf_.data() + s * n_actions_, static_cast<std::size_t>(n_actions_));
  action = static_cast<Index>(rng_.categorical(acdf));
  const std::span<const double> tcdf(transition_cdf_.data() + (s * n_actions_ + action) * n_states_,
                                     static_cast<std::size_t>(n_states_));
  return static_cast<Index>(rng_.categorical(tcdf));
}

Transition TabularStream::next() {
  Transition tr;
  tr.state = state_;
  tr.next_state = step_from(state_, tr.action);
  tr.reward = reward_(tr.state, tr.action);
  if (noise_std_ > 0.0) tr.reward += noise_std_ * rng_.normal();
  tr.is_ratio = ratio_(tr.state, tr.action);
  state_ = tr.next_state;
  return tr;
}

void to_json(nlohmann::json& j, const FiniteMdp& mdp) {
  const Index s = mdp.n_states();
  const Index a = mdp.n_actions();
  nlohmann::json transition = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  for (Index i = 0; i < s; ++i) {
    nlohmann::json per_action = nlohmann::json::array();
    nlohmann::json rrow = nlohmann::json::array();
    for (Index k = 0; k < a; ++k) {
      nlohmann::json row = nlohmann::json::array();
      for (Index n = 0; n < s; ++n) row.push_back(mdp.prob(i, k, n));
      per_action.push_back(std::move(row));
      rrow.push_back(mdp.reward(i, k));
    }
    transition.push_back(std::move(per_action));
    reward.push_back(std::move(rrow));
  }
  j = nlohmann::json{{"n_states", s},
                     {"n_actions", a},
                     {"transition", std::move(transition)},
                     {"reward", std::move(reward)},
                     {"discount", mdp.discount},
                     {"initial_dist", std::vector<double>(mdp.initial_dist.data(), mdp.initial_dist.data() + s)}};
}

void from_json(const nlohmann::json& j, FiniteMdp& mdp) {
  const auto s = j.at("n_states").get<Index>();
  const auto a = j.at("n_actions").get<Index>();
  const auto& transition = j.at("transition");
  const auto& reward = j.at("reward");
  if (static_cast<Index>(transition.size()) != s || static_cast<Index>(reward.size()) != s) {
    throw InvalidModel("MDP document has inconsistent state dimension");
  }
  mdp.transition.assign(static_cast<std::size_t>(a), Matrix::Zero(s, s));
  mdp.reward = Matrix::Zero(s, a);
  for (Index i = 0; i < s; ++i) {
    const auto& per_action = transition.at(static_cast<std::size_t>(i));
    const auto& rrow = reward.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(per_action.size()) != a || static_cast<Index>(rrow.size()) != a) {
      throw InvalidModel("MDP document has inconsistent action dimension");
    }
    for (Index k = 0; k < a; ++k) {
      const auto& row = per_action.at(static_cast<std::size_t>(k));
      if (static_cast<Index>(row.size()) != s) throw InvalidModel("transition row has wrong length");
      for (Index n = 0; n < s; ++n) mdp.transition[static_cast<std::size_t>(k)](i, n) = row.at(static_cast<std::size_t>(n)).get<double>();
      mdp.reward(i, k) = rrow.at(static_cast<std::size_t>(k)).get<double>();
    }
  }
  mdp.discount = j.at("discount").get<double>();
  const auto init = j.at("initial_dist").get<std::vector<double>>();
  mdp.initial_dist = Eigen::Map<const Vector>(init.data(), static_cast<Index>(init.size()));
  mdp.validate();
}

void to_json(nlohmann::json& j, const StochasticPolicy& policy) {
  nlohmann::json probs = nlohmann::json::array();
  for (Index i = 0; i < policy.n_states(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < policy.n_actions(); ++k) row.push_back(policy.probs(i, k));
    probs.push_back(std::move(row));
  }
  j = nlohmann::json{{"n_states", policy.n_states()}, {"n_actions", policy.n_actions()}, {"probs", std::move(probs)}};
}

void from_json(const nlohmann::json& j, StochasticPolicy& policy) {
  const auto s = j.at("n_states").get<Index>();
  const auto a = j.at("n_actions").get<Index>();
  const auto& probs = j.at("probs");
  if (static_cast<Index>(probs.size()) != s) throw InvalidModel("policy document has inconsistent state dimension");
  policy.probs = Matrix::Zero(s, a);
  for (Index i = 0; i < s; ++i) {
    const auto& row = probs.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(row.size()) != a) throw InvalidModel("policy row has wrong length");
    for (Index k = 0; k < a; ++k) policy.probs(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  policy.validate();
}

}  // namespace copeval

#include <doctest.h>

#include <cmath>

#include "copeval/environments.hpp"
#include "copeval/errors.hpp"
#include "copeval/mdp.hpp"
#include "copeval/rng.hpp"
#include "copeval/stats.hpp"
#include "test_util.hpp"

using namespace copeval;
using testutil::sup_diff;

TEST_CASE("induce selects rows for a deterministic policy") {
  const FiniteMdp mdp = testutil::random_mdp(5, 3, 11);
  StochasticPolicy pol{Matrix::Zero(5, 3)};
  const int choice[5] = {0, 2, 1, 1, 0};
  for (Index s = 0; s < 5; ++s) pol.probs(s, choice[s]) = 1.0;
  const InducedChain c = induce(mdp, pol);
  for (Index s = 0; s < 5; ++s) {
    CHECK(sup_diff(c.p.row(s).transpose(), mdp.transition[choice[s]].row(s).transpose()) == 0.0);
    CHECK(c.r(s) == mdp.reward(s, choice[s]));
  }
}

TEST_CASE("induce with a uniform policy averages the action matrices") {
  const FiniteMdp mdp = testutil::random_mdp(6, 2, 3);
  const InducedChain c = induce(mdp, StochasticPolicy::uniform(6, 2));
  const Matrix avg = 0.5 * (mdp.transition[0] + mdp.transition[1]);
  CHECK((c.p - avg).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(sup_diff(c.r, 0.5 * (mdp.reward.col(0) + mdp.reward.col(1))) < 1e-15);
}

TEST_CASE("chain behavior induces the hand-built tridiagonal matrix") {
  ChainSpec spec;
  spec.n_states = 4;
  spec.epsilon = 0.1;
  const TabularProblem p = build_chain(spec);
  const InducedChain c = induce(p.mdp, p.behavior);
  Matrix expected(4, 4);
  expected << 0.6, 0.4, 0.0, 0.0,  //
      0.6, 0.0, 0.4, 0.0,          //
      0.0, 0.6, 0.0, 0.4,          //
      0.0, 0.0, 0.6, 0.4;
  CHECK((c.p - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("stationary distribution on the 100-state chain") {
  const TabularProblem p = build_chain({});
  const Vector d_mu = stationary_distribution(induce(p.mdp, p.behavior));
  const Vector d_pi = stationary_distribution(induce(p.mdp, p.target));
  // Printed to one significant digit: 8e-4 and 0.04.
  CHECK(d_mu(99) >= 7.5e-4);
  CHECK(d_mu(99) < 8.5e-4);
  CHECK(d_pi(99) >= 0.035);
  CHECK(d_pi(99) < 0.045);
  CHECK(sup_diff(d_mu, chain_stationary_closed_form(100, 0.49)) < 1e-9);
  CHECK(sup_diff(d_pi, chain_stationary_closed_form(100, 0.51)) < 1e-9);
}

TEST_CASE("stationary distribution invariants") {
  SUBCASE("doubly stochastic gives uniform") {
    Matrix p(3, 3);
    p << 0.2, 0.5, 0.3, 0.5, 0.3, 0.2, 0.3, 0.2, 0.5;
    CHECK(sup_diff(stationary_distribution(p), Vector::Constant(3, 1.0 / 3.0)) < 1e-12);
  }
  SUBCASE("random ergodic chains") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix p = testutil::random_stochastic(2 + trial % 11, 2 + trial % 11, gen);
      const Vector d = stationary_distribution(p);
      CHECK((d.transpose() * p - d.transpose()).cwiseAbs().sum() <= 1e-10);
      CHECK(d.minCoeff() > 0.0);
      CHECK(std::abs(d.sum() - 1.0) < 1e-12);
    }
  }
  SUBCASE("reducible chain raises") {
    CHECK_THROWS_AS(stationary_distribution(Matrix::Identity(3, 3)), ErgodicityViolation);
  }
  SUBCASE("large chain uses power iteration") {
    std::mt19937_64 g(11);
    const Index n = 2100;
    const Matrix p = testutil::random_stochastic(n, n, g);
    Matrix system = p.transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    const Vector direct = system.partialPivLu().solve(rhs);
    const Vector d = stationary_distribution(p);
    CHECK((d - direct).lpNorm<1>() < 1e-10);
  }
}

TEST_CASE("value function") {
  const TabularProblem p = build_chain({});
  const InducedChain c = induce(p.mdp, p.target);
  const Vector v = value_function(c, 0.99);
  CHECK(std::abs(v(0) - 0.21) <= 0.01);
  CHECK(std::abs(v(99) - 99.97) <= 0.01);
  const Vector bellman = c.r + 0.99 * c.p * v;
  CHECK(sup_diff(bellman, v) <= 1e-9);

  InducedChain zero{c.p, Vector::Zero(100)};
  CHECK(value_function(zero, 0.99).cwiseAbs().maxCoeff() == 0.0);
  InducedChain constant{c.p, Vector::Constant(100, 2.0)};
  CHECK(sup_diff(value_function(constant, 0.9), Vector::Constant(100, 20.0)) < 1e-9);
}

TEST_CASE("check_proper") {
  const auto mu = StochasticPolicy::uniform(4, 3);
  CHECK(check_proper(mu, testutil::random_policy(4, 3, 1)));
  StochasticPolicy pi{Matrix::Zero(4, 3)};
  pi.probs.col(2).setOnes();
  StochasticPolicy mu2{Matrix::Zero(4, 3)};
  mu2.probs.col(0).setConstant(0.5);
  mu2.probs.col(1).setConstant(0.5);
  CHECK_FALSE(check_proper(mu2, pi));
  Vector target(3);
  target << 1.0 / 6.0, 1.0 / 3.0, 0.5;
  CHECK(check_proper(StochasticPolicy::state_independent(4, Vector::Constant(3, 1.0 / 3.0)),
                     StochasticPolicy::state_independent(4, target)));
}

TEST_CASE("check_ergodic") {
  CHECK_FALSE(check_ergodic(Matrix::Identity(4, 4)));
  CHECK(check_ergodic(Matrix::Constant(4, 4, 0.25)));
  Matrix flip(2, 2);
  flip << 0, 1, 1, 0;
  CHECK_FALSE(check_ergodic(flip));
  ChainSpec spec;
  spec.n_states = 10;
  const TabularProblem p = build_chain(spec);
  CHECK(check_ergodic(induce(p.mdp, p.behavior)));
  CHECK(check_ergodic(induce(p.mdp, p.target)));
}

TEST_CASE("model validation") {
  FiniteMdp mdp = testutil::random_mdp(3, 2, 1);
  CHECK_NOTHROW(mdp.validate());
  mdp.transition[1](2, 0) += 1e-6;
  CHECK_THROWS_AS(mdp.validate(), InvalidModel);
  mdp = testutil::random_mdp(3, 2, 1);
  mdp.discount = 1.0;
  CHECK_THROWS_AS(mdp.validate(), InvalidModel);
  StochasticPolicy pol{Matrix::Constant(3, 2, 0.5)};
  pol.probs(0, 0) = -0.5;
  pol.probs(0, 1) = 1.5;
  CHECK_THROWS_AS(pol.validate(), InvalidModel);
}

TEST_CASE("MDP and policy JSON round trip") {
  const FiniteMdp mdp = testutil::random_mdp(4, 2, 9);
  const nlohmann::json j = mdp;
  CHECK(j.at("n_states") == 4);
  CHECK(j.at("n_actions") == 2);
  const FiniteMdp back = nlohmann::json::parse(j.dump()).get<FiniteMdp>();
  for (Index a = 0; a < 2; ++a) CHECK(back.transition[a] == mdp.transition[a]);
  CHECK(back.reward == mdp.reward);
  CHECK(back.discount == mdp.discount);
  CHECK(back.initial_dist == mdp.initial_dist);

  const StochasticPolicy pol = testutil::random_policy(4, 2, 2);
  const nlohmann::json jp = pol;
  CHECK(jp.get<StochasticPolicy>().probs == pol.probs);

  nlohmann::json bad = j;
  bad["transition"][0][0][0] = 2.0;
  CHECK_THROWS_AS(bad.get<FiniteMdp>(), InvalidModel);
}

TEST_CASE("Rng streams") {
  Rng a(7), b(7), c(7, 1), d(8);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    differs_stream |= x != c.uniform();
    differs_seed |= x != d.uniform();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
  const double cdf[3] = {0.2, 0.2, 1.0};
  Rng e(1);
  for (int i = 0; i < 1000; ++i) CHECK(e.categorical(cdf) != 1);
}

TEST_CASE("tabular stream") {
  const FiniteMdp mdp = testutil::random_mdp(5, 2, 4);
  const StochasticPolicy mu = testutil::random_policy(5, 2, 5);

  SUBCASE("on-policy ratios are one") {
    TabularStream st(mdp, mu, mu, 1);
    for (int i = 0; i < 1000; ++i) CHECK(st.next().is_ratio == 1.0);
  }
  SUBCASE("same seed, same stream") {
    const StochasticPolicy pi = testutil::random_policy(5, 2, 6);
    TabularStream x(mdp, mu, pi, 3), y(mdp, mu, pi, 3);
    for (int i = 0; i < 1000; ++i) {
      const Transition a = x.next(), b = y.next();
      CHECK(a.state == b.state);
      CHECK(a.action == b.action);
      CHECK(a.next_state == b.next_state);
      CHECK(a.is_ratio == b.is_ratio);
      CHECK(a.reward == b.reward);
    }
  }
  SUBCASE("consecutive transitions chain together") {
    TabularStream st(mdp, mu, mu, 2);
    Transition prev = st.next();
    for (int i = 0; i < 1000; ++i) {
      const Transition t = st.next();
      CHECK(t.state == prev.next_state);
      prev = t;
    }
  }
  SUBCASE("improper target is rejected") {
    StochasticPolicy det{Matrix::Zero(5, 2)};
    det.probs.col(0).setOnes();
    StochasticPolicy pi{Matrix::Zero(5, 2)};
    pi.probs.col(1).setOnes();
    CHECK_THROWS_AS(TabularStream(mdp, det, pi, 0), ImproperSupport);
  }
}

TEST_CASE("chain stream visits states at the stationary rate and ratios average to one") {
  ChainSpec spec;
  spec.n_states = 10;
  const TabularProblem p = build_chain(spec);
  const Vector d = stationary_distribution(induce(p.mdp, p.behavior));
  const std::int64_t n = 1000000;
  const int batches = 50;
  TabularStream st(p.mdp, p.behavior, p.target, 42);
  Matrix frac = Matrix::Zero(batches, 10);
  PerStateBatchMeans ratio(1, n);
  for (std::int64_t t = 0; t < n; ++t) {
    const Transition tr = st.next();
    frac(static_cast<Index>(t * batches / n), tr.state) += 1.0;
    ratio.add(0, tr.is_ratio);
  }
  frac /= static_cast<double>(n / batches);
  for (Index s = 0; s < 10; ++s) {
    const Vector col = frac.col(s);
    const double m = col.mean();
    const double se = std::sqrt((col.array() - m).square().sum() / (batches - 1) / batches);
    CHECK(std::abs(m - d(s)) <= 3.0 * se);
  }
  CHECK(std::abs(ratio.mean()(0) - 1.0) <= 3.0 * ratio.std_error()(0));
}

TEST_CASE("reward noise hook keeps the mean") {
  const FiniteMdp mdp = testutil::random_mdp(3, 2, 8);
  const StochasticPolicy mu = StochasticPolicy::uniform(3, 2);
  StreamOptions opt;
  opt.reward_noise_std = 0.5;
  TabularStream noisy(mdp, mu, mu, 4, opt);
  double sum = 0.0;
  bool any_diff = false;
  for (int i = 0; i < 20000; ++i) {
    const Transition t = noisy.next();
    const double noise = t.reward - mdp.reward(t.state, t.action);
    sum += noise;
    any_diff |= noise != 0.0;
  }
  CHECK(any_diff);
  CHECK(std::abs(sum / 20000.0) < 3.0 * 0.5 / std::sqrt(20000.0));
}

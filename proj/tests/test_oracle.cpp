#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <complex>
#include <deque>
#include <random>

#include "copeval/environments.hpp"
#include "copeval/errors.hpp"
#include "copeval/oracle.hpp"
#include "copeval/projections.hpp"
#include "copeval/stats.hpp"
#include "test_util.hpp"

using namespace copeval;
using testutil::sup_diff;

namespace {

struct Setup {
  FiniteMdp mdp;
  StochasticPolicy mu, pi;
  Matrix p_pi;
  Vector d_mu, d_pi, rho;
};

Setup random_setup(Index n, std::uint64_t seed) {
  Setup s{testutil::random_mdp(n, 2, seed), testutil::random_policy(n, 2, seed + 100),
          testutil::random_policy(n, 2, seed + 200), {}, {}, {}, {}};
  s.p_pi = induce(s.mdp, s.pi).p;
  s.d_mu = stationary_distribution(induce(s.mdp, s.mu));
  s.d_pi = stationary_distribution(s.p_pi);
  s.rho = s.d_pi.cwiseQuotient(s.d_mu);
  return s;
}

Setup chain_setup(Index n) {
  ChainSpec spec;
  spec.n_states = n;
  const TabularProblem p = build_chain(spec);
  Setup s{p.mdp, p.behavior, p.target, induce(p.mdp, p.target).p, {}, {}, {}};
  s.d_mu = stationary_distribution(induce(p.mdp, p.behavior));
  s.d_pi = stationary_distribution(s.p_pi);
  s.rho = s.d_pi.cwiseQuotient(s.d_mu);
  return s;
}

std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m.cast<std::complex<double>>());
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

// Greedy multiset match; returns the worst distance.
double multiset_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
  double worst = 0.0;
  for (const auto& x : a) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < b.size(); ++j) {
      if (std::abs(b[j] - x) < std::abs(b[best] - x)) best = j;
    }
    worst = std::max(worst, std::abs(b[best] - x));
    b.erase(b.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return worst;
}

// Mean dynamics of the projected ratio process in feature space.
Vector iterate_ratio_ode(const FeatureMatrix& phi, const Setup& s, double beta, int iterations, double eta) {
  const Matrix f = phi.matrix();
  const Matrix y = cop_operator(s.d_mu, s.p_pi, beta).y_beta;
  const Matrix m = f.transpose() * s.d_mu.asDiagonal() * (y * f - f);
  const Vector w = f.transpose() * s.d_mu;
  Vector theta = Vector::Ones(f.cols()) / w.sum();
  for (int i = 0; i < iterations; ++i) theta = project_weighted_simplex(theta + eta * m * theta, w);
  return theta;
}

}  // namespace

TEST_CASE("covariate shift") {
  const Setup r = random_setup(6, 1);
  CHECK(std::abs(r.d_mu.dot(r.rho) - 1.0) < 1e-12);
  CHECK(sup_diff(covariate_shift(r.d_pi, r.d_mu), r.rho) < 1e-12);
  CHECK(sup_diff(covariate_shift(r.d_mu, r.d_mu), Vector::Ones(6)) == 0.0);

  // Chain: rho(s) proportional to ((0.5 + eps) / (0.5 - eps))^(2s).
  const Setup c = chain_setup(100);
  const Vector rho = covariate_shift(c.d_pi, c.d_mu);
  const double q = std::log(0.51 / 0.49);
  for (Index s = 0; s < 100; ++s) CHECK(std::abs(std::log(rho(s) / rho(0)) - 2.0 * q * s) < 1e-9);
  CHECK_THROWS_AS(covariate_shift(c.d_pi, Vector::Zero(100)), ErgodicityViolation);
}

TEST_CASE("projected fixed points on the chain") {
  const Setup c = chain_setup(100);
  const InducedChain chain = induce(c.mdp, c.pi);
  const FeatureMatrix one = FeatureMatrix::constant(100);
  const double th_mu = lfa_fixed_point(one, c.d_mu, chain, 0.99)(0);
  const double th_pi = lfa_fixed_point(one, c.d_pi, chain, 0.99)(0);
  CHECK(std::abs(th_mu - 11.92) <= 0.01);
  CHECK(std::abs(th_pi - 88.08) <= 0.01);
  // (88.08 - 11.92)^2 under a constant feature.
  CHECK(std::abs(error_metric(Vector::Constant(1, 11.92), Vector::Constant(1, 88.08), one, c.d_pi) - 5800.3) <= 0.2);

  const Vector tab = lfa_fixed_point(FeatureMatrix::identity(100), c.d_mu, chain, 0.99);
  CHECK(sup_diff(tab, value_function(chain, 0.99)) < 1e-9);
}

TEST_CASE("lfa fixed point residual and basis invariance of the error metric") {
  const Setup r = random_setup(8, 2);
  const InducedChain chain = induce(r.mdp, r.pi);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g;
  RowMatrix f(8, 3);
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 3; ++j) f(i, j) = g(gen);
  }
  const FeatureMatrix phi(f);
  const Vector theta = lfa_fixed_point(phi, r.d_mu, chain, 0.9);
  const Matrix a = f.transpose() * r.d_mu.asDiagonal() * (Matrix(f) - 0.9 * chain.p * f);
  const Vector b = f.transpose() * r.d_mu.asDiagonal() * chain.r;
  CHECK((a * theta - b).cwiseAbs().maxCoeff() <= 1e-9);

  Matrix m(3, 3);
  m << 2, 1, 0, 0, 1, 3, 1, 0, 1;
  const FeatureMatrix phi_m(RowMatrix(f * m));
  const Vector th_hat{{0.3, -1.0, 2.0}};
  const double e1 = error_metric(th_hat, theta, phi, r.d_pi);
  const double e2 = error_metric(m.inverse() * th_hat, m.inverse() * theta, phi_m, r.d_pi);
  CHECK(std::abs(e1 - e2) <= 1e-9);
  CHECK(error_metric(theta, theta, phi, r.d_pi) == 0.0);
  const Vector v1 = Vector::LinSpaced(8, 0.0, 1.0), v2 = Vector::LinSpaced(8, 1.0, 3.0);
  CHECK(std::abs(error_metric(v1, v2, FeatureMatrix::identity(8), r.d_pi) - r.d_pi.dot((v1 - v2).cwiseAbs2())) < 1e-14);

  RowMatrix dup(8, 2);
  dup.col(0).setOnes();
  dup.col(1).setConstant(2.0);
  CHECK_THROWS_AS((FeatureMatrix(dup)), DegenerateProjection);
}

TEST_CASE("COP operator identities") {
  const Setup r = random_setup(5, 4);
  for (double beta : {0.0, 0.3, 0.7, 0.95}) {
    const CopOperator y = cop_operator(r.d_mu, r.p_pi, beta);
    CHECK((y.apply(r.rho) - r.rho).cwiseAbs().maxCoeff() <= 1e-10);
    const Matrix similar = (r.d_mu.asDiagonal() * y.y_beta * r.d_mu.cwiseInverse().asDiagonal()).transpose();
    CHECK(similar.minCoeff() >= -1e-14);
    CHECK((similar.rowwise().sum() - Vector::Ones(5)).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Matrix y0 = cop_operator(r.d_mu, r.p_pi, 0.0).y_beta;
  const Matrix expected = r.d_mu.cwiseInverse().asDiagonal() * r.p_pi.transpose() * r.d_mu.asDiagonal();
  CHECK((y0 - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(cop_operator(r.d_mu, r.p_pi, 1.0), InvalidArgument);
}

TEST_CASE("COP operator spectrum is the mapped target spectrum") {
  const Setup r = random_setup(5, 5);
  const auto xi = eigenvalues(r.p_pi);
  for (double beta : {0.0, 0.3, 0.7}) {
    std::vector<std::complex<double>> mapped;
    for (const auto& x : xi) mapped.push_back((1.0 - beta) * x / (1.0 - beta * x));
    CHECK(multiset_distance(eigenvalues(cop_operator(r.d_mu, r.p_pi, beta).y_beta), mapped) <= 1e-8);
  }
}

TEST_CASE("contraction modulus") {
  const Setup r = random_setup(4, 6);
  auto brute = [&](double beta) {
    // Largest non-unit eigenvalue modulus of Y^beta itself.
    auto ev = eigenvalues(cop_operator(r.d_mu, r.p_pi, beta).y_beta);
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a - 1.0) < std::abs(b - 1.0); });
    double m = 0.0;
    for (std::size_t i = 1; i < ev.size(); ++i) m = std::max(m, std::abs(ev[i]));
    return m;
  };
  for (double beta : {0.0, 0.4, 0.8}) CHECK(std::abs(contraction_modulus(r.p_pi, beta) - brute(beta)) < 1e-9);

  auto ev = eigenvalues(r.p_pi);
  std::vector<double> mags;
  for (const auto& e : ev) mags.push_back(std::abs(e));
  std::sort(mags.rbegin(), mags.rend());
  CHECK(std::abs(contraction_modulus(r.p_pi, 0.0) - mags[1]) < 1e-9);
  CHECK(contraction_modulus(r.p_pi, 0.999) < 0.01 / (1.0 - mags[1]));

  const Setup c = chain_setup(100);
  const double m0 = contraction_modulus(c.p_pi, 0.0), m5 = contraction_modulus(c.p_pi, 0.5),
               m9 = contraction_modulus(c.p_pi, 0.9);
  CHECK(m0 > m5);
  CHECK(m5 > m9);
  CHECK_THROWS_AS(contraction_modulus(Matrix::Identity(3, 3), 0.0), ErgodicityViolation);
}

TEST_CASE("COP operator iterates converge to the ratio") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Setup r = random_setup(3 + trial, 20 + trial);
    for (double beta : {0.0, 0.3, 0.7}) {
      if (contraction_modulus(r.p_pi, beta) > 0.95) continue;
      const Matrix y = cop_operator(r.d_mu, r.p_pi, beta).y_beta;
      Vector x(r.rho.size());
      for (Index i = 0; i < x.size(); ++i) x(i) = u(gen);
      x /= r.d_mu.dot(x);
      for (int t = 0; t < 200; ++t) x = y * x;
      CHECK(sup_diff(x, r.rho) < 1e-6);
    }
  }
}

TEST_CASE("emphatic weights") {
  const Setup r = random_setup(5, 8);
  CHECK(sup_diff(emphatic_weights(r.d_mu, r.p_pi, 0.0), r.d_mu) < 1e-15);
  const double beta = 0.9999;
  const Vector scaled = (1.0 - beta) * emphatic_weights(r.d_mu, r.p_pi, beta);
  CHECK(((scaled - r.d_pi).cwiseAbs().array() / r.d_pi.array()).maxCoeff() < 1e-2);
}

TEST_CASE("emphatic weights match the simulated follower") {
  const Setup r = random_setup(5, 9);
  const double beta = 0.5;
  const Vector expected = emphatic_weights(r.d_mu, r.p_pi, beta).cwiseQuotient(r.d_mu);
  const std::int64_t n = 1000000;
  TabularStream st(r.mdp, r.mu, r.pi, 11);
  PerStateBatchMeans acc(5, n);
  double follower = 1.0, prev_rho = 0.0;
  for (std::int64_t t = 0; t < n; ++t) {
    const Transition tr = st.next();
    follower = t == 0 ? 1.0 : beta * prev_rho * follower + 1.0;
    acc.add(tr.state, follower);
    prev_rho = tr.is_ratio;
  }
  const Vector m = acc.mean(), se = acc.std_error();
  for (Index s = 0; s < 5; ++s) CHECK(std::abs(m(s) - expected(s)) <= 3.0 * se(s));
}

TEST_CASE("second moments of the IS product") {
  SUBCASE("on-policy moments are one") {
    const Setup r = random_setup(5, 10);
    for (int n = 0; n <= 4; ++n) {
      for (Index s = 0; s < 5; ++s) CHECK(gamma_second_moment(r.mdp, r.mu, r.mu, n, s) == 1.0);
    }
  }
  SUBCASE("Monte Carlo agreement") {
    const Setup r = random_setup(5, 12);
    const std::int64_t samples = 400000;
    TabularStream st(r.mdp, r.mu, r.pi, 13);
    std::vector<PerStateBatchMeans> acc;
    for (int n = 1; n <= 3; ++n) acc.emplace_back(5, samples);
    std::deque<double> last;
    for (std::int64_t t = 0; t < samples; ++t) {
      const Transition tr = st.next();
      double product = 1.0;
      for (int n = 1; n <= 3; ++n) {
        if (static_cast<int>(last.size()) >= n) {
          product *= last[last.size() - static_cast<std::size_t>(n)];
          acc[n - 1].add(tr.state, product * product);
        } else {
          acc[n - 1].skip();
        }
      }
      last.push_back(tr.is_ratio);
      if (last.size() > 3) last.pop_front();
    }
    for (int n = 1; n <= 3; ++n) {
      const Vector m = acc[n - 1].mean(), se = acc[n - 1].std_error();
      for (Index s = 0; s < 5; ++s) {
        CHECK(std::abs(gamma_second_moment(r.mdp, r.mu, r.pi, n, s) - m(s)) <= 3.0 * se(s));
      }
    }
  }
  SUBCASE("improper support raises") {
    FiniteMdp mdp = testutil::random_mdp(3, 2, 1);
    StochasticPolicy mu{Matrix::Zero(3, 2)};
    mu.probs.col(0).setOnes();
    CHECK_THROWS_AS(gamma_second_moment(mdp, mu, StochasticPolicy::uniform(3, 2), 1, 0), ImproperSupport);
  }
}

TEST_CASE("variance weights") {
  CHECK(sup_diff(inverse_variance_weights(Vector::Constant(4, 2.0), 4), Vector::Constant(4, 0.25)) < 1e-15);
  const Vector w = inverse_variance_weights(Vector{{1.0, 2.0, 4.0, 8.0}}, 4);
  const Vector e = Vector{{1.0, 0.5, 0.25, 0.125}} / 1.875;
  CHECK(sup_diff(w, e) < 1e-15);
  CHECK(inverse_variance_weights(Vector{{1.0, 2.0, 4.0, 8.0}}, 2).size() == 2);
  CHECK(sup_diff(inverse_variance_weights(Vector::Zero(3), 3), Vector{{1.0, 0.0, 0.0}}) == 0.0);

  // Chain horizons 1..5 from the moment formula; brute-force normalization here.
  const Setup c = chain_setup(10);
  Vector second(5);
  for (int n = 1; n <= 5; ++n) second(n - 1) = gamma_second_moment(c.mdp, c.mu, c.pi, n, 9);
  Vector brute(5);
  for (int i = 0; i < 5; ++i) brute(i) = 1.0 / std::max(second(i) - 1.0, 1e-12);
  brute /= brute.sum();
  CHECK(sup_diff(variance_weights(second, 1.0, 5), brute) < 1e-14);
}

TEST_CASE("feature COP fixed point") {
  SUBCASE("tabular features return the true ratio") {
    const Setup r = random_setup(6, 14);
    for (double beta : {0.0, 0.5}) {
      const CopFixedPoint fp = cop_fa_fixed_point(FeatureMatrix::identity(6), r.d_mu, r.p_pi, beta);
      CHECK(sup_diff(fp.ratio, r.rho) < 1e-9);
      CHECK(fp.null_dimension == 1);
      CHECK_FALSE(fp.on_boundary);
    }
  }
  SUBCASE("constant feature gives one") {
    const Setup r = random_setup(6, 15);
    const CopFixedPoint fp = cop_fa_fixed_point(FeatureMatrix::constant(6), r.d_mu, r.p_pi, 0.3);
    CHECK(sup_diff(fp.ratio, Vector::Ones(6)) < 1e-12);
  }
  SUBCASE("linear chain features agree with the mean ratio dynamics") {
    for (Index n : {30, 100}) {
      const Setup c = chain_setup(n);
      const FeatureMatrix phi = chain_linear_features(n);
      const CopFixedPoint fp = cop_fa_fixed_point(phi, c.d_mu, c.p_pi, 0.0);
      const Vector ode = iterate_ratio_ode(phi, c, 0.0, 200000, 5.0);
      CHECK(sup_diff(fp.theta_rho, ode) < 1e-6 * ode.cwiseAbs().maxCoeff());
      CHECK(std::abs((phi.matrix().transpose() * c.d_mu).dot(fp.theta_rho) - 1.0) < 1e-12);
      CHECK(fp.on_boundary == (n == 100));
    }
  }
  SUBCASE("negative features are rejected") {
    const Setup r = random_setup(4, 16);
    RowMatrix f(4, 2);
    f << 1, 0.5, 1, -0.5, 1, 0.2, 1, 0.1;
    CHECK_THROWS_AS(cop_fa_fixed_point(FeatureMatrix(f), r.d_mu, r.p_pi, 0.0), NonnegativityViolation);
  }
}

TEST_CASE("corollary bound") {
  const Setup c = chain_setup(30);
  const InducedChain chain = induce(c.mdp, c.pi);
  const FeatureMatrix phi = chain_linear_features(30);
  const Vector theta_star = lfa_fixed_point(phi, c.d_pi, chain, 0.99);
  const double r_max = c.mdp.reward.cwiseAbs().maxCoeff();
  CHECK(corollary_bound(phi, c.d_pi, c.p_pi, 0.99, r_max, theta_star, 0.0) == 0.0);
  const double b1 = corollary_bound(phi, c.d_pi, c.p_pi, 0.99, r_max, theta_star, 0.1);
  CHECK(std::abs(corollary_bound(phi, c.d_pi, c.p_pi, 0.99, r_max, theta_star, 0.2) - 2.0 * b1) < 1e-12 * b1);

  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double eps = 0.1;
  Vector tilde(30);
  for (Index s = 0; s < 30; ++s) tilde(s) = c.rho(s) * (1.0 + eps * u(gen));
  const Vector theta_cop = lfa_fixed_point(phi, c.d_mu.cwiseProduct(tilde), chain, 0.99);
  const double realized = (theta_star - theta_cop).cwiseAbs().maxCoeff();
  CHECK(realized <= corollary_bound(phi, c.d_pi, c.p_pi, 0.99, r_max, theta_cop, eps));
  CHECK(realized > 0.0);
}

TEST_CASE("Monte Carlo ratio unbiasedness") {
  SUBCASE("horizon zero returns the estimate") {
    const Setup r = random_setup(4, 18);
    const StateMoments m = mc_ratio_unbiasedness(r.mdp, r.mu, r.pi, r.rho, 0, 20000, 1);
    CHECK(sup_diff(m.mean, r.rho) < 1e-12);
  }
  SUBCASE("two-state closed form with a unit estimate") {
    const Setup r = random_setup(2, 19);
    const StateMoments m = mc_ratio_unbiasedness(r.mdp, r.mu, r.pi, Vector::Ones(2), 1, 400000, 2);
    const Vector expected = (r.d_mu.transpose() * r.p_pi).transpose().cwiseQuotient(r.d_mu);
    for (Index s = 0; s < 2; ++s) {
      REQUIRE(m.sufficient[s]);
      CHECK(std::abs(m.mean(s) - expected(s)) <= 3.0 * m.std_error(s));
    }
  }
  SUBCASE("true ratio is a fixed point in expectation") {
    const Setup r = random_setup(5, 20);
    for (int n = 1; n <= 3; ++n) {
      const StateMoments m = mc_ratio_unbiasedness(r.mdp, r.mu, r.pi, r.rho, n, 200000, 3 + n);
      for (Index s = 0; s < 5; ++s) CHECK(std::abs(m.mean(s) - r.rho(s)) <= 3.0 * m.std_error(s));
    }
  }
}

#include "copeval/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <deque>
#include <limits>

#include "copeval/errors.hpp"
#include "copeval/stats.hpp"

namespace copeval {
namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("beta must lie in [0, 1)");
}

void check_square(const Matrix& p, Index n, const char* what) {
  if (p.rows() != n || p.cols() != n) throw InvalidArgument(std::string(what) + ": dimension mismatch");
}

double induced_inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace

Vector covariate_shift(const Vector& d_target, const Vector& d_behavior) {
  if (d_target.size() != d_behavior.size()) throw InvalidArgument("covariate_shift: dimension mismatch");
  if ((d_behavior.array() <= 0.0).any()) throw ErgodicityViolation("behavior stationary distribution has a zero entry");
  return d_target.cwiseQuotient(d_behavior);
}

Vector lfa_fixed_point(const FeatureMatrix& phi, const Vector& weighting, const InducedChain& chain,
                       double discount) {
  const Index n = phi.n_states();
  if (weighting.size() != n || chain.p.rows() != n || chain.r.size() != n) {
    throw InvalidArgument("lfa_fixed_point: dimension mismatch");
  }
  const Matrix& p = chain.p;
  const RowMatrix& f = phi.matrix();
  const Matrix weighted = weighting.asDiagonal() * f;
  const Matrix a = weighted.transpose() * (f - discount * (p * f));
  const Vector b = weighted.transpose() * chain.r;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw DegenerateProjection("projected Bellman system is singular");
  return lu.solve(b);
}

CopOperator cop_operator(const Vector& d_behavior, const Matrix& p_target, double beta) {
  check_beta(beta);
  const Index n = d_behavior.size();
  check_square(p_target, n, "cop_operator");
  if ((d_behavior.array() <= 0.0).any()) throw ErgodicityViolation("behavior stationary distribution has a zero entry");
  const Matrix pt = p_target.transpose();
  const Matrix resolvent = (Matrix::Identity(n, n) - beta * pt).partialPivLu().solve(Matrix(d_behavior.asDiagonal()));
  Matrix y = (1.0 - beta) * (d_behavior.cwiseInverse().asDiagonal() * (pt * resolvent));
  return {std::move(y), beta};
}

double contraction_modulus(const Matrix& p_target, double beta) {
  check_beta(beta);
  if (p_target.rows() != p_target.cols()) throw InvalidArgument("contraction_modulus: matrix must be square");
  if (!check_ergodic(p_target)) throw ErgodicityViolation("target chain is not ergodic");
  const Eigen::EigenSolver<Matrix> es(p_target, false);
  const Eigen::VectorXcd xi = es.eigenvalues();
  Index perron = 0;
  double closest = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < xi.size(); ++i) {
    const double dist = std::abs(xi(i) - 1.0);
    if (dist < closest) {
      closest = dist;
      perron = i;
    }
  }
  double modulus = 0.0;
  for (Index i = 0; i < xi.size(); ++i) {
    if (i == perron) continue;
    modulus = std::max(modulus, (1.0 - beta) * std::abs(xi(i)) / std::abs(1.0 - beta * xi(i)));
  }
  return modulus;
}

Vector emphatic_weights(const Vector& d_behavior, const Matrix& p_target, double beta) {
  check_beta(beta);
  const Index n = d_behavior.size();
  check_square(p_target, n, "emphatic_weights");
  return (Matrix::Identity(n, n) - beta * p_target.transpose()).partialPivLu().solve(d_behavior);
}

Matrix second_moment_kernel(const FiniteMdp& mdp, const StochasticPolicy& behavior, const StochasticPolicy& target) {
  if (!check_proper(behavior, target)) throw ImproperSupport("target policy is not covered by the behavior policy");
  const Index n = mdp.n_states();
  Matrix kernel = Matrix::Zero(n, n);
  for (Index a = 0; a < mdp.n_actions(); ++a) {
    Vector weight = Vector::Zero(n);
    for (Index s = 0; s < n; ++s) {
      const double mu = behavior(s, a);
      if (mu > 0.0) weight(s) = target(s, a) * target(s, a) / mu;
    }
    kernel += weight.asDiagonal() * mdp.transition[static_cast<std::size_t>(a)];
  }
  return kernel;
}

Vector estimator_second_moments(const FiniteMdp& mdp, const StochasticPolicy& behavior,
                                const StochasticPolicy& target, const Vector& u, int horizon) {
  if (horizon < 0) throw InvalidArgument("horizon must be nonnegative");
  if (u.size() != mdp.n_states()) throw InvalidArgument("estimator_second_moments: dimension mismatch");
  const Matrix kernel = second_moment_kernel(mdp, behavior, target);
  const Vector d_mu = stationary_distribution(induce(mdp, behavior));
  Vector row = d_mu.cwiseProduct(u.cwiseAbs2());
  for (int i = 0; i < horizon; ++i) row = kernel.transpose() * row;
  return row.cwiseQuotient(d_mu);
}

double gamma_second_moment(const FiniteMdp& mdp, const StochasticPolicy& behavior, const StochasticPolicy& target,
                           int horizon, Index state) {
  if (state < 0 || state >= mdp.n_states()) throw InvalidArgument("gamma_second_moment: state out of range");
  if (!check_proper(behavior, target)) throw ImproperSupport("target policy is not covered by the behavior policy");
  if (horizon < 0) throw InvalidArgument("horizon must be nonnegative");
  // Every ratio is 1 when the policies agree on the behavior support, so the product is too.
  bool unit_ratios = true;
  for (Index s = 0; s < mdp.n_states() && unit_ratios; ++s) {
    for (Index a = 0; a < mdp.n_actions(); ++a) {
      if (behavior(s, a) > 0.0 && target(s, a) != behavior(s, a)) unit_ratios = false;
    }
  }
  if (unit_ratios) return 1.0;
  return estimator_second_moments(mdp, behavior, target, Vector::Ones(mdp.n_states()), horizon)(state);
}

Vector inverse_variance_weights(const Vector& variances, Index max_n) {
  const Index n = std::min<Index>(max_n, variances.size());
  if (n <= 0) throw InvalidArgument("variance_weights: no horizons");
  Vector w = Vector::Zero(n);
  if ((variances.head(n).array() <= 0.0).all()) {
    w(0) = 1.0;
    return w;
  }
  for (Index i = 0; i < n; ++i) w(i) = 1.0 / std::max(variances(i), 1e-12);
  return w / w.sum();
}

Vector variance_weights(const Vector& second_moments, double mean, Index max_n) {
  return inverse_variance_weights(second_moments.array() - mean * mean, max_n);
}

CopFixedPoint cop_fa_fixed_point(const FeatureMatrix& phi_rho, const Vector& d_behavior, const Matrix& p_target,
                                 double beta) {
  if (!phi_rho.nonnegative()) throw NonnegativityViolation("ratio features must be entrywise nonnegative");
  const Index n = phi_rho.n_states();
  const Index k = phi_rho.n_features();
  if (d_behavior.size() != n) throw InvalidArgument("cop_fa_fixed_point: dimension mismatch");
  const Matrix phi = phi_rho.matrix();
  const CopOperator y = cop_operator(d_behavior, p_target, beta);
  const Matrix weighted = d_behavior.asDiagonal() * phi;
  const Matrix a = weighted.transpose() * (y.y_beta * phi - phi);
  const Vector w = weighted.transpose() * Vector::Ones(n);

  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  // Relative to the Gram scale Phi^T D Phi: A itself vanishes for one constant feature.
  const double gram = (weighted.transpose() * phi).norm();
  const double cutoff = 1e-9 * std::max({sv(0), gram, std::numeric_limits<double>::min()});
  Index null_dim = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cutoff) ++null_dim;
  }
  if (null_dim != 1) throw AmbiguousFixedPoint("ratio fixed point is not unique", null_dim);

  CopFixedPoint out;
  out.null_dimension = null_dim;
  Vector theta = svd.matrixV().col(k - 1);
  const double scale = w.dot(theta);
  if (std::abs(scale) < 1e-300) throw DegenerateProjection("null vector is orthogonal to the normalization");
  theta /= scale;

  const double tol = 1e-10 * theta.cwiseAbs().maxCoeff();
  if ((theta.array() >= -tol).all()) {
    out.theta_rho = theta.cwiseMax(0.0);
    out.ratio = phi * out.theta_rho;
    return out;
  }

  // Stationary point of theta' = Proj_tangent(A theta) on {theta >= 0, w^T theta = 1}:
  // A theta = c w - nu, nu >= 0 on the zero set, theta >= 0 on the free set.
  if (k > 20) throw DegenerateProjection("too many ratio features for active-set enumeration");
  const std::uint32_t full = (1u << k) - 1u;
  std::vector<std::uint32_t> masks;
  for (std::uint32_t z = 0; z < full; ++z) masks.push_back(z);
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t x, std::uint32_t y) { return std::popcount(x) < std::popcount(y); });
  for (std::uint32_t zero_mask : masks) {
    std::vector<Index> free_set, zero_set;
    for (Index i = 0; i < k; ++i) ((zero_mask >> i) & 1u ? zero_set : free_set).push_back(i);
    const auto m = static_cast<Index>(free_set.size());
    Matrix kkt = Matrix::Zero(m + 1, m + 1);
    kkt.topLeftCorner(m, m) = a(free_set, free_set);
    kkt.topRightCorner(m, 1) = -w(free_set);
    kkt.bottomLeftCorner(1, m) = w(free_set).transpose();
    Vector rhs = Vector::Zero(m + 1);
    rhs(m) = 1.0;
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    Vector candidate = Vector::Zero(k);
    candidate(free_set) = sol.head(m);
    const double c = sol(m);
    const double ctol = 1e-10 * std::max(1.0, candidate.cwiseAbs().maxCoeff());
    if ((sol.head(m).array() < -ctol).any()) continue;
    const Vector residual = a * candidate;
    bool dual_ok = true;
    for (Index i : zero_set) {
      if (c * w(i) - residual(i) < -1e-12 * std::max(1.0, residual.cwiseAbs().maxCoeff())) dual_ok = false;
    }
    if (!dual_ok) continue;
    out.theta_rho = candidate.cwiseMax(0.0);
    out.ratio = phi * out.theta_rho;
    out.on_boundary = true;
    return out;
  }
  throw DegenerateProjection("no stationary point of the projected ratio dynamics was found");
}

double corollary_bound(const FeatureMatrix& phi, const Vector& d_target, const Matrix& p_target, double discount,
                       double r_max, const Vector& theta_cop, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InvalidArgument("corollary_bound: epsilon must lie in [0, 1)");
  const Index n = phi.n_states();
  if (d_target.size() != n || theta_cop.size() != phi.n_features()) {
    throw InvalidArgument("corollary_bound: dimension mismatch");
  }
  check_square(p_target, n, "corollary_bound");
  const Matrix f = phi.matrix();
  const Matrix a = f.transpose() * d_target.asDiagonal() * (f - discount * (p_target * f));
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw DegenerateProjection("A_pi is singular");
  const Matrix gain = lu.solve(Matrix(f.transpose()));
  return eps * induced_inf_norm(gain) *
         (r_max + (1.0 + discount) * induced_inf_norm(f) * theta_cop.cwiseAbs().maxCoeff());
}

double error_metric(const Vector& theta_hat, const Vector& theta_star, const FeatureMatrix& phi, const Vector& d_target) {
  if (theta_hat.size() != phi.n_features() || theta_star.size() != phi.n_features() || d_target.size() != phi.n_states()) {
    throw InvalidArgument("error_metric: dimension mismatch");
  }
  const Vector diff = phi.matrix() * (theta_star - theta_hat);
  return d_target.dot(diff.cwiseAbs2());
}

StateMoments mc_ratio_unbiasedness(const FiniteMdp& mdp, const StochasticPolicy& behavior,
                                   const StochasticPolicy& target, const Vector& ratio_estimate, int horizon,
                                   std::int64_t samples, std::uint64_t seed) {
  if (horizon < 0) throw InvalidArgument("horizon must be nonnegative");
  if (ratio_estimate.size() != mdp.n_states()) throw InvalidArgument("ratio estimate has wrong length");
  TabularStream stream(mdp, behavior, target, seed);
  PerStateBatchMeans acc(mdp.n_states(), samples);
  // history holds (state, rho) of the last `horizon` transitions, oldest first.
  std::deque<Transition> history;
  for (std::int64_t t = 0; t < samples; ++t) {
    const Transition tr = stream.next();
    if (static_cast<int>(history.size()) == horizon) {
      double product = 1.0;
      for (const auto& h : history) product *= h.is_ratio;
      const Index origin = horizon == 0 ? tr.state : history.front().state;
      acc.add(tr.state, ratio_estimate(origin) * product);
    } else {
      acc.skip();
    }
    history.push_back(tr);
    if (static_cast<int>(history.size()) > horizon) history.pop_front();
  }
  StateMoments out{acc.mean(), acc.std_error(), acc.visits(), {}};
  const auto populated = acc.populated_batches();
  for (Index s = 0; s < mdp.n_states(); ++s) {
    out.sufficient.push_back(populated[static_cast<std::size_t>(s)] >= 10 && out.visits[static_cast<std::size_t>(s)] >= 100);
  }
  return out;
}

}  // namespace copeval

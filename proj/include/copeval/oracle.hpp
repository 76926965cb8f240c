#pragma once

#include <cstdint>
#include <vector>

#include "copeval/features.hpp"
#include "copeval/mdp.hpp"
#include "copeval/types.hpp"

namespace copeval {

/// rho_d(s) = d_target(s) / d_behavior(s).
Vector covariate_shift(const Vector& d_target, const Vector& d_behavior);

/// Solves Phi^T D (I - gamma P) Phi theta = Phi^T D R, the fixed point of the
/// d-weighted projected Bellman operator restricted to span(Phi).
Vector lfa_fixed_point(const FeatureMatrix& phi, const Vector& weighting, const InducedChain& chain,
                       double discount);

struct CopOperator {
  Matrix y_beta;
  double beta = 0.0;

  Vector apply(const Vector& u) const { return y_beta * u; }
};

/// Y^beta = (1 - beta) D^-1 P^T (I - beta P^T)^-1 D with D = diag(d_behavior).
CopOperator cop_operator(const Vector& d_behavior, const Matrix& p_target, double beta);

/// max over the non-Perron eigenvalues xi of P of (1 - beta)|xi| / |1 - beta xi|.
double contraction_modulus(const Matrix& p_target, double beta);

/// f = (I - beta P^T)^-1 d_behavior.
Vector emphatic_weights(const Vector& d_behavior, const Matrix& p_target, double beta);

/// P~(s, s') = sum_a pi(a|s)^2 / mu(a|s) P(s'|s, a).
Matrix second_moment_kernel(const FiniteMdp& mdp, const StochasticPolicy& behavior, const StochasticPolicy& target);

/// E[(u(s_{t-n}) Gamma_t^n)^2 | s_t] for every s_t, i.e. ((d_mu o u^2)^T P~^n)_s / d_mu(s).
Vector estimator_second_moments(const FiniteMdp& mdp, const StochasticPolicy& behavior,
                                const StochasticPolicy& target, const Vector& u, int horizon);

/// E[(Gamma_t^n)^2 | s_t = state]. Throws ImproperSupport.
double gamma_second_moment(const FiniteMdp& mdp, const StochasticPolicy& behavior, const StochasticPolicy& target,
                           int horizon, Index state);

/// Normalized inverse-variance weights over the first max_n horizons.
/// Variances are floored at 1e-12; if none is positive the result is a point mass on the first horizon.
Vector inverse_variance_weights(const Vector& variances, Index max_n);

/// As above with variance_n = second_moments(n) - mean^2.
Vector variance_weights(const Vector& second_moments, double mean, Index max_n);

struct CopFixedPoint {
  Vector theta_rho;
  /// rho_d^COP = Phi_rho theta_rho.
  Vector ratio;
  Index null_dimension = 0;
  /// True when the null-space solution leaves the nonnegative orthant and the
  /// simplex-constrained stationary point was returned instead.
  bool on_boundary = false;
};

/// Limit of the feature-based ratio process. The null space of
/// Phi^T D_mu (Y^beta - I) Phi (equal to Phi^T (P^T - I) D_mu Phi at beta = 0)
/// is extracted by SVD (threshold 1e-9 relative to the Gram matrix) and normalized so that
/// sum_s d_mu(s) rho(s) = 1. If that vector has a negative weight, the
/// stationary point of the projected dynamics on {theta >= 0, E_mu[phi]^T theta = 1}
/// is found by active-set enumeration.
/// Throws NonnegativityViolation, AmbiguousFixedPoint (null dimension != 1).
CopFixedPoint cop_fa_fixed_point(const FeatureMatrix& phi_rho, const Vector& d_behavior, const Matrix& p_target,
                                 double beta);

/// eps ||A^-1 Phi^T||_inf (R_max + (1 + gamma) ||Phi||_inf ||theta_cop||_inf), A = Phi^T D_pi (I - gamma P) Phi.
double corollary_bound(const FeatureMatrix& phi, const Vector& d_target, const Matrix& p_target, double discount,
                       double r_max, const Vector& theta_cop, double eps);

/// sum_s d(s) [(theta_star - theta_hat)^T phi(s)]^2.
double error_metric(const Vector& theta_hat, const Vector& theta_star, const FeatureMatrix& phi, const Vector& d_target);

struct StateMoments {
  Vector mean;
  Vector std_error;
  std::vector<std::int64_t> visits;
  /// False where the state had too few visits for a batch-means error.
  std::vector<bool> sufficient;
};

/// Monte Carlo conditional means of rho_hat(s_{t-n}) Gamma_t^n given s_t over a
/// behavior stream of `samples` steps. Standard errors use 50 batch means.
StateMoments mc_ratio_unbiasedness(const FiniteMdp& mdp, const StochasticPolicy& behavior,
                                   const StochasticPolicy& target, const Vector& ratio_estimate, int horizon,
                                   std::int64_t samples, std::uint64_t seed);

}  // namespace copeval

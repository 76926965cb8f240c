#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "copeval/features.hpp"
#include "copeval/mdp.hpp"
#include "copeval/schedule.hpp"
#include "copeval/types.hpp"

namespace copeval {

enum class Algorithm { td, off_policy_td, full_is_td, etd, cop_td_tabular, cop_td, log_cop_td, gtd };

std::string to_string(Algorithm a);
/// Throws ConfigError for unknown names.
Algorithm parse_algorithm(const std::string& name);
bool learns_ratio(Algorithm a);

enum class LogCopVariant { verbatim, standard };

struct LearnerConfig {
  double lambda = 0.0;
  double beta = 0.0;
  double gamma_log = 1.0;
  double discount = 0.99;
  StepSchedule step_value = StepSchedule::constant(0.05);
  /// Ratio step for COP variants, secondary step for GTD.
  StepSchedule step_ratio = StepSchedule::constant(0.5);

  /// COP-TD / Log-COP-TD trace uses phi(s_t) instead of the printed phi(s_{t+1}).
  bool trace_on_current_state = true;
  LogCopVariant log_variant = LogCopVariant::verbatim;
  /// ETD follower F = beta rho F + (1 - beta) instead of + 1.
  bool etd_normalized = false;
  /// Clamp log rho into [-log_clamp, log_clamp]; with floor_log off a
  /// nonpositive rho raises LogDomainError.
  double log_clamp = 30.0;
  bool floor_log = true;
  double is_product_ceiling = 1e12;
  /// Ratio estimate held fixed at its initial (or injected) value.
  bool freeze_ratio = false;

  std::optional<Vector> theta0;
  std::optional<Vector> theta_rho0;

  /// Throws ConfigError; also enforces the two-timescale ordering between
  /// step_value and step_ratio when both decay.
  void validate() const;
};

void to_json(nlohmann::json& j, const LearnerConfig& c);
void from_json(const nlohmann::json& j, LearnerConfig& c);

/// Streaming policy-evaluation learner. observe() advances one transition.
class Learner {
 public:
  Learner(Algorithm algorithm, LearnerConfig config, FeatureMatrix phi);
  virtual ~Learner() = default;

  /// Throws NumericalDivergence carrying the 0-based step index.
  void observe(const Transition& tr);

  Algorithm algorithm() const { return algorithm_; }
  const LearnerConfig& config() const { return config_; }
  const FeatureMatrix& features() const { return phi_; }
  const Vector& value_weights() const { return theta_; }
  std::int64_t steps() const { return steps_; }

  virtual bool has_ratio() const { return false; }
  /// Current estimate of d_pi(s) / d_mu(s). Throws InvalidArgument for non-ratio learners.
  virtual double ratio_estimate(Index s) const;
  Vector ratio_estimates() const;

  virtual nlohmann::json snapshot() const;
  virtual void restore(const nlohmann::json& j);

 protected:
  virtual void step(const Transition& tr) = 0;
  virtual void reset_episode() {}

  double td_error(const Transition& tr) const;
  /// e <- rho (lambda_gamma e + m x), theta <- theta + (alpha delta) e.
  void trace_step(const Eigen::Ref<const Eigen::RowVectorXd>& x, double rho, double m, double lambda_gamma, double alpha,
                  double delta);
  void check_finite(double value, const char* what) const;

  Algorithm algorithm_;
  LearnerConfig config_;
  FeatureMatrix phi_;
  Vector theta_;
  Vector trace_;
  std::int64_t steps_ = 0;
  bool has_prev_ = false;
  Index prev_state_ = 0;
  double prev_rho_ = 1.0;
};

/// TD(lambda); the off-policy form multiplies the trace by rho_t.
class TdLearner final : public Learner {
 public:
  TdLearner(Algorithm algorithm, LearnerConfig config, FeatureMatrix phi);

 protected:
  void step(const Transition& tr) override;
  void reset_episode() override { trace_.setZero(); }
};

/// TD(0) scaled by the product of every IS ratio since the episode start.
class FullIsLearner final : public Learner {
 public:
  FullIsLearner(LearnerConfig config, FeatureMatrix phi);

  double product() const { return product_; }
  /// Unclamped sum of log rho over the episode.
  double log_product() const { return log_product_; }
  bool high_variance() const { return high_variance_; }

  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& j) override;

 protected:
  void step(const Transition& tr) override;
  void reset_episode() override;

 private:
  double product_ = 1.0;
  double log_product_ = 0.0;
  bool high_variance_ = false;
};

/// ETD(lambda, beta) with scalar follower F.
class EtdLearner final : public Learner {
 public:
  EtdLearner(LearnerConfig config, FeatureMatrix phi);

  double follower() const { return follower_; }

  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& j) override;

 protected:
  void step(const Transition& tr) override;
  void reset_episode() override;

 private:
  double follower_ = 0.0;
};

/// COP-TD(lambda, beta) with nonnegative ratio features. With one-hot ratio
/// features and lambda = 0 (Algorithm::cop_td_tabular) this is the tabular
/// algorithm with rho_hat = theta_rho.
class CopTdLearner final : public Learner {
 public:
  CopTdLearner(Algorithm algorithm, LearnerConfig config, FeatureMatrix phi, FeatureMatrix phi_rho);

  bool has_ratio() const override { return true; }
  double ratio_estimate(Index s) const override;
  const Vector& ratio_weights() const { return theta_rho_; }
  void set_ratio_weights(const Vector& theta_rho);
  const FeatureMatrix& ratio_features() const { return phi_rho_; }

  /// F^T theta_rho / n from the last step that had a predecessor.
  std::optional<double> last_ratio_target() const { return last_target_; }
  double normalizer() const { return n_beta_; }
  const Vector& follower() const { return follower_; }
  /// Empirical d_mu-weighted feature mean N_phi / t.
  Vector empirical_feature_mean() const;

  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& j) override;

 protected:
  void step(const Transition& tr) override;
  void reset_episode() override;

 private:
  FeatureMatrix phi_rho_;
  Vector theta_rho_;
  bool theta_rho_ready_ = false;
  Vector follower_;
  Vector counts_;
  double n_beta_ = 1.0;
  std::optional<double> last_target_;
};

/// Log-COP-TD(lambda, beta): TD on log rho_d with artificial discount gamma_log.
class LogCopTdLearner final : public Learner {
 public:
  LogCopTdLearner(LearnerConfig config, FeatureMatrix phi, FeatureMatrix phi_rho);

  bool has_ratio() const override { return true; }
  /// exp(theta_rho^T phi_rho(s)) / (X / t).
  double ratio_estimate(Index s) const override;
  const Vector& ratio_weights() const { return theta_rho_; }
  void set_ratio_weights(const Vector& theta_rho) { theta_rho_ = theta_rho; }
  double normalizer() const { return n_beta_; }

  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& j) override;

 protected:
  void step(const Transition& tr) override;
  void reset_episode() override;

 private:
  double clamped_log(double rho) const;
  double mean_exp() const;

  FeatureMatrix phi_rho_;
  Vector theta_rho_;
  Vector feature_acc_;
  double log_follower_ = 0.0;
  double exp_sum_ = 0.0;
  std::int64_t exp_count_ = 0;
  double n_beta_ = 1.0;
};

/// GTD(lambda) in TDC form with auxiliary weights w on the step_ratio timescale.
class GtdLearner final : public Learner {
 public:
  GtdLearner(LearnerConfig config, FeatureMatrix phi);

  const Vector& auxiliary_weights() const { return w_; }

  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& j) override;

 protected:
  void step(const Transition& tr) override;
  void reset_episode() override { trace_.setZero(); }

 private:
  Vector w_;
};

/// phi_rho defaults to one-hot features for cop_td_tabular and is required
/// for cop_td and log_cop_td.
std::unique_ptr<Learner> make_learner(Algorithm algorithm, const LearnerConfig& config, const FeatureMatrix& phi,
                                      const std::optional<FeatureMatrix>& phi_rho = std::nullopt);

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace copeval

#include "copeval/learners.hpp"

#include <array>
#include <cmath>
#include <set>
#include <utility>

#include "copeval/errors.hpp"
#include "copeval/projections.hpp"

namespace copeval {
namespace {

constexpr std::array<std::pair<Algorithm, const char*>, 8> kAlgorithmNames{{
    {Algorithm::td, "td"},
    {Algorithm::off_policy_td, "off_policy_td"},
    {Algorithm::full_is_td, "full_is_td"},
    {Algorithm::etd, "etd"},
    {Algorithm::cop_td_tabular, "cop_td_tabular"},
    {Algorithm::cop_td, "cop_td"},
    {Algorithm::log_cop_td, "log_cop_td"},
    {Algorithm::gtd, "gtd"},
}};

void check_size(const Vector& v, Index n, const char* what) {
  if (v.size() != n) throw ConfigError(std::string(what) + " has length " + std::to_string(v.size()) +
                                       ", expected " + std::to_string(n));
}

}  // namespace

std::string to_string(Algorithm a) {
  for (const auto& [alg, name] : kAlgorithmNames) {
    if (alg == a) return name;
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (const auto& [alg, n] : kAlgorithmNames) {
    if (name == n) return alg;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

bool learns_ratio(Algorithm a) {
  return a == Algorithm::cop_td_tabular || a == Algorithm::cop_td || a == Algorithm::log_cop_td;
}

void LearnerConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
  if (!(gamma_log > 0.0 && gamma_log <= 1.0)) throw ConfigError("gamma_log must lie in (0, 1]");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
  if (!(log_clamp > 0.0)) throw ConfigError("log_clamp must be positive");
  if (!(is_product_ceiling > 1.0)) throw ConfigError("is_product_ceiling must exceed 1");
  step_value.validate();
  step_ratio.validate();
  if (step_value.decays() && step_ratio.decays() && !two_timescale_ordered(step_value, step_ratio)) {
    throw ConfigError("decaying schedules must satisfy step_value / step_ratio -> 0");
  }
}

void to_json(nlohmann::json& j, const LearnerConfig& c) {
  j = {{"lambda", c.lambda},
       {"beta", c.beta},
       {"gamma_log", c.gamma_log},
       {"discount", c.discount},
       {"step_value", c.step_value},
       {"step_ratio", c.step_ratio},
       {"trace_on_current_state", c.trace_on_current_state},
       {"log_variant", c.log_variant == LogCopVariant::standard ? "standard" : "verbatim"},
       {"etd_normalized", c.etd_normalized},
       {"log_clamp", c.log_clamp},
       {"floor_log", c.floor_log},
       {"is_product_ceiling", c.is_product_ceiling},
       {"freeze_ratio", c.freeze_ratio}};
  if (c.theta0) j["theta0"] = vector_to_json(*c.theta0);
  if (c.theta_rho0) j["theta_rho0"] = vector_to_json(*c.theta_rho0);
}

void from_json(const nlohmann::json& j, LearnerConfig& c) {
  static const std::set<std::string> known{"lambda",         "beta",      "gamma_log",          "discount",
                                           "step_value",     "step_ratio", "trace_on_current_state",
                                           "log_variant",    "etd_normalized", "log_clamp", "floor_log",
                                           "is_product_ceiling", "freeze_ratio", "theta0", "theta_rho0"};
  if (!j.is_object()) throw ConfigError("learner config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown learner config key '" + key + "'");
  }
  LearnerConfig d;
  c.lambda = j.value("lambda", d.lambda);
  c.beta = j.value("beta", d.beta);
  c.gamma_log = j.value("gamma_log", d.gamma_log);
  c.discount = j.value("discount", d.discount);
  c.step_value = j.contains("step_value") ? j.at("step_value").get<StepSchedule>() : d.step_value;
  c.step_ratio = j.contains("step_ratio") ? j.at("step_ratio").get<StepSchedule>() : d.step_ratio;
  c.trace_on_current_state = j.value("trace_on_current_state", d.trace_on_current_state);
  const std::string variant = j.value("log_variant", "verbatim");
  if (variant == "standard") {
    c.log_variant = LogCopVariant::standard;
  } else if (variant == "verbatim") {
    c.log_variant = LogCopVariant::verbatim;
  } else {
    throw ConfigError("log_variant must be 'standard' or 'verbatim'");
  }
  c.etd_normalized = j.value("etd_normalized", d.etd_normalized);
  c.log_clamp = j.value("log_clamp", d.log_clamp);
  c.floor_log = j.value("floor_log", d.floor_log);
  c.is_product_ceiling = j.value("is_product_ceiling", d.is_product_ceiling);
  c.freeze_ratio = j.value("freeze_ratio", d.freeze_ratio);
  c.theta0.reset();
  c.theta_rho0.reset();
  if (j.contains("theta0")) c.theta0 = vector_from_json(j.at("theta0"));
  if (j.contains("theta_rho0")) c.theta_rho0 = vector_from_json(j.at("theta_rho0"));
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
}

// ---------------------------------------------------------------------------

Learner::Learner(Algorithm algorithm, LearnerConfig config, FeatureMatrix phi)
    : algorithm_(algorithm), config_(std::move(config)), phi_(std::move(phi)) {
  config_.validate();
  const Index k = phi_.n_features();
  theta_ = Vector::Zero(k);
  if (config_.theta0) {
    check_size(*config_.theta0, k, "theta0");
    theta_ = *config_.theta0;
  }
  trace_ = Vector::Zero(k);
}

void Learner::observe(const Transition& tr) {
  const Index n = phi_.n_states();
  if (tr.state < 0 || tr.state >= n || tr.next_state < 0 || tr.next_state >= n) {
    throw InvalidArgument("transition state outside the feature table");
  }
  if (tr.episode_start) {
    reset_episode();
    has_prev_ = false;
  }
  step(tr);
  if (!theta_.allFinite()) throw NumericalDivergence("value weights became non-finite", steps_);
  has_prev_ = true;
  prev_state_ = tr.state;
  prev_rho_ = tr.is_ratio;
  ++steps_;
}

double Learner::ratio_estimate(Index) const {
  throw InvalidArgument(to_string(algorithm_) + " does not estimate the covariate shift");
}

Vector Learner::ratio_estimates() const {
  Vector out(phi_.n_states());
  for (Index s = 0; s < out.size(); ++s) out(s) = ratio_estimate(s);
  return out;
}

double Learner::td_error(const Transition& tr) const {
  const double delta =
      tr.reward + theta_.dot(config_.discount * phi_.row(tr.next_state).transpose() - phi_.row(tr.state).transpose());
  check_finite(delta, "TD error");
  return delta;
}

void Learner::trace_step(const Eigen::Ref<const Eigen::RowVectorXd>& x, double rho, double m, double lambda_gamma,
                         double alpha, double delta) {
  const double ad = alpha * delta;
  for (Index i = 0; i < theta_.size(); ++i) {
    trace_(i) = rho * (lambda_gamma * trace_(i) + m * x(i));
    theta_(i) += ad * trace_(i);
  }
}

void Learner::check_finite(double value, const char* what) const {
  if (!std::isfinite(value)) throw NumericalDivergence(std::string(what) + " is not finite", steps_);
}

nlohmann::json Learner::snapshot() const {
  return {{"algorithm", to_string(algorithm_)},
          {"steps", steps_},
          {"theta", vector_to_json(theta_)},
          {"trace", vector_to_json(trace_)},
          {"has_prev", has_prev_},
          {"prev_state", prev_state_},
          {"prev_rho", prev_rho_}};
}

void Learner::restore(const nlohmann::json& j) {
  if (j.at("algorithm").get<std::string>() != to_string(algorithm_)) {
    throw ConfigError("snapshot belongs to a different algorithm");
  }
  Vector theta = vector_from_json(j.at("theta"));
  Vector trace = vector_from_json(j.at("trace"));
  check_size(theta, phi_.n_features(), "snapshot theta");
  check_size(trace, phi_.n_features(), "snapshot trace");
  theta_ = std::move(theta);
  trace_ = std::move(trace);
  steps_ = j.at("steps").get<std::int64_t>();
  has_prev_ = j.at("has_prev").get<bool>();
  prev_state_ = j.at("prev_state").get<Index>();
  prev_rho_ = j.at("prev_rho").get<double>();
}

// ---------------------------------------------------------------------------

TdLearner::TdLearner(Algorithm algorithm, LearnerConfig config, FeatureMatrix phi)
    : Learner(algorithm, std::move(config), std::move(phi)) {}

void TdLearner::step(const Transition& tr) {
  const double rho = algorithm_ == Algorithm::td ? 1.0 : tr.is_ratio;
  const double delta = td_error(tr);
  trace_step(phi_.row(tr.state), rho, 1.0, config_.discount * config_.lambda, config_.step_value(steps_), delta);
}

FullIsLearner::FullIsLearner(LearnerConfig config, FeatureMatrix phi)
    : Learner(Algorithm::full_is_td, std::move(config), std::move(phi)) {}

void FullIsLearner::step(const Transition& tr) {
  const double delta = td_error(tr);
  trace_step(phi_.row(tr.state), product_ * tr.is_ratio, 1.0, 0.0, config_.step_value(steps_), delta);
  product_ *= tr.is_ratio;
  log_product_ += std::log(tr.is_ratio);
  if (product_ > config_.is_product_ceiling) {
    product_ = config_.is_product_ceiling;
    high_variance_ = true;
  }
}

void FullIsLearner::reset_episode() {
  product_ = 1.0;
  log_product_ = 0.0;
}

nlohmann::json FullIsLearner::snapshot() const {
  auto j = Learner::snapshot();
  j["product"] = product_;
  j["log_product"] = log_product_;
  j["high_variance"] = high_variance_;
  return j;
}

void FullIsLearner::restore(const nlohmann::json& j) {
  Learner::restore(j);
  product_ = j.at("product").get<double>();
  log_product_ = j.at("log_product").get<double>();
  high_variance_ = j.at("high_variance").get<bool>();
}

EtdLearner::EtdLearner(LearnerConfig config, FeatureMatrix phi)
    : Learner(Algorithm::etd, std::move(config), std::move(phi)) {}

void EtdLearner::step(const Transition& tr) {
  const double beta = config_.beta;
  const double interest = config_.etd_normalized ? 1.0 - beta : 1.0;
  follower_ = has_prev_ ? beta * prev_rho_ * follower_ + interest : interest;
  check_finite(follower_, "ETD follower");
  const double m = config_.lambda + (1.0 - config_.lambda) * follower_;
  const double delta = td_error(tr);
  trace_step(phi_.row(tr.state), tr.is_ratio, m, config_.discount * config_.lambda, config_.step_value(steps_), delta);
}

void EtdLearner::reset_episode() {
  follower_ = 0.0;
  trace_.setZero();
}

nlohmann::json EtdLearner::snapshot() const {
  auto j = Learner::snapshot();
  j["follower"] = follower_;
  return j;
}

void EtdLearner::restore(const nlohmann::json& j) {
  Learner::restore(j);
  follower_ = j.at("follower").get<double>();
}

// ---------------------------------------------------------------------------

CopTdLearner::CopTdLearner(Algorithm algorithm, LearnerConfig config, FeatureMatrix phi, FeatureMatrix phi_rho)
    : Learner(algorithm, std::move(config), std::move(phi)), phi_rho_(std::move(phi_rho)) {
  if (!phi_rho_.nonnegative()) throw NonnegativityViolation("ratio features must be entrywise nonnegative");
  if (phi_rho_.n_states() != phi_.n_states()) throw ConfigError("ratio and value features cover different states");
  const Index k = phi_rho_.n_features();
  if (config_.theta_rho0) {
    check_size(*config_.theta_rho0, k, "theta_rho0");
    theta_rho_ = *config_.theta_rho0;
    theta_rho_ready_ = true;
  } else {
    theta_rho_ = Vector::Ones(k);
  }
  follower_ = Vector::Zero(k);
  counts_ = Vector::Zero(k);
}

double CopTdLearner::ratio_estimate(Index s) const { return phi_rho_.row(s).dot(theta_rho_); }

void CopTdLearner::set_ratio_weights(const Vector& theta_rho) {
  check_size(theta_rho, phi_rho_.n_features(), "ratio weights");
  theta_rho_ = theta_rho;
  theta_rho_ready_ = true;
}

Vector CopTdLearner::empirical_feature_mean() const {
  return steps_ > 0 ? Vector(counts_ / static_cast<double>(steps_)) : Vector(counts_);
}

void CopTdLearner::step(const Transition& tr) {
  const Index s = tr.state;
  const auto f_s = phi_rho_.row(s);
  if (!theta_rho_ready_) {
    // Uniform start normalized on the first observed feature vector.
    const double mass = f_s.sum();
    theta_rho_.setConstant(mass > 0.0 ? 1.0 / mass : 1.0);
    theta_rho_ready_ = true;
  }
  const double beta = config_.beta;
  counts_ += f_s.transpose();
  last_target_.reset();

  if (has_prev_) {
    n_beta_ = beta * n_beta_ + 1.0;
    const auto f_prev = phi_rho_.row(prev_state_);
    for (Index i = 0; i < follower_.size(); ++i) follower_(i) = prev_rho_ * (beta * follower_(i) + f_prev(i));
    last_target_ = follower_.dot(theta_rho_) / n_beta_;
    if (!config_.freeze_ratio) {
      double delta_d = 0.0;
      for (Index i = 0; i < theta_rho_.size(); ++i) delta_d += theta_rho_(i) * (follower_(i) / n_beta_ - f_s(i));
      check_finite(delta_d, "ratio TD error");
      const double step = config_.step_ratio(steps_) * delta_d;
      for (Index i = 0; i < theta_rho_.size(); ++i) theta_rho_(i) += step * f_s(i);
    }
  }
  if (!config_.freeze_ratio) {
    const Vector weights = counts_ / static_cast<double>(steps_ + 1);
    project_weighted_simplex_active(theta_rho_, weights);
  }

  const double m = config_.lambda + (1.0 - config_.lambda) * f_s.dot(theta_rho_);
  const bool current = algorithm_ == Algorithm::cop_td_tabular || config_.trace_on_current_state;
  const double delta = td_error(tr);
  trace_step(phi_.row(current ? s : tr.next_state), tr.is_ratio, m, config_.discount * config_.lambda,
             config_.step_value(steps_), delta);
}

void CopTdLearner::reset_episode() {
  follower_.setZero();
  trace_.setZero();
  n_beta_ = 1.0;
}

nlohmann::json CopTdLearner::snapshot() const {
  auto j = Learner::snapshot();
  j["theta_rho"] = vector_to_json(theta_rho_);
  j["theta_rho_ready"] = theta_rho_ready_;
  j["follower"] = vector_to_json(follower_);
  j["counts"] = vector_to_json(counts_);
  j["n_beta"] = n_beta_;
  return j;
}

void CopTdLearner::restore(const nlohmann::json& j) {
  Learner::restore(j);
  const Index k = phi_rho_.n_features();
  Vector theta_rho = vector_from_json(j.at("theta_rho"));
  Vector follower = vector_from_json(j.at("follower"));
  Vector counts = vector_from_json(j.at("counts"));
  check_size(theta_rho, k, "snapshot theta_rho");
  check_size(follower, k, "snapshot follower");
  check_size(counts, k, "snapshot counts");
  theta_rho_ = std::move(theta_rho);
  follower_ = std::move(follower);
  counts_ = std::move(counts);
  theta_rho_ready_ = j.at("theta_rho_ready").get<bool>();
  n_beta_ = j.at("n_beta").get<double>();
  last_target_.reset();
}

// ---------------------------------------------------------------------------

LogCopTdLearner::LogCopTdLearner(LearnerConfig config, FeatureMatrix phi, FeatureMatrix phi_rho)
    : Learner(Algorithm::log_cop_td, std::move(config), std::move(phi)), phi_rho_(std::move(phi_rho)) {
  if (phi_rho_.n_states() != phi_.n_states()) throw ConfigError("ratio and value features cover different states");
  const Index k = phi_rho_.n_features();
  theta_rho_ = Vector::Zero(k);
  if (config_.theta_rho0) {
    check_size(*config_.theta_rho0, k, "theta_rho0");
    theta_rho_ = *config_.theta_rho0;
  }
  feature_acc_ = Vector::Zero(k);
}

double LogCopTdLearner::clamped_log(double rho) const {
  const double c = config_.log_clamp;
  if (!(rho > 0.0)) {
    if (!config_.floor_log) throw LogDomainError("importance ratio is not positive");
    return -c;
  }
  return std::clamp(std::log(rho), -c, c);
}

double LogCopTdLearner::mean_exp() const {
  return exp_count_ > 0 ? exp_sum_ / static_cast<double>(exp_count_) : 1.0;
}

double LogCopTdLearner::ratio_estimate(Index s) const {
  return std::exp(phi_rho_.row(s).dot(theta_rho_)) / mean_exp();
}

void LogCopTdLearner::step(const Transition& tr) {
  const Index s = tr.state;
  const auto f_s = phi_rho_.row(s);
  const double beta = config_.beta;
  const double g = config_.gamma_log;
  const bool verbatim = config_.log_variant == LogCopVariant::verbatim;

  exp_sum_ += std::exp(f_s.dot(theta_rho_));
  ++exp_count_;
  check_finite(exp_sum_, "log-ratio normalizer");
  if (verbatim) {
    for (Index i = 0; i < feature_acc_.size(); ++i) feature_acc_(i) = g * (beta * feature_acc_(i) + f_s(i));
  }
  if (has_prev_) {
    n_beta_ = beta * n_beta_ + 1.0;
    const double log_rho = clamped_log(prev_rho_);
    if (verbatim) {
      log_follower_ = beta * g * log_follower_ + n_beta_ * log_rho;
    } else {
      const auto f_prev = phi_rho_.row(prev_state_);
      for (Index i = 0; i < feature_acc_.size(); ++i) feature_acc_(i) = g * (beta * feature_acc_(i) + f_prev(i));
      log_follower_ = beta * g * log_follower_ + log_rho;
    }
    if (!config_.freeze_ratio) {
      double delta_d = verbatim ? log_follower_ / n_beta_ : log_follower_;
      for (Index i = 0; i < theta_rho_.size(); ++i) delta_d += theta_rho_(i) * (feature_acc_(i) / n_beta_ - f_s(i));
      check_finite(delta_d, "log-ratio TD error");
      const double step = config_.step_ratio(steps_) * delta_d;
      for (Index i = 0; i < theta_rho_.size(); ++i) theta_rho_(i) += step * f_s(i);
    }
  }

  const double m = config_.lambda + (1.0 - config_.lambda) * std::exp(f_s.dot(theta_rho_)) / mean_exp();
  check_finite(m, "emphasis");
  const double delta = td_error(tr);
  trace_step(phi_.row(config_.trace_on_current_state ? s : tr.next_state), tr.is_ratio, m,
             config_.discount * config_.lambda, config_.step_value(steps_), delta);
}

void LogCopTdLearner::reset_episode() {
  feature_acc_.setZero();
  log_follower_ = 0.0;
  trace_.setZero();
  n_beta_ = 1.0;
}

nlohmann::json LogCopTdLearner::snapshot() const {
  auto j = Learner::snapshot();
  j["theta_rho"] = vector_to_json(theta_rho_);
  j["feature_acc"] = vector_to_json(feature_acc_);
  j["log_follower"] = log_follower_;
  j["exp_sum"] = exp_sum_;
  j["exp_count"] = exp_count_;
  j["n_beta"] = n_beta_;
  return j;
}

void LogCopTdLearner::restore(const nlohmann::json& j) {
  Learner::restore(j);
  const Index k = phi_rho_.n_features();
  Vector theta_rho = vector_from_json(j.at("theta_rho"));
  Vector acc = vector_from_json(j.at("feature_acc"));
  check_size(theta_rho, k, "snapshot theta_rho");
  check_size(acc, k, "snapshot feature_acc");
  theta_rho_ = std::move(theta_rho);
  feature_acc_ = std::move(acc);
  log_follower_ = j.at("log_follower").get<double>();
  exp_sum_ = j.at("exp_sum").get<double>();
  exp_count_ = j.at("exp_count").get<std::int64_t>();
  n_beta_ = j.at("n_beta").get<double>();
}

// ---------------------------------------------------------------------------

GtdLearner::GtdLearner(LearnerConfig config, FeatureMatrix phi)
    : Learner(Algorithm::gtd, std::move(config), std::move(phi)), w_(Vector::Zero(phi_.n_features())) {}

void GtdLearner::step(const Transition& tr) {
  const auto x = phi_.row(tr.state);
  const auto x_next = phi_.row(tr.next_state);
  const double rho = tr.is_ratio;
  const double lambda_gamma = config_.discount * config_.lambda;
  const double delta = td_error(tr);
  for (Index i = 0; i < trace_.size(); ++i) trace_(i) = rho * (x(i) + lambda_gamma * trace_(i));
  const double ew = trace_.dot(w_);
  const double xw = x.dot(w_);
  const double alpha = config_.step_value(steps_);
  const double alpha_w = config_.step_ratio(steps_);
  const double correction = config_.discount * (1.0 - config_.lambda) * ew;
  for (Index i = 0; i < theta_.size(); ++i) {
    theta_(i) += alpha * (delta * trace_(i) - correction * x_next(i));
    w_(i) += alpha_w * (delta * trace_(i) - xw * x(i));
  }
  if (!w_.allFinite()) throw NumericalDivergence("auxiliary weights became non-finite", steps_);
}

nlohmann::json GtdLearner::snapshot() const {
  auto j = Learner::snapshot();
  j["w"] = vector_to_json(w_);
  return j;
}

void GtdLearner::restore(const nlohmann::json& j) {
  Learner::restore(j);
  Vector w = vector_from_json(j.at("w"));
  check_size(w, phi_.n_features(), "snapshot w");
  w_ = std::move(w);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Learner> make_learner(Algorithm algorithm, const LearnerConfig& config, const FeatureMatrix& phi,
                                      const std::optional<FeatureMatrix>& phi_rho) {
  switch (algorithm) {
    case Algorithm::td:
    case Algorithm::off_policy_td:
      return std::make_unique<TdLearner>(algorithm, config, phi);
    case Algorithm::full_is_td:
      return std::make_unique<FullIsLearner>(config, phi);
    case Algorithm::etd:
      return std::make_unique<EtdLearner>(config, phi);
    case Algorithm::gtd:
      return std::make_unique<GtdLearner>(config, phi);
    case Algorithm::cop_td_tabular: {
      if (config.lambda != 0.0) throw ConfigError("cop_td_tabular runs with lambda = 0");
      const Index n = phi.n_states();
      if (phi_rho && !(phi_rho->n_features() == n && phi_rho->matrix().isIdentity(0.0))) {
        throw ConfigError("cop_td_tabular needs one-hot ratio features");
      }
      return std::make_unique<CopTdLearner>(algorithm, config, phi, FeatureMatrix::identity(n));
    }
    case Algorithm::cop_td:
      if (!phi_rho) throw ConfigError("cop_td needs ratio features");
      return std::make_unique<CopTdLearner>(algorithm, config, phi, *phi_rho);
    case Algorithm::log_cop_td:
      if (!phi_rho) throw ConfigError("log_cop_td needs ratio features");
      return std::make_unique<LogCopTdLearner>(config, phi, *phi_rho);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace copeval

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace copeval {

/// Step-size sequence alpha_t for t = 0, 1, ...
///
///   constant: alpha_t = scale
///   power:    alpha_t = scale / (1 + t / tau)^exponent
///   t_log_t:  alpha_t = scale / ((t + t0) log(t + t0)), t0 = max(tau, 3)
class StepSchedule {
 public:
  enum class Kind { constant, power, t_log_t };

  StepSchedule() = default;
  static StepSchedule constant(double scale);
  static StepSchedule power(double scale, double tau, double exponent);
  static StepSchedule t_log_t(double scale, double tau = 3.0);

  double operator()(std::int64_t t) const;

  Kind kind() const { return kind_; }
  double scale() const { return scale_; }
  double tau() const { return tau_; }
  double exponent() const { return exponent_; }
  bool decays() const { return kind_ != Kind::constant; }

  /// Throws ConfigError on nonpositive scale/tau or a power exponent outside (0, 1].
  void validate() const;

  StepSchedule with_scale(double scale) const;

 private:
  Kind kind_ = Kind::constant;
  double scale_ = 0.05;
  double tau_ = 1.0;
  double exponent_ = 1.0;
};

/// True when slow(t) / fast(t) -> 0, judged by the asymptotic order
/// t^-p (log t)^-q of each schedule.
bool two_timescale_ordered(const StepSchedule& slow, const StepSchedule& fast);

void to_json(nlohmann::json& j, const StepSchedule& s);
void from_json(const nlohmann::json& j, StepSchedule& s);

}  // namespace copeval

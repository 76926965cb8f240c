#include "copeval/schedule.hpp"

#include <cmath>
#include <utility>

#include "copeval/errors.hpp"

namespace copeval {

StepSchedule StepSchedule::constant(double scale) {
  StepSchedule s;
  s.kind_ = Kind::constant;
  s.scale_ = scale;
  return s;
}

StepSchedule StepSchedule::power(double scale, double tau, double exponent) {
  StepSchedule s;
  s.kind_ = Kind::power;
  s.scale_ = scale;
  s.tau_ = tau;
  s.exponent_ = exponent;
  return s;
}

StepSchedule StepSchedule::t_log_t(double scale, double tau) {
  StepSchedule s;
  s.kind_ = Kind::t_log_t;
  s.scale_ = scale;
  s.tau_ = tau;
  return s;
}

double StepSchedule::operator()(std::int64_t t) const {
  const double x = static_cast<double>(t);
  switch (kind_) {
    case Kind::constant:
      return scale_;
    case Kind::power:
      return scale_ / std::pow(1.0 + x / tau_, exponent_);
    case Kind::t_log_t: {
      const double u = x + std::max(tau_, 3.0);
      return scale_ / (u * std::log(u));
    }
  }
  return scale_;
}

void StepSchedule::validate() const {
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw ConfigError("step size scale must be positive");
  if (kind_ != Kind::constant && !(tau_ > 0.0)) throw ConfigError("step size tau must be positive");
  if (kind_ == Kind::power && !(exponent_ > 0.0 && exponent_ <= 1.0)) {
    throw ConfigError("power schedule exponent must lie in (0, 1]");
  }
}

StepSchedule StepSchedule::with_scale(double scale) const {
  StepSchedule s = *this;
  s.scale_ = scale;
  return s;
}

namespace {

std::pair<double, double> order(const StepSchedule& s) {
  switch (s.kind()) {
    case StepSchedule::Kind::constant:
      return {0.0, 0.0};
    case StepSchedule::Kind::power:
      return {s.exponent(), 0.0};
    case StepSchedule::Kind::t_log_t:
      return {1.0, 1.0};
  }
  return {0.0, 0.0};
}

}  // namespace

bool two_timescale_ordered(const StepSchedule& slow, const StepSchedule& fast) {
  const auto [ps, qs] = order(slow);
  const auto [pf, qf] = order(fast);
  if (ps != pf) return ps > pf;
  return qs > qf;
}

void to_json(nlohmann::json& j, const StepSchedule& s) {
  switch (s.kind()) {
    case StepSchedule::Kind::constant:
      j = {{"kind", "constant"}, {"scale", s.scale()}};
      break;
    case StepSchedule::Kind::power:
      j = {{"kind", "power"}, {"scale", s.scale()}, {"tau", s.tau()}, {"exponent", s.exponent()}};
      break;
    case StepSchedule::Kind::t_log_t:
      j = {{"kind", "t_log_t"}, {"scale", s.scale()}, {"tau", s.tau()}};
      break;
  }
}

void from_json(const nlohmann::json& j, StepSchedule& s) {
  if (j.is_number()) {
    s = StepSchedule::constant(j.get<double>());
    return;
  }
  const std::string kind = j.value("kind", "constant");
  const double scale = j.value("scale", 0.05);
  if (kind == "constant") {
    s = StepSchedule::constant(scale);
  } else if (kind == "power") {
    s = StepSchedule::power(scale, j.value("tau", 1e4), j.value("exponent", 1.0));
  } else if (kind == "t_log_t") {
    s = StepSchedule::t_log_t(scale, j.value("tau", 3.0));
  } else {
    throw ConfigError("unknown step size kind '" + kind + "'");
  }
}

}  // namespace copeval

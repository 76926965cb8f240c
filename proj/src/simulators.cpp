#include "copeval/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "copeval/errors.hpp"

namespace copeval {

std::string to_string(SimulatorId id) {
  switch (id) {
    case SimulatorId::mountain_car:
      return "mountain_car";
    case SimulatorId::acrobot:
      return "acrobot";
    case SimulatorId::cart_pole:
      return "cart_pole";
  }
  return "unknown";
}

SimulatorId parse_simulator(const std::string& name) {
  if (name == "mountain_car") return SimulatorId::mountain_car;
  if (name == "acrobot") return SimulatorId::acrobot;
  if (name == "cart_pole") return SimulatorId::cart_pole;
  throw ConfigError("unknown simulator '" + name + "'");
}

void MountainCar::reset(Rng& rng) {
  x_ = -0.6 + 0.2 * rng.uniform();
  v_ = 0.0;
}

bool MountainCar::step(Index action) {
  const double a = static_cast<double>(action) - 1.0;
  v_ = std::clamp(v_ + 0.001 * a - 0.0025 * std::cos(3.0 * x_), -0.07, 0.07);
  x_ += v_;
  if (x_ < -1.2) {
    x_ = -1.2;
    v_ = 0.0;
  }
  if (x_ >= 0.5) {
    x_ = 0.5;
    return true;
  }
  return false;
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxVel1 = 4.0 * kPi;
constexpr double kMaxVel2 = 9.0 * kPi;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace

Acrobot::State Acrobot::derivative(const State& s, double torque) {
  constexpr double m1 = 1.0, m2 = 1.0, l1 = 1.0, lc1 = 0.5, lc2 = 0.5, i1 = 1.0, i2 = 1.0, g = 9.8;
  const double t1 = s[0], t2 = s[1], dt1 = s[2], dt2 = s[3];
  const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * std::cos(t2)) + i1 + i2;
  const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + i2;
  const double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - kPi / 2.0);
  const double phi1 = -m2 * l1 * lc2 * dt2 * dt2 * std::sin(t2) - 2.0 * m2 * l1 * lc2 * dt2 * dt1 * std::sin(t2) +
                      (m1 * lc1 + m2 * l1) * g * std::cos(t1 - kPi / 2.0) + phi2;
  const double ddt2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dt1 * dt1 * std::sin(t2) - phi2) /
                      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
  const double ddt1 = -(d2 * ddt2 + phi1) / d1;
  return {dt1, dt2, ddt1, ddt2};
}

void Acrobot::reset(Rng& rng) {
  for (auto& x : s_) x = -0.1 + 0.2 * rng.uniform();
}

bool Acrobot::step(Index action) {
  const double torque = static_cast<double>(action) - 1.0;
  constexpr double h = 0.2;
  auto shift = [](const State& s, const State& k, double c) {
    State out;
    for (std::size_t i = 0; i < 4; ++i) out[i] = s[i] + c * k[i];
    return out;
  };
  const State k1 = derivative(s_, torque);
  const State k2 = derivative(shift(s_, k1, h / 2.0), torque);
  const State k3 = derivative(shift(s_, k2, h / 2.0), torque);
  const State k4 = derivative(shift(s_, k3, h), torque);
  for (std::size_t i = 0; i < 4; ++i) s_[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  s_[0] = wrap_angle(s_[0]);
  s_[1] = wrap_angle(s_[1]);
  s_[2] = std::clamp(s_[2], -kMaxVel1, kMaxVel1);
  s_[3] = std::clamp(s_[3], -kMaxVel2, kMaxVel2);
  return -std::cos(s_[0]) - std::cos(s_[0] + s_[1]) > 1.0;
}

std::vector<double> Acrobot::observation() const { return {s_[0], s_[1], s_[2], s_[3]}; }
std::vector<double> Acrobot::lower() const { return {-kPi, -kPi, -kMaxVel1, -kMaxVel2}; }
std::vector<double> Acrobot::upper() const { return {kPi, kPi, kMaxVel1, kMaxVel2}; }

void CartPole::reset(Rng& rng) {
  for (auto& x : s_) x = -0.05 + 0.1 * rng.uniform();
  failed_ = false;
}

bool CartPole::step(Index action) {
  constexpr double g = 9.8, m_cart = 1.0, m_pole = 0.1, half_len = 0.5, dt = 0.02;
  constexpr double total = m_cart + m_pole;
  const double force = 10.0 * action_value(action);
  const double x = s_[0], dx = s_[1], th = s_[2], dth = s_[3];
  const double c = std::cos(th), s = std::sin(th);
  const double temp = (force + m_pole * half_len * dth * dth * s) / total;
  const double ddth = (g * s - c * temp) / (half_len * (4.0 / 3.0 - m_pole * c * c / total));
  const double ddx = temp - m_pole * half_len * ddth * c / total;
  s_ = {x + dt * dx, dx + dt * ddx, th + dt * dth, dth + dt * ddth};
  failed_ = std::abs(s_[0]) > 2.4 || std::abs(s_[2]) > 12.0 * kPi / 180.0;
  return failed_;
}

std::unique_ptr<Simulator> make_simulator(SimulatorId id) {
  switch (id) {
    case SimulatorId::mountain_car:
      return std::make_unique<MountainCar>();
    case SimulatorId::acrobot:
      return std::make_unique<Acrobot>();
    case SimulatorId::cart_pole:
      return std::make_unique<CartPole>();
  }
  throw ConfigError("unknown simulator");
}

}  // namespace copeval

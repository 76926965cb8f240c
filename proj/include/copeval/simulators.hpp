#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "copeval/rng.hpp"
#include "copeval/types.hpp"

namespace copeval {

enum class SimulatorId { mountain_car, acrobot, cart_pole };

std::string to_string(SimulatorId id);
SimulatorId parse_simulator(const std::string& name);

/// Episodic continuous-state control task with a finite action set.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual Index n_actions() const = 0;
  virtual std::size_t dim() const = 0;
  virtual void reset(Rng& rng) = 0;
  /// Advances one control step. Returns true when the episode ends.
  virtual bool step(Index action) = 0;
  virtual double last_reward() const = 0;
  virtual std::vector<double> observation() const = 0;
  /// Nominal box of reachable observations, used to normalize aggregation.
  virtual std::vector<double> lower() const = 0;
  virtual std::vector<double> upper() const = 0;
};

/// x in [-1.2, 0.5], v in [-0.07, 0.07]; v += 0.001 a - 0.0025 cos(3x); reward -1; ends at x >= 0.5.
class MountainCar final : public Simulator {
 public:
  Index n_actions() const override { return 3; }
  std::size_t dim() const override { return 2; }
  void reset(Rng& rng) override;
  bool step(Index action) override;
  double last_reward() const override { return -1.0; }
  std::vector<double> observation() const override { return {x_, v_}; }
  std::vector<double> lower() const override { return {-1.2, -0.07}; }
  std::vector<double> upper() const override { return {0.5, 0.07}; }

  void set_state(double x, double v) {
    x_ = x;
    v_ = v;
  }

 private:
  double x_ = -0.5;
  double v_ = 0.0;
};

/// Two-link underactuated swing-up with torque in {-1, 0, 1}, RK4 over 0.2 s per step.
/// Reward -1; ends when the tip rises one link length above the pivot.
class Acrobot final : public Simulator {
 public:
  using State = std::array<double, 4>;

  Index n_actions() const override { return 3; }
  std::size_t dim() const override { return 4; }
  void reset(Rng& rng) override;
  bool step(Index action) override;
  double last_reward() const override { return -1.0; }
  std::vector<double> observation() const override;
  std::vector<double> lower() const override;
  std::vector<double> upper() const override;

  void set_state(const State& s) { s_ = s; }
  const State& state() const { return s_; }
  static State derivative(const State& s, double torque);

 private:
  State s_{};
};

/// Pole on a cart, force 10 a with a in 21 evenly spaced values of [-1, 1], Euler at 0.02 s.
/// Reward 0 per step and -1 on failure (|x| > 2.4 or |angle| > 12 degrees).
class CartPole final : public Simulator {
 public:
  using State = std::array<double, 4>;

  Index n_actions() const override { return 21; }
  std::size_t dim() const override { return 4; }
  void reset(Rng& rng) override;
  bool step(Index action) override;
  double last_reward() const override { return failed_ ? -1.0 : 0.0; }
  std::vector<double> observation() const override { return {s_[0], s_[1], s_[2], s_[3]}; }
  std::vector<double> lower() const override { return {-2.4, -3.0, -0.21, -3.5}; }
  std::vector<double> upper() const override { return {2.4, 3.0, 0.21, 3.5}; }

  static double action_value(Index action) { return -1.0 + 0.1 * static_cast<double>(action); }
  void set_state(const State& s) { s_ = s; }
  const State& state() const { return s_; }

 private:
  State s_{};
  bool failed_ = false;
};

std::unique_ptr<Simulator> make_simulator(SimulatorId id);

}  // namespace copeval

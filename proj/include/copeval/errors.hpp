#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace copeval {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or values that violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A model (MDP, policy, features) that breaks its own invariants.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An induced chain is reducible or periodic, or a stationary weight is zero.
class ErgodicityViolation : public Error {
 public:
  using Error::Error;
};

/// The target policy puts mass on an action the behavior policy never takes.
class ImproperSupport : public Error {
 public:
  using Error::Error;
};

/// A projected fixed-point system is singular.
class DegenerateProjection : public Error {
 public:
  using Error::Error;
};

class AmbiguousFixedPoint : public Error {
 public:
  AmbiguousFixedPoint(const std::string& what, long null_dimension)
      : Error(what + " (null space dimension " + std::to_string(null_dimension) + ")"),
        null_dimension_(null_dimension) {}
  long null_dimension() const noexcept { return null_dimension_; }

 private:
  long null_dimension_;
};

class NumericalDivergence : public Error {
 public:
  NumericalDivergence(const std::string& what, std::int64_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

class NonnegativityViolation : public Error {
 public:
  using Error::Error;
};

class LogDomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace copeval

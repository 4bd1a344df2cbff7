#pragma once

#include <stdexcept>
#include <string>

namespace cao {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition of an operation was violated by the caller (dimension
/// mismatch, out-of-range index, invalid knob).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// Finite-difference step too small to perturb any coordinate.
class DegenerateStep : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised when a run's loss becomes non-finite or blows past the divergence
/// guard. Carries the step at which it happened.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace cao

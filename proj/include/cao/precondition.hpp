#pragma once

#include <span>
#include <vector>

#include "cao/linalg.hpp"
#include "cao/sketch.hpp"

namespace cao {

inline constexpr double kDefaultDenominatorFloor = 1e-8;

/// P = (B + eta I)^{-1} for a low-rank sketch B, applied through its
/// eigen-basis: directions v_i scale by 1/d_i with d_i = max(lambda_i + eta,
/// floor), the orthogonal complement by 1/eta. The floor keeps P positive
/// definite when a Ritz value is more negative than -eta.
class DampedPreconditioner {
 public:
  /// Throws ContractViolation unless eta > 0 and floor > 0.
  DampedPreconditioner(const Sketch& sketch, double eta, double floor = kDefaultDenominatorFloor);
  /// Holds a reference to the sketch, so temporaries are rejected.
  DampedPreconditioner(Sketch&&, double, double = kDefaultDenominatorFloor) = delete;

  const Sketch& sketch() const { return *sketch_; }
  double eta() const { return eta_; }
  double floor() const { return floor_; }
  std::span<const double> denominators() const { return denom_; }
  /// True when some lambda_i + eta fell below the floor.
  bool clamped() const { return clamped_; }

 private:
  const Sketch* sketch_;
  double eta_;
  double floor_;
  std::vector<double> denom_;
  bool clamped_ = false;
};

/// d = sum_i <g, v_i> / d_i v_i + (g - V V^T g) / eta. O(nk).
ParamVector precondition(std::span<const double> g, const DampedPreconditioner& pc);

/// <g, P g> = sum_i <g, v_i>^2 / d_i + |g_perp|^2 / eta.
double quadratic_form(std::span<const double> g, const DampedPreconditioner& pc);

/// max(1/eta, 1/min_i d_i); exactly 1/eta when every lambda_i >= 0.
double operator_norm_bound(const DampedPreconditioner& pc);

/// Smallest eigenvalue of P: 1 / max(max_i d_i, eta).
double min_eigenvalue(const DampedPreconditioner& pc);

}  // namespace cao

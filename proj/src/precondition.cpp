#include "cao/precondition.hpp"

#include <algorithm>
#include <cmath>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"

namespace cao {

DampedPreconditioner::DampedPreconditioner(const Sketch& sketch, double eta, double floor)
    : sketch_(&sketch), eta_(eta), floor_(floor) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ContractViolation("preconditioner: eta must be > 0");
  if (!(floor > 0.0)) throw ContractViolation("preconditioner: floor must be > 0");
  denom_.reserve(sketch.rank());
  for (double lambda : sketch.eigvals) {
    const double d = lambda + eta;
    if (d < floor) clamped_ = true;
    denom_.push_back(std::max(d, floor));
  }
}

namespace {

void check(std::span<const double> g, const DampedPreconditioner& pc) {
  const Sketch& s = pc.sketch();
  if (!s.empty() && s.basis.rows() != g.size()) {
    throw ContractViolation("precondition: gradient length does not match sketch");
  }
  for (double x : g) {
    if (!std::isfinite(x)) throw NumericError("precondition: non-finite gradient");
  }
}

// coefficients <g, v_i> and the complement g - V V^T g
std::vector<double> split(std::span<const double> g, const Sketch& s, ParamVector& perp) {
  perp.assign(g.begin(), g.end());
  std::vector<double> coeff(s.rank());
  for (std::size_t i = 0; i < s.rank(); ++i) {
    coeff[i] = kernels::dot(s.basis.col(i), g);
    kernels::axpy(-coeff[i], s.basis.col(i), perp);
  }
  return coeff;
}

}  // namespace

ParamVector precondition(std::span<const double> g, const DampedPreconditioner& pc) {
  check(g, pc);
  const Sketch& s = pc.sketch();
  ParamVector d;
  const auto coeff = split(g, s, d);
  kernels::scale(1.0 / pc.eta(), d);
  for (std::size_t i = 0; i < s.rank(); ++i) {
    kernels::axpy(coeff[i] / pc.denominators()[i], s.basis.col(i), d);
  }
  return d;
}

double quadratic_form(std::span<const double> g, const DampedPreconditioner& pc) {
  check(g, pc);
  ParamVector perp;
  const auto coeff = split(g, pc.sketch(), perp);
  double q = kernels::dot(perp, perp) / pc.eta();
  for (std::size_t i = 0; i < coeff.size(); ++i) q += coeff[i] * coeff[i] / pc.denominators()[i];
  return q;
}

double operator_norm_bound(const DampedPreconditioner& pc) {
  double smallest = pc.eta();
  for (double d : pc.denominators()) smallest = std::min(smallest, d);
  return 1.0 / smallest;
}

double min_eigenvalue(const DampedPreconditioner& pc) {
  double largest = pc.eta();
  for (double d : pc.denominators()) largest = std::max(largest, d);
  return 1.0 / largest;
}

}  // namespace cao

#include <cmath>
#include <string>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/problems.hpp"

namespace cao {

void ProblemMeta::validate() const {
  if (dim == 0) throw ContractViolation(name + ": dimension must be positive");
  if (smoothness_L && !(*smoothness_L > 0.0)) throw ContractViolation(name + ": L must be > 0");
  if (pl_mu) {
    if (!(*pl_mu > 0.0)) throw ContractViolation(name + ": mu must be > 0");
    if (!f_star) throw ContractViolation(name + ": PL constant requires f*");
    if (smoothness_L && *smoothness_L < *pl_mu) throw ContractViolation(name + ": L < mu");
  }
}

Problem::Problem(ProblemMeta meta) : meta_(std::move(meta)) { meta_.validate(); }

void Problem::set_smoothness(double L) {
  meta_.smoothness_L = L;
  meta_.validate();
}

void Problem::check_inputs(std::span<const double> theta, const Batch& batch) const {
  if (theta.size() != dim()) {
    throw ContractViolation(name() + ": parameter length " + std::to_string(theta.size()) +
                            " does not match dimension " + std::to_string(dim()));
  }
  const std::size_t n = num_samples();
  if (n == 0 && !batch.full()) {
    throw ContractViolation(name() + ": deterministic objective accepts only the full batch");
  }
  for (std::size_t idx : batch.indices) {
    if (idx >= n) throw ContractViolation(name() + ": batch index out of range");
  }
}

namespace {

void require_finite(std::span<const double> v, const std::string& what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(what + " produced a non-finite value");
  }
}

}  // namespace

double Problem::loss(std::span<const double> theta, const Batch& batch) const {
  check_inputs(theta, batch);
  const double f = eval_loss(theta, batch);
  if (!std::isfinite(f)) throw NumericError(name() + ": loss is not finite");
  return f;
}

ParamVector Problem::grad(std::span<const double> theta, const Batch& batch) const {
  check_inputs(theta, batch);
  ParamVector g(dim(), 0.0);
  eval_grad(theta, batch, g);
  require_finite(g, name() + ": gradient");
  return g;
}

ParamVector Problem::hvp(std::span<const double> theta, std::span<const double> v,
                         const Batch& batch) const {
  check_inputs(theta, batch);
  if (v.size() != dim()) throw ContractViolation(name() + ": direction length mismatch");
  require_finite(v, name() + ": hvp direction");
  ParamVector out(dim(), 0.0);
  eval_hvp(theta, v, batch, out);
  require_finite(out, name() + ": hvp");
  return out;
}

DenseMatrix Problem::dense_hessian(std::span<const double> theta, const Batch& batch) const {
  if (!has_dense_oracle()) {
    throw UnsupportedOperation(name() + ": dense Hessian oracle unavailable for n=" +
                               std::to_string(dim()));
  }
  check_inputs(theta, batch);
  return eval_dense_hessian(theta, batch);
}

DenseMatrix Problem::eval_dense_hessian(std::span<const double> theta, const Batch& batch) const {
  const std::size_t n = dim();
  DenseMatrix h(n, n);
  ParamVector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    eval_hvp(theta, e, batch, h.col(j));
    e[j] = 0.0;
  }
  return h;
}

ParamVector fd_hvp(const Problem& problem, std::span<const double> theta,
                   std::span<const double> v, const Batch& batch, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("fd_hvp: eps must be positive");
  if (v.size() != problem.dim() || theta.size() != problem.dim()) {
    throw ContractViolation("fd_hvp: dimension mismatch");
  }
  const std::size_t n = theta.size();
  bool zero = true;
  for (double x : v) zero = zero && x == 0.0;
  if (zero) return ParamVector(n, 0.0);

  ParamVector plus(theta.begin(), theta.end());
  ParamVector minus(theta.begin(), theta.end());
  kernels::axpy(eps, v, plus);
  kernels::axpy(-eps, v, minus);
  bool moved = false;
  for (std::size_t i = 0; i < n && !moved; ++i) moved = plus[i] != theta[i] || minus[i] != theta[i];
  if (!moved) throw DegenerateStep("fd_hvp: step eps*v does not change theta");

  ParamVector out = problem.grad(plus, batch);
  const ParamVector gm = problem.grad(minus, batch);
  kernels::axpy(-1.0, gm, out);
  kernels::scale(1.0 / (2.0 * eps), out);
  return out;
}

}  // namespace cao

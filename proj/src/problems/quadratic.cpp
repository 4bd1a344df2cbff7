#include <algorithm>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/problems.hpp"
#include "cao/rng.hpp"

namespace cao {
namespace {

ProblemMeta quadratic_meta(const QuadraticOptions& opts) {
  if (opts.spectrum.empty()) throw ContractViolation("quadratic: empty spectrum");
  ProblemMeta meta;
  meta.name = "quadratic";
  meta.dim = opts.spectrum.size();
  const auto [lo, hi] = std::minmax_element(opts.spectrum.begin(), opts.spectrum.end());
  if (*hi > 0.0) meta.smoothness_L = *hi;
  if (*lo > 0.0) {
    meta.pl_mu = *lo;
    meta.f_star = 0.0;
  } else if (*lo == 0.0) {
    meta.f_star = 0.0;
  }
  return meta;
}

}  // namespace

QuadraticProblem::QuadraticProblem(QuadraticOptions opts)
    : Problem(quadratic_meta(opts)), opts_(std::move(opts)) {
  const std::size_t n = opts_.spectrum.size();
  a_ = DenseMatrix(n, n);
  if (!opts_.rotate) {
    for (std::size_t i = 0; i < n; ++i) a_(i, i) = opts_.spectrum[i];
  } else {
    Rng rng(derive_seed(opts_.seed, 1));
    DenseMatrix g(n, n);
    fill_gaussian(g.data(), rng);
    const DenseMatrix q = qr_orthonormalize(g, derive_seed(opts_.seed, 2)).q;
    // Rows of Q scaled by the spectrum; A(i,j) = sum_p Q(i,p) s_p Q(j,p).
    DenseMatrix qt = q.transposed();
    DenseMatrix sq(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < n; ++p) sq(p, i) = opts_.spectrum[p] * q(i, p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double v = kernels::dot(sq.col(i), qt.col(j));
        a_(i, j) = v;
        a_(j, i) = v;
      }
    }
  }
  center_.assign(n, 0.0);
  if (opts_.random_center) {
    Rng rng(derive_seed(opts_.seed, 3));
    fill_gaussian(center_, rng);
  }
}

ParamVector QuadraticProblem::initial_point(std::uint64_t seed) const {
  ParamVector x(dim());
  Rng rng(derive_seed(seed, 0x51));
  fill_gaussian(x, rng);
  kernels::axpy(1.0, center_, x);
  return x;
}

nlohmann::json QuadraticProblem::describe() const {
  return {{"type", "quadratic"},
          {"spectrum", opts_.spectrum},
          {"seed", opts_.seed},
          {"rotate", opts_.rotate},
          {"random_center", opts_.random_center}};
}

double QuadraticProblem::eval_loss(std::span<const double> theta, const Batch&) const {
  ParamVector e(theta.begin(), theta.end());
  kernels::axpy(-1.0, center_, e);
  ParamVector ae(dim());
  kernels::gemv(a_.data(), dim(), dim(), e, ae);
  return 0.5 * kernels::dot(e, ae);
}

void QuadraticProblem::eval_grad(std::span<const double> theta, const Batch&,
                                 std::span<double> out) const {
  ParamVector e(theta.begin(), theta.end());
  kernels::axpy(-1.0, center_, e);
  kernels::gemv(a_.data(), dim(), dim(), e, out);
}

void QuadraticProblem::eval_hvp(std::span<const double>, std::span<const double> v, const Batch&,
                                std::span<double> out) const {
  kernels::gemv(a_.data(), dim(), dim(), v, out);
}

DenseMatrix QuadraticProblem::eval_dense_hessian(std::span<const double>, const Batch&) const {
  return a_;
}

}  // namespace cao

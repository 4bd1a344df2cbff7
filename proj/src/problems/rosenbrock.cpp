#include "cao/errors.hpp"
#include "cao/problems.hpp"
#include "cao/rng.hpp"

namespace cao {
namespace {

ProblemMeta rosenbrock_meta(std::size_t n) {
  if (n < 2) throw ContractViolation("rosenbrock: n must be >= 2");
  ProblemMeta meta;
  meta.name = "rosenbrock";
  meta.dim = n;
  meta.f_star = 0.0;
  return meta;
}

}  // namespace

RosenbrockProblem::RosenbrockProblem(std::size_t n, double init_noise)
    : Problem(rosenbrock_meta(n)), init_noise_(init_noise) {}

ParamVector RosenbrockProblem::initial_point(std::uint64_t seed) const {
  ParamVector x(dim());
  Rng rng(derive_seed(seed, 0x52));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < dim(); ++i) {
    x[i] = (i % 2 == 0 ? -1.2 : 1.0) + init_noise_ * noise(rng);
  }
  return x;
}

nlohmann::json RosenbrockProblem::describe() const {
  return {{"type", "rosenbrock"}, {"n", dim()}, {"init_noise", init_noise_}};
}

double RosenbrockProblem::eval_loss(std::span<const double> x, const Batch&) const {
  double f = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double r = x[i + 1] - x[i] * x[i];
    const double s = 1.0 - x[i];
    f += 100.0 * r * r + s * s;
  }
  return f;
}

void RosenbrockProblem::eval_grad(std::span<const double> x, const Batch&,
                                  std::span<double> g) const {
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double r = x[i + 1] - x[i] * x[i];
    g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
    g[i + 1] += 200.0 * r;
  }
}

// Hessian is tridiagonal; diag has n entries, off has n-1 (H(i,i+1)).
void RosenbrockProblem::tridiagonal(std::span<const double> x, std::vector<double>& diag,
                                    std::vector<double>& off) const {
  const std::size_t n = x.size();
  diag.assign(n, 0.0);
  off.assign(n - 1, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    diag[i] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
    diag[i + 1] += 200.0;
    off[i] = -400.0 * x[i];
  }
}

void RosenbrockProblem::eval_hvp(std::span<const double> x, std::span<const double> v,
                                 const Batch&, std::span<double> out) const {
  std::vector<double> diag, off;
  tridiagonal(x, diag, off);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = diag[i] * v[i];
    if (i > 0) s += off[i - 1] * v[i - 1];
    if (i + 1 < n) s += off[i] * v[i + 1];
    out[i] = s;
  }
}

DenseMatrix RosenbrockProblem::eval_dense_hessian(std::span<const double> x, const Batch&) const {
  std::vector<double> diag, off;
  tridiagonal(x, diag, off);
  const std::size_t n = x.size();
  DenseMatrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    h(i, i) = diag[i];
    if (i + 1 < n) {
      h(i, i + 1) = off[i];
      h(i + 1, i) = off[i];
    }
  }
  return h;
}

}  // namespace cao

#include "cao/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/rng.hpp"

namespace cao {

bool Sketch::has_negative() const {
  return std::any_of(eigvals.begin(), eigvals.end(), [](double l) { return l < 0.0; });
}

Sketch Sketch::none(std::size_t n) {
  Sketch s;
  s.basis = DenseMatrix(n, 0);
  return s;
}

namespace {

DenseMatrix apply_hvp(const HvpFn& hvp, const DenseMatrix& v) {
  DenseMatrix w(v.rows(), v.cols());
  for (std::size_t j = 0; j < v.cols(); ++j) {
    hvp(v.col(j), w.col(j));
    for (double x : w.col(j)) {
      if (!std::isfinite(x)) throw NumericError("block_lanczos: HVP returned a non-finite value");
    }
  }
  return w;
}

void validate(std::size_t n, const LanczosConfig& cfg) {
  if (cfg.k == 0) throw ContractViolation("block_lanczos: k must be >= 1");
  if (cfg.k > n) {
    throw ContractViolation("block_lanczos: k=" + std::to_string(cfg.k) + " exceeds n=" +
                            std::to_string(n));
  }
  if (cfg.iters < 1) throw ContractViolation("block_lanczos: iters must be >= 1");
}

}  // namespace

Sketch block_lanczos(const HvpFn& hvp, std::size_t n, const LanczosConfig& cfg) {
  validate(n, cfg);
  DenseMatrix start(n, cfg.k);
  Rng rng(derive_seed(cfg.seed, 0x10));
  fill_gaussian(start.data(), rng);
  return block_lanczos(hvp, start, cfg);
}

Sketch block_lanczos(const HvpFn& hvp, const DenseMatrix& start, const LanczosConfig& cfg) {
  const std::size_t n = start.rows();
  const std::size_t k = start.cols();
  if (k != cfg.k) throw ContractViolation("block_lanczos: start block has wrong column count");
  validate(n, cfg);

  int repairs = 0;
  std::uint64_t qr_seed = derive_seed(cfg.seed, 0x20);
  auto orthonormalize = [&](const DenseMatrix& m) {
    QrResult r = qr_orthonormalize(m, qr_seed++, cfg.reorth);
    repairs += r.repairs;
    return std::move(r.q);
  };

  DenseMatrix v = orthonormalize(start);
  for (int t = 0; t < cfg.iters; ++t) v = orthonormalize(apply_hvp(hvp, v));

  const DenseMatrix w = apply_hvp(hvp, v);
  DenseMatrix small(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) small(i, j) = kernels::dot(v.col(i), w.col(j));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double sym = 0.5 * (small(i, j) + small(j, i));
      small(i, j) = sym;
      small(j, i) = sym;
    }
  }

  const SymmetricEigen eig = jacobi_eigen(small);
  Sketch out;
  out.eigvals = eig.values;
  out.basis = matmul(v, eig.vectors);
  out.qr_repairs = repairs;
  return out;
}

double sketch_residual(const Sketch& sketch, const DenseMatrix& hessian) {
  const std::size_t n = hessian.rows();
  if (hessian.cols() != n) throw ContractViolation("sketch_residual: Hessian not square");
  if (!sketch.empty() && sketch.basis.rows() != n) {
    throw ContractViolation("sketch_residual: sketch dimension mismatch");
  }
  if (n > kDenseOracleCap) {
    throw UnsupportedOperation("sketch_residual: n exceeds the dense oracle cap");
  }

  // Column-wise projection: R = (I - VV^T) H, then R (I - VV^T).
  auto project = [&](DenseMatrix& m) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      for (std::size_t i = 0; i < sketch.rank(); ++i) {
        const double coeff = kernels::dot(sketch.basis.col(i), m.col(c));
        kernels::axpy(-coeff, sketch.basis.col(i), m.col(c));
      }
    }
  };
  DenseMatrix r = hessian;
  project(r);
  r = r.transposed();
  project(r);
  // Symmetric up to rounding; average before the eigensolve.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = 0.5 * (r(i, j) + r(j, i));
      r(i, j) = s;
      r(j, i) = s;
    }
  }
  return symmetric_spectral_norm(r);
}

}  // namespace cao

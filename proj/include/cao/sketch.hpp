#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cao/linalg.hpp"

namespace cao {

/// Top-k eigenpairs of a Hessian: B = sum_i eigvals[i] * v_i v_i^T.
struct Sketch {
  std::vector<double> eigvals;  // descending, may be negative
  DenseMatrix basis;            // n x k, orthonormal columns
  long refreshed_at = -1;
  int qr_repairs = 0;

  std::size_t rank() const { return eigvals.size(); }
  bool empty() const { return eigvals.empty(); }
  bool has_negative() const;

  /// Empty sketch for dimension n.
  static Sketch none(std::size_t n);

  friend bool operator==(const Sketch&, const Sketch&) = default;
};

struct LanczosConfig {
  std::size_t k = 1;
  int iters = 10;
  std::uint64_t seed = 0;
  bool reorth = true;
};

/// out = H v
using HvpFn = std::function<void(std::span<const double> v, std::span<double> out)>;

/// Top-k sketch by orthogonal subspace iteration on HVPs followed by a
/// Rayleigh-Ritz step:
///
///   V <- QR(randn(n, k))
///   repeat iters times: V <- QR([H v_1 .. H v_k])
///   T = V^T [H v_1 .. H v_k], symmetrized, eigendecomposed by Jacobi
///   return Ritz pairs ordered by signed eigenvalue, largest first
///
/// Exactly (iters + 1) * k HVP calls. Throws NumericError when an HVP
/// returns a non-finite value.
Sketch block_lanczos(const HvpFn& hvp, std::size_t n, const LanczosConfig& cfg);

/// Same iteration from a caller-supplied n x k start block (orthonormalized
/// first) instead of a seeded Gaussian one.
Sketch block_lanczos(const HvpFn& hvp, const DenseMatrix& start, const LanczosConfig& cfg);

/// Spectral norm of (I - VV^T) H (I - VV^T), i.e. the curvature the sketch
/// leaves behind. Requires the dense Hessian.
double sketch_residual(const Sketch& sketch, const DenseMatrix& hessian);

}  // namespace cao

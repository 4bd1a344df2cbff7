#pragma once

// Dense vector kernels used by every inner loop in the library (HVPs,
// projections, optimizer updates). Each kernel has a portable scalar
// reference and SIMD variants; the variant is picked once at startup from
// CPU features, or forced with CAO_SIMD=scalar|avx2|neon.
//
// Elementwise kernels (axpy, scale) are bit-identical across backends.
// Reductions (dot, gemv) differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace cao::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& scalar_table();
/// nullptr when the backend was not compiled in.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool backend_available(Backend b);
const KernelTable& table(Backend b);
std::string_view backend_name(Backend b);

Backend active_backend();
/// Throws ContractViolation if the backend is not available on this host.
void set_backend(Backend b);
const KernelTable& active();

double dot(std::span<const double> a, std::span<const double> b);
double nrm2(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);

}  // namespace cao::kernels

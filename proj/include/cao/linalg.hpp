#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cao {

using ParamVector = std::vector<double>;

/// Largest dimension for which a dense Hessian may be materialized.
inline constexpr std::size_t kDenseOracleCap = 500;

/// Column-major dense matrix. Columns are contiguous so a basis of k
/// vectors of length n is k spans.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
ParamVector matvec(const DenseMatrix& a, std::span<const double> x);

struct QrResult {
  DenseMatrix q;
  /// Columns that were numerically dependent and got replaced by a fresh
  /// random direction.
  int repairs = 0;
};

/// Modified Gram-Schmidt orthonormalization of the columns of `m`
/// (a second projection pass when `reorth` is set). Each column ends with
/// its first nonzero entry positive. A column whose norm after projection
/// falls below 1e-12 of its original norm is replaced by a seeded Gaussian
/// direction re-orthogonalized against the previous columns.
QrResult qr_orthonormalize(const DenseMatrix& m, std::uint64_t repair_seed, bool reorth = true);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // column i pairs with values[i]
};

/// Cyclic Jacobi rotations for small symmetric matrices. Converges when the
/// off-diagonal Frobenius norm falls below tol times the matrix norm.
SymmetricEigen jacobi_eigen(const DenseMatrix& a, double tol = 1e-12, int max_sweeps = 100);

/// Dense symmetric eigendecomposition for oracle-sized matrices (n <= a
/// few hundred), values descending.
SymmetricEigen dense_symmetric_eigen(const DenseMatrix& a);

/// max |eigenvalue| of a symmetric matrix.
double symmetric_spectral_norm(const DenseMatrix& a);

}  // namespace cao

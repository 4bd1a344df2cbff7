#include "cao/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/rng.hpp"

namespace cao {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t c = 0; c < cols_; ++c)
    for (std::size_t r = 0; r < rows_; ++r) t(c, r) = (*this)(r, c);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ContractViolation("matmul: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t p = 0; p < a.cols(); ++p) kernels::axpy(b(p, j), a.col(p), out.col(j));
  return out;
}

ParamVector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ContractViolation("matvec: dimension mismatch");
  ParamVector y(a.rows(), 0.0);
  for (std::size_t p = 0; p < a.cols(); ++p) kernels::axpy(x[p], a.col(p), y);
  return y;
}

namespace {

constexpr double kRankTol = 1e-12;

void project_out(std::span<double> v, const DenseMatrix& q, std::size_t upto) {
  for (std::size_t j = 0; j < upto; ++j) {
    const double c = kernels::dot(q.col(j), v);
    kernels::axpy(-c, q.col(j), v);
  }
}

void fix_sign(std::span<double> v) {
  auto first = std::find_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
  if (first != v.end() && *first < 0.0) kernels::scale(-1.0, v);
}

}  // namespace

QrResult qr_orthonormalize(const DenseMatrix& m, std::uint64_t repair_seed, bool reorth) {
  const std::size_t n = m.rows();
  const std::size_t k = m.cols();
  if (k > n) throw ContractViolation("qr_orthonormalize: more columns than rows");

  QrResult out{m, 0};
  DenseMatrix& q = out.q;
  Rng rng(repair_seed);

  for (std::size_t j = 0; j < k; ++j) {
    auto v = q.col(j);
    for (double x : v) {
      if (!std::isfinite(x)) throw NumericError("qr_orthonormalize: non-finite input");
    }
    double before = kernels::nrm2(v);
    project_out(v, q, j);
    if (reorth) project_out(v, q, j);
    double after = kernels::nrm2(v);

    // A zero column has nothing to compare against; treat it as dependent.
    while (before == 0.0 || after <= kRankTol * before) {
      ++out.repairs;
      fill_gaussian(v, rng);
      before = kernels::nrm2(v);
      project_out(v, q, j);
      project_out(v, q, j);
      after = kernels::nrm2(v);
    }
    kernels::scale(1.0 / after, v);
    fix_sign(v);
  }
  return out;
}

SymmetricEigen jacobi_eigen(const DenseMatrix& input, double tol, int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw ContractViolation("jacobi_eigen: matrix not square");

  DenseMatrix a = input;
  DenseMatrix v = DenseMatrix::identity(n);

  double total = 0.0;
  for (double x : a.data()) total += x * x;
  const double threshold = tol * std::sqrt(total);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= threshold) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that zeroes a(p,q) (Golub & Van Loan 8.5.2).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    std::copy(v.col(order[i]).begin(), v.col(order[i]).end(), out.vectors.col(i).begin());
  }
  return out;
}

SymmetricEigen dense_symmetric_eigen(const DenseMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.rows());
  if (a.cols() != a.rows()) throw ContractViolation("dense_symmetric_eigen: matrix not square");
  Eigen::Map<const Eigen::MatrixXd> view(a.data().data(), n, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(view);
  if (solver.info() != Eigen::Success) throw NumericError("dense eigendecomposition failed");

  // Eigen returns ascending order.
  SymmetricEigen out;
  out.values.resize(a.rows());
  out.vectors = DenseMatrix(a.rows(), a.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = n - 1 - i;
    out.values[i] = solver.eigenvalues()(src);
    for (Eigen::Index r = 0; r < n; ++r) out.vectors(r, i) = solver.eigenvectors()(r, src);
  }
  return out;
}

double symmetric_spectral_norm(const DenseMatrix& a) {
  if (a.rows() == 0) return 0.0;
  const auto eig = dense_symmetric_eigen(a);
  return std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
}

}  // namespace cao

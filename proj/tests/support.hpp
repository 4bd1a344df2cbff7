#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "cao/linalg.hpp"
#include "cao/rng.hpp"
#include "cao/sketch.hpp"

namespace cao::test {

inline DenseMatrix from_eigen(const Eigen::MatrixXd& m) {
  DenseMatrix out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) out(r, c) = m(r, c);
  return out;
}

inline Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c)
    for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) = m(r, c);
  return out;
}

// Haar-ish orthogonal matrix from Eigen's Householder QR, independent of the
// library's Gram-Schmidt.
inline Eigen::MatrixXd random_orthogonal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  return q;
}

inline DenseMatrix with_spectrum(const std::vector<double>& spectrum, std::uint64_t seed) {
  const auto q = random_orthogonal(spectrum.size(), seed);
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(spectrum.data(), spectrum.size());
  Eigen::MatrixXd a = q * d.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose()).eval();
  return from_eigen(a);
}

inline HvpFn dense_hvp(const DenseMatrix& h, long* calls = nullptr) {
  return [&h, calls](std::span<const double> v, std::span<double> out) {
    if (calls) ++*calls;
    const auto r = matvec(h, v);
    std::copy(r.begin(), r.end(), out.begin());
  };
}

inline double norm(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double rel_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline std::vector<double> gaussian(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  fill_gaussian(v, rng);
  return v;
}

}  // namespace cao::test

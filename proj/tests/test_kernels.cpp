#include <cmath>
#include <vector>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cao;
namespace k = cao::kernels;

namespace {

std::vector<const k::KernelTable*> simd_tables() {
  std::vector<const k::KernelTable*> out;
  for (auto b : {k::Backend::Avx2, k::Backend::Neon}) {
    if (k::backend_available(b)) out.push_back(&k::table(b));
  }
  return out;
}

// Lengths straddling every vector width and unroll boundary.
const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 257};

}  // namespace

TEST_CASE("scalar dot matches a long double reference") {
  Rng rng(1);
  for (auto n : kLengths) {
    const auto a = test::gaussian(n, rng), b = test::gaussian(n, rng);
    long double ref = 0;
    double mag = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ref += static_cast<long double>(a[i]) * b[i];
      mag += std::abs(a[i] * b[i]);
    }
    CHECK(std::abs(k::scalar_table().dot(a.data(), b.data(), n) - static_cast<double>(ref)) <=
          1e-15 * (mag + 1));
  }
}

TEST_CASE("SIMD elementwise kernels are bit-identical to scalar") {
  const auto tables = simd_tables();
  if (tables.empty()) MESSAGE("no SIMD backend on this host; scalar only");
  Rng rng(2);
  for (const auto* t : tables) {
    CAPTURE(std::string(k::backend_name(t->backend)));
    for (auto n : kLengths) {
      const auto x = test::gaussian(n, rng);
      auto y1 = test::gaussian(n, rng);
      auto y2 = y1;
      k::scalar_table().axpy(-0.37, x.data(), y1.data(), n);
      t->axpy(-0.37, x.data(), y2.data(), n);
      CHECK(y1 == y2);
      k::scalar_table().scale(1.7, y1.data(), n);
      t->scale(1.7, y2.data(), n);
      CHECK(y1 == y2);
    }
  }
}

TEST_CASE("SIMD reductions agree with scalar up to summation order") {
  Rng rng(3);
  for (const auto* t : simd_tables()) {
    for (auto n : kLengths) {
      const auto a = test::gaussian(n, rng), b = test::gaussian(n, rng);
      double mag = 0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - k::scalar_table().dot(a.data(), b.data(), n)) <=
            4e-16 * n * (mag + 1));
    }
    for (std::size_t rows : {1, 3, 8, 13}) {
      for (std::size_t cols : {1, 4, 7, 33}) {
        const auto a = test::gaussian(rows * cols, rng), x = test::gaussian(cols, rng);
        std::vector<double> y1(rows), y2(rows);
        k::scalar_table().gemv(a.data(), rows, cols, x.data(), y1.data());
        t->gemv(a.data(), rows, cols, x.data(), y2.data());
        for (std::size_t r = 0; r < rows; ++r) CHECK(y2[r] == doctest::Approx(y1[r]).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("span wrappers check lengths and follow the active backend") {
  std::vector<double> a(3, 1.0), b(4, 1.0);
  CHECK_THROWS_AS(k::dot(a, b), ContractViolation);
  CHECK_THROWS_AS(k::axpy(1.0, a, b), ContractViolation);
  CHECK_THROWS_AS(k::gemv(a, 2, 2, a, b), ContractViolation);

  const auto before = k::active_backend();
  k::set_backend(k::Backend::Scalar);
  CHECK(k::active_backend() == k::Backend::Scalar);
  std::vector<double> x{3, 4};
  CHECK(k::nrm2(x) == 5.0);
  std::vector<double> m{1, 2, 3, 4};  // [[1,2],[3,4]]
  std::vector<double> y(2);
  k::gemv(m, 2, 2, x, y);
  CHECK(y == std::vector<double>{11, 25});
  k::set_backend(before);
  CHECK(k::active_backend() == before);
}

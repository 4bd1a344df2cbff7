#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"

namespace cao::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* lookup(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &scalar_table();
    case Backend::Avx2:
      return cpu_has_avx2() ? avx2_table() : nullptr;
    case Backend::Neon:
      return neon_table();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("CAO_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return &scalar_table();
    if (v == "avx2" && lookup(Backend::Avx2)) return lookup(Backend::Avx2);
    if (v == "neon" && lookup(Backend::Neon)) return lookup(Backend::Neon);
  }
  if (auto* t = lookup(Backend::Avx2)) return t;
  if (auto* t = lookup(Backend::Neon)) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

void require_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ContractViolation("kernel operand length mismatch: " + std::to_string(a) + " vs " +
                            std::to_string(b));
  }
}

}  // namespace

bool backend_available(Backend b) { return lookup(b) != nullptr; }

const KernelTable& table(Backend b) {
  const KernelTable* t = lookup(b);
  if (!t) throw ContractViolation("SIMD backend not available: " + std::string(backend_name(b)));
  return *t;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

Backend active_backend() { return current().load()->backend; }

void set_backend(Backend b) { current().store(&table(b)); }

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double nrm2(std::span<const double> x) { return std::sqrt(active().dot(x.data(), x.data(), x.size())); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  require_same_size(a.size(), rows * cols);
  require_same_size(x.size(), cols);
  require_same_size(y.size(), rows);
  active().gemv(a.data(), rows, cols, x.data(), y.data());
}

}  // namespace cao::kernels

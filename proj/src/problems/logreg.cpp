#include <algorithm>
#include <cmath>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/problems.hpp"
#include "cao/rng.hpp"

namespace cao {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

template <typename Fn>
void for_each_sample(const Batch& batch, std::size_t n, Fn&& fn) {
  if (batch.full()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  } else {
    for (std::size_t i : batch.indices) fn(i);
  }
}

double batch_size(const Batch& batch, std::size_t n) {
  return static_cast<double>(batch.full() ? n : batch.indices.size());
}

}  // namespace

LogRegProblem::LogRegProblem(LogRegOptions opts)
    : Problem([&] {
        if (opts.n_features == 0 || opts.n_samples == 0) {
          throw ContractViolation("logreg: n_features and n_samples must be positive");
        }
        if (opts.reg < 0.0) throw ContractViolation("logreg: reg must be >= 0");
        ProblemMeta meta;
        meta.name = "logreg";
        meta.dim = opts.n_features + 1;
        return meta;
      }()),
      opts_(opts),
      stride_(opts.n_features + 1) {
  const std::size_t d = opts_.n_features;
  Rng rng(derive_seed(opts_.seed, 0x4c));
  std::vector<double> direction(d);
  fill_gaussian(direction, rng);
  kernels::scale(1.0 / kernels::nrm2(direction), direction);

  x_.assign(opts_.n_samples * stride_, 0.0);
  labels_.resize(opts_.n_samples);
  std::normal_distribution<double> noise(0.0, 1.0);
  double max_row_sq = 0.0;
  for (std::size_t i = 0; i < opts_.n_samples; ++i) {
    const double y = static_cast<double>(i % 2);
    labels_[i] = y;
    auto row = std::span<double>(x_).subspan(i * stride_, stride_);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = (2.0 * y - 1.0) * opts_.separation * direction[j] + noise(rng);
    }
    row[d] = 1.0;
    max_row_sq = std::max(max_row_sq, kernels::dot(row, row));
  }

  // sigma' <= 1/4, so every sample's curvature is bounded by |x|^2 / 4.
  set_smoothness(0.25 * max_row_sq + opts_.reg);
}

std::span<const double> LogRegProblem::features(std::size_t i) const {
  return std::span<const double>(x_).subspan(i * stride_, stride_);
}

ParamVector LogRegProblem::initial_point(std::uint64_t seed) const {
  ParamVector w(dim());
  Rng rng(derive_seed(seed, 0x4d));
  fill_gaussian(w, rng);
  kernels::scale(0.01, w);
  return w;
}

nlohmann::json LogRegProblem::describe() const {
  return {{"type", "logreg"},         {"n_features", opts_.n_features},
          {"n_samples", opts_.n_samples}, {"seed", opts_.seed},
          {"reg", opts_.reg},           {"separation", opts_.separation}};
}

double LogRegProblem::eval_loss(std::span<const double> w, const Batch& batch) const {
  double total = 0.0;
  for_each_sample(batch, opts_.n_samples, [&](std::size_t i) {
    const double z = kernels::dot(features(i), w);
    total += softplus(z) - labels_[i] * z;
  });
  return total / batch_size(batch, opts_.n_samples) + 0.5 * opts_.reg * kernels::dot(w, w);
}

void LogRegProblem::eval_grad(std::span<const double> w, const Batch& batch,
                              std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const double inv_b = 1.0 / batch_size(batch, opts_.n_samples);
  for_each_sample(batch, opts_.n_samples, [&](std::size_t i) {
    const auto xi = features(i);
    const double r = sigmoid(kernels::dot(xi, w)) - labels_[i];
    kernels::axpy(r * inv_b, xi, out);
  });
  kernels::axpy(opts_.reg, w, out);
}

void LogRegProblem::eval_hvp(std::span<const double> w, std::span<const double> v,
                             const Batch& batch, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const double inv_b = 1.0 / batch_size(batch, opts_.n_samples);
  for_each_sample(batch, opts_.n_samples, [&](std::size_t i) {
    const auto xi = features(i);
    const double s = sigmoid(kernels::dot(xi, w));
    const double c = s * (1.0 - s) * kernels::dot(xi, v);
    kernels::axpy(c * inv_b, xi, out);
  });
  kernels::axpy(opts_.reg, v, out);
}

}  // namespace cao

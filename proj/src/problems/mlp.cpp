#include <algorithm>
#include <cmath>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/problems.hpp"
#include "cao/rng.hpp"

namespace cao {

struct MlpProblem::Layout {
  std::size_t d, h, c;
  std::size_t w1, b1, w2, b2, total;

  explicit Layout(const MlpOptions& o)
      : d(o.inputs), h(o.hidden), c(o.classes),
        w1(0), b1(h * d), w2(b1 + h), b2(w2 + c * h), total(b2 + c) {}

  template <typename T>
  std::span<T> w1_row(std::span<T> p, std::size_t j) const { return p.subspan(w1 + j * d, d); }
  template <typename T>
  std::span<T> w2_row(std::span<T> p, std::size_t k) const { return p.subspan(w2 + k * h, h); }
};

namespace {

ProblemMeta mlp_meta(const MlpOptions& o) {
  if (o.inputs == 0 || o.hidden == 0 || o.classes < 2 || o.n_samples == 0) {
    throw ContractViolation("mlp: widths must be positive with at least two classes");
  }
  if (!(o.feature_scale > 0.0) || !std::isfinite(o.feature_scale)) {
    throw ContractViolation("mlp: feature_scale must be positive");
  }
  if (!std::isfinite(o.feature_offset)) throw ContractViolation("mlp: feature_offset must be finite");
  ProblemMeta meta;
  meta.name = "mlp";
  meta.dim = o.hidden * o.inputs + o.hidden + o.classes * o.hidden + o.classes;
  return meta;
}

// Forward pass for one sample. hidden = tanh(W1 x + b1), probs = softmax(W2 hidden + b2).
// Returns the sample's cross-entropy.
template <typename L>
double forward(const L& lay, std::span<const double> p, std::span<const double> x,
               std::size_t label, std::vector<double>& hidden, std::vector<double>& probs) {
  kernels::gemv(p.subspan(lay.w1, lay.h * lay.d), lay.h, lay.d, x, hidden);
  for (std::size_t j = 0; j < lay.h; ++j) hidden[j] = std::tanh(hidden[j] + p[lay.b1 + j]);
  kernels::gemv(p.subspan(lay.w2, lay.c * lay.h), lay.c, lay.h, hidden, probs);
  double zmax = -INFINITY;
  for (std::size_t k = 0; k < lay.c; ++k) {
    probs[k] += p[lay.b2 + k];
    zmax = std::max(zmax, probs[k]);
  }
  const double z_label = probs[label];
  double sum = 0.0;
  for (std::size_t k = 0; k < lay.c; ++k) {
    probs[k] = std::exp(probs[k] - zmax);
    sum += probs[k];
  }
  for (std::size_t k = 0; k < lay.c; ++k) probs[k] /= sum;
  return zmax + std::log(sum) - z_label;
}

template <typename Fn>
void for_each_sample(const Batch& batch, std::size_t n, Fn&& fn) {
  if (batch.full()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  } else {
    for (std::size_t i : batch.indices) fn(i);
  }
}

}  // namespace

MlpProblem::MlpProblem(MlpOptions opts) : Problem(mlp_meta(opts)), opts_(opts) {
  const std::size_t d = opts_.inputs;
  Rng rng(derive_seed(opts_.seed, 0x6d));
  std::vector<double> centers(opts_.classes * d);
  fill_gaussian(centers, rng);
  kernels::scale(opts_.separation, centers);

  std::normal_distribution<double> noise(0.0, 1.0);
  x_.resize(opts_.n_samples * d);
  labels_.resize(opts_.n_samples);
  for (std::size_t i = 0; i < opts_.n_samples; ++i) {
    const std::size_t y = i % opts_.classes;
    labels_[i] = y;
    for (std::size_t j = 0; j < d; ++j) x_[i * d + j] = centers[y * d + j] + opts_.noise * noise(rng);
  }
  if (opts_.feature_scale != 1.0 && d > 1) {
    for (std::size_t j = 0; j < d; ++j) {
      const double s = std::pow(opts_.feature_scale, static_cast<double>(j) / static_cast<double>(d - 1));
      for (std::size_t i = 0; i < opts_.n_samples; ++i) x_[i * d + j] *= s;
    }
  }
  for (auto& x : x_) x += opts_.feature_offset;
}

ParamVector MlpProblem::initial_point(std::uint64_t seed) const {
  const Layout lay(opts_);
  ParamVector p(lay.total, 0.0);
  Rng rng(derive_seed(seed, 0x6e));
  auto w1 = std::span<double>(p).subspan(lay.w1, lay.h * lay.d);
  auto w2 = std::span<double>(p).subspan(lay.w2, lay.c * lay.h);
  fill_gaussian(w1, rng);
  fill_gaussian(w2, rng);
  kernels::scale(1.0 / std::sqrt(static_cast<double>(lay.d)), w1);
  kernels::scale(1.0 / std::sqrt(static_cast<double>(lay.h)), w2);
  return p;
}

nlohmann::json MlpProblem::describe() const {
  return {{"type", "mlp"},
          {"widths", {opts_.inputs, opts_.hidden, opts_.classes}},
          {"n_samples", opts_.n_samples},
          {"seed", opts_.seed},
          {"separation", opts_.separation},
          {"noise", opts_.noise},
          {"feature_scale", opts_.feature_scale},
          {"feature_offset", opts_.feature_offset}};
}

double MlpProblem::eval_loss(std::span<const double> p, const Batch& batch) const {
  const Layout lay(opts_);
  std::vector<double> hidden(lay.h), probs(lay.c);
  double total = 0.0;
  std::size_t count = 0;
  for_each_sample(batch, opts_.n_samples, [&](std::size_t i) {
    total += forward(lay, p, std::span<const double>(x_).subspan(i * lay.d, lay.d), labels_[i],
                     hidden, probs);
    ++count;
  });
  return total / static_cast<double>(count);
}

void MlpProblem::eval_grad(std::span<const double> p, const Batch& batch,
                           std::span<double> out) const {
  const Layout lay(opts_);
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> hidden(lay.h), probs(lay.c), dh(lay.h);
  const double inv_b = 1.0 / static_cast<double>(batch.full() ? opts_.n_samples : batch.indices.size());

  for_each_sample(batch, opts_.n_samples, [&](std::size_t i) {
    const auto x = std::span<const double>(x_).subspan(i * lay.d, lay.d);
    forward(lay, p, x, labels_[i], hidden, probs);
    probs[labels_[i]] -= 1.0;  // dL/dz

    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < lay.c; ++k) {
      const double dz = probs[k] * inv_b;
      kernels::axpy(dz, hidden, lay.w2_row(out, k));
      out[lay.b2 + k] += dz;
      kernels::axpy(probs[k], lay.w2_row(p, k), dh);
    }
    for (std::size_t j = 0; j < lay.h; ++j) {
      const double da = dh[j] * (1.0 - hidden[j] * hidden[j]) * inv_b;
      kernels::axpy(da, x, lay.w1_row(out, j));
      out[lay.b1 + j] += da;
    }
  });
}

void MlpProblem::eval_hvp(std::span<const double> p, std::span<const double> v,
                          const Batch& batch, std::span<double> out) const {
  const Layout lay(opts_);
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> hidden(lay.h), probs(lay.c), dh(lay.h);
  std::vector<double> r_a(lay.h), r_h(lay.h), r_z(lay.c), r_dh(lay.h), tmp(lay.c);
  const double inv_b = 1.0 / static_cast<double>(batch.full() ? opts_.n_samples : batch.indices.size());

  for_each_sample(batch, opts_.n_samples, [&](std::size_t i) {
    const auto x = std::span<const double>(x_).subspan(i * lay.d, lay.d);
    forward(lay, p, x, labels_[i], hidden, probs);

    // R{a} = V1 x + vb1, R{h} = (1 - h^2) R{a}
    kernels::gemv(v.subspan(lay.w1, lay.h * lay.d), lay.h, lay.d, x, r_a);
    for (std::size_t j = 0; j < lay.h; ++j) {
      r_a[j] += v[lay.b1 + j];
      r_h[j] = (1.0 - hidden[j] * hidden[j]) * r_a[j];
    }
    // R{z} = W2 R{h} + V2 h + vb2
    kernels::gemv(p.subspan(lay.w2, lay.c * lay.h), lay.c, lay.h, r_h, r_z);
    kernels::gemv(v.subspan(lay.w2, lay.c * lay.h), lay.c, lay.h, hidden, tmp);
    double p_dot_rz = 0.0;
    for (std::size_t k = 0; k < lay.c; ++k) {
      r_z[k] += tmp[k] + v[lay.b2 + k];
      p_dot_rz += probs[k] * r_z[k];
    }
    // R{dz} = R{softmax} = p * (R{z} - <p, R{z}>); dz = p - e_y
    std::vector<double>& r_dz = tmp;
    for (std::size_t k = 0; k < lay.c; ++k) r_dz[k] = probs[k] * (r_z[k] - p_dot_rz);
    probs[labels_[i]] -= 1.0;
    auto& dz = probs;

    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(r_dh.begin(), r_dh.end(), 0.0);
    for (std::size_t k = 0; k < lay.c; ++k) {
      auto row = lay.w2_row(out, k);
      kernels::axpy(r_dz[k] * inv_b, hidden, row);
      kernels::axpy(dz[k] * inv_b, r_h, row);
      out[lay.b2 + k] += r_dz[k] * inv_b;
      kernels::axpy(dz[k], lay.w2_row(p, k), dh);
      // R{dh} = V2^T dz + W2^T R{dz}
      kernels::axpy(dz[k], lay.w2_row(v, k), r_dh);
      kernels::axpy(r_dz[k], lay.w2_row(p, k), r_dh);
    }
    for (std::size_t j = 0; j < lay.h; ++j) {
      const double sech2 = 1.0 - hidden[j] * hidden[j];
      const double r_da = (r_dh[j] * sech2 - 2.0 * dh[j] * hidden[j] * r_h[j]) * inv_b;
      kernels::axpy(r_da, x, lay.w1_row(out, j));
      out[lay.b1 + j] += r_da;
    }
  });
}

}  // namespace cao

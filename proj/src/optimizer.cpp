#include "cao/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/precondition.hpp"
#include "cao/rng.hpp"

namespace cao {

void CaoConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("cao: alpha must be > 0");
  if (m < 1) throw ConfigError("cao: refresh interval m must be >= 1");
  if (!(eta > 0.0)) throw ConfigError("cao: eta must be > 0");
  if (clip_c < 0.0) throw ConfigError("cao: clip must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("cao: weight decay must be >= 0");
  if (t_pow < 1) throw ConfigError("cao: t_pow must be >= 1");
  if (warm_steps < 0) throw ConfigError("cao: warm_steps must be >= 0");
  if (!(floor > 0.0)) throw ConfigError("cao: floor must be > 0");
}

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("sgd: lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd: momentum must be in [0, 1)");
  if (weight_decay < 0.0 || clip < 0.0) throw ConfigError("sgd: decay and clip must be >= 0");
}

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("adam: betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be > 0");
  if (weight_decay < 0.0 || clip < 0.0) throw ConfigError("adam: decay and clip must be >= 0");
}

OptimizerState OptimizerState::start(ParamVector theta) {
  OptimizerState s;
  s.theta = std::move(theta);
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double checked_loss(const Problem& problem, const OptimizerState& state, const Batch& batch) {
  try {
    return problem.loss(state.theta, batch);
  } catch (const NumericError& e) {
    throw DivergenceError(std::string("non-finite loss: ") + e.what(), state.step);
  }
}

ParamVector checked_grad(const Problem& problem, const OptimizerState& state, const Batch& batch,
                         double weight_decay) {
  ParamVector g;
  try {
    g = problem.grad(state.theta, batch);
  } catch (const NumericError& e) {
    throw DivergenceError(std::string("non-finite gradient: ") + e.what(), state.step);
  }
  if (weight_decay > 0.0) kernels::axpy(weight_decay, state.theta, g);
  return g;
}

void clip_direction(std::span<double> d, double c) {
  if (c <= 0.0) return;
  const double norm = kernels::nrm2(d);
  if (norm > c) kernels::scale(c / norm, d);
}

void check_dim(const OptimizerState& state, const Problem& problem) {
  if (state.theta.size() != problem.dim()) {
    throw ContractViolation("optimizer state dimension does not match the problem");
  }
}

// Applies theta -= lr * d and fills the common record fields.
void apply_update(OptimizerState& state, double lr, std::span<const double> d, StepRecord& rec) {
  kernels::axpy(-lr, d, state.theta);
  rec.update_norm = lr * kernels::nrm2(d);
  ++state.step;
}

void refresh_sketch(OptimizerState& state, const Problem& problem, const Batch& batch,
                    const CaoConfig& cfg, StepRecord& rec) {
  long calls = 0;
  const HvpFn hvp = [&](std::span<const double> v, std::span<double> out) {
    ++calls;
    const ParamVector hv = problem.hvp(state.theta, v, batch);
    std::copy(hv.begin(), hv.end(), out.begin());
  };
  LanczosConfig lc;
  lc.k = cfg.k;
  lc.iters = cfg.t_pow;
  lc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(state.step));
  lc.reorth = cfg.reorth;
  try {
    Sketch s = block_lanczos(hvp, problem.dim(), lc);
    s.refreshed_at = state.step;
    state.sketch = std::move(s);
    ++state.refreshes;
    rec.refreshed = true;
    rec.sketch_eigvals = state.sketch->eigvals;
    rec.qr_repairs = state.sketch->qr_repairs;
  } catch (const NumericError& e) {
    ++state.refresh_failures;
    rec.event = std::string("refresh_failed: ") + e.what();
  }
  state.hvp_calls += calls;
}

}  // namespace

StepRecord cao_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                    const CaoConfig& cfg) {
  const auto t0 = Clock::now();
  check_dim(state, problem);
  if (cfg.k > problem.dim()) throw ConfigError("cao: k exceeds the problem dimension");

  StepRecord rec;
  rec.step = state.step;

  const bool due = state.step % cfg.m == 0 || !state.sketch;
  if (cfg.k > 0 && state.step >= cfg.warm_steps && due) {
    refresh_sketch(state, problem, batch, cfg, rec);
  }

  rec.loss = checked_loss(problem, state, batch);
  ParamVector g = checked_grad(problem, state, batch, cfg.weight_decay);
  rec.grad_norm = kernels::nrm2(g);

  ParamVector d;
  if (cfg.k == 0) {
    d = std::move(g);
    if (cfg.eta_scaled_k0) kernels::scale(1.0 / cfg.eta, d);
  } else if (!state.sketch) {
    // warm-up phase, or every refresh so far failed
    d = std::move(g);
  } else {
    const DampedPreconditioner pc(*state.sketch, cfg.eta, cfg.floor);
    d = precondition(g, pc);
    rec.clamped = pc.clamped();
    rec.negative_curvature = state.sketch->has_negative();
  }
  clip_direction(d, cfg.clip_c);
  apply_update(state, cfg.alpha, d, rec);
  rec.wall_clock = seconds_since(t0);
  return rec;
}

StepRecord sgd_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                    const SgdConfig& cfg) {
  const auto t0 = Clock::now();
  check_dim(state, problem);
  StepRecord rec;
  rec.step = state.step;
  rec.loss = checked_loss(problem, state, batch);
  const ParamVector g = checked_grad(problem, state, batch, cfg.weight_decay);
  rec.grad_norm = kernels::nrm2(g);

  if (state.momentum.size() != g.size()) state.momentum.assign(g.size(), 0.0);
  kernels::scale(cfg.momentum, state.momentum);
  kernels::axpy(1.0, g, state.momentum);

  ParamVector u = state.momentum;
  clip_direction(u, cfg.clip);
  apply_update(state, cfg.lr, u, rec);
  rec.wall_clock = seconds_since(t0);
  return rec;
}

StepRecord adam_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                     const AdamConfig& cfg) {
  const auto t0 = Clock::now();
  check_dim(state, problem);
  StepRecord rec;
  rec.step = state.step;
  rec.loss = checked_loss(problem, state, batch);
  const ParamVector g = checked_grad(problem, state, batch, cfg.weight_decay);
  rec.grad_norm = kernels::nrm2(g);

  const std::size_t n = g.size();
  if (state.adam_m.size() != n) state.adam_m.assign(n, 0.0);
  if (state.adam_v.size() != n) state.adam_v.assign(n, 0.0);

  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  ParamVector u(n);
  for (std::size_t i = 0; i < n; ++i) {
    state.adam_m[i] = cfg.beta1 * state.adam_m[i] + (1.0 - cfg.beta1) * g[i];
    state.adam_v[i] = cfg.beta2 * state.adam_v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = state.adam_m[i] / c1;
    const double v_hat = state.adam_v[i] / c2;
    u[i] = m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  clip_direction(u, cfg.clip);
  apply_update(state, cfg.lr, u, rec);
  rec.wall_clock = seconds_since(t0);
  return rec;
}

StepRecord optimizer_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                          const OptimizerSpec& spec) {
  return std::visit(
      [&](const auto& cfg) -> StepRecord {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, CaoConfig>) return cao_step(state, problem, batch, cfg);
        if constexpr (std::is_same_v<T, SgdConfig>) return sgd_step(state, problem, batch, cfg);
        if constexpr (std::is_same_v<T, AdamConfig>) return adam_step(state, problem, batch, cfg);
      },
      spec);
}

std::vector<Batch> epoch_batches(std::size_t num_samples, std::size_t batch_size,
                                 std::uint64_t seed, long epoch) {
  if (num_samples == 0 || batch_size == 0 || batch_size >= num_samples) return {Batch{}};
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), 0);
  const std::uint64_t epoch_seed = derive_seed(seed, static_cast<std::uint64_t>(epoch));
  Rng rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> out;
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t end = std::min(num_samples, start + batch_size);
    Batch b;
    b.indices.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
    b.rng_seed = derive_seed(epoch_seed, start);
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<StepRecord> run_epoch(OptimizerState& state, const Problem& problem,
                                  const std::vector<Batch>& schedule, const OptimizerSpec& spec,
                                  long epoch) {
  std::vector<StepRecord> records;
  records.reserve(schedule.size());
  for (const Batch& b : schedule) {
    StepRecord r = optimizer_step(state, problem, b, spec);
    r.epoch = epoch;
    records.push_back(std::move(r));
  }
  return records;
}

long expected_hvp_calls(const CaoConfig& cfg, long steps) {
  if (cfg.k == 0 || steps <= 0) return 0;
  const long refreshes = (steps + cfg.m - 1) / cfg.m;
  return refreshes * (cfg.t_pow + 1) * static_cast<long>(cfg.k);
}

}  // namespace cao

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cao/linalg.hpp"
#include "cao/problems.hpp"
#include "cao/sketch.hpp"

namespace cao {

/// Knobs of the curvature-adaptive loop.
struct CaoConfig {
  double alpha = 0.1;
  std::size_t k = 1;
  long m = 400;                // refresh interval, steps
  double eta = 1.0;            // damping
  double clip_c = 0.0;         // 0 disables clipping
  double weight_decay = 0.0;   // coupled: added to the gradient
  int t_pow = 10;              // subspace iterations per refresh
  long warm_steps = 0;         // plain gradient steps before the first refresh
  double floor = 1e-8;         // denominator floor for lambda_i + eta
  /// With k = 0 the update is d = g. When set, k = 0 uses d = g / eta
  /// (P = I / eta) instead.
  bool eta_scaled_k0 = false;
  std::uint64_t seed = 0;      // parent seed for per-refresh start blocks
  bool reorth = true;

  void validate() const;
};

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double clip = 0.0;

  void validate() const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip = 0.0;

  void validate() const;
};

using OptimizerSpec = std::variant<CaoConfig, SgdConfig, AdamConfig>;

struct OptimizerState {
  ParamVector theta;
  long step = 0;
  std::optional<Sketch> sketch;
  ParamVector momentum;  // SGD
  ParamVector adam_m;
  ParamVector adam_v;
  long hvp_calls = 0;
  long refreshes = 0;
  long refresh_failures = 0;

  static OptimizerState start(ParamVector theta);
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct StepRecord {
  long step = 0;
  long epoch = 0;
  double loss = 0.0;         // batch loss at the pre-update iterate
  double grad_norm = 0.0;    // including weight decay
  double update_norm = 0.0;  // |theta_new - theta_old|
  bool refreshed = false;
  std::vector<double> sketch_eigvals;  // filled on refresh steps
  bool clamped = false;                // some lambda_i + eta hit the floor
  bool negative_curvature = false;     // sketch holds a negative Ritz value
  int qr_repairs = 0;
  std::string event;                   // e.g. "refresh_failed: ..."
  std::optional<double> full_loss;     // filled by the harness at eval cadence
  double wall_clock = 0.0;             // seconds spent in the step
};

/// One iteration of the curvature-adaptive loop on `batch`:
///   refresh the sketch when k > 0, step >= warm_steps and
///     (step % m == 0 or no sketch yet), from HVPs of the batch loss
///   g = grad + weight_decay * theta
///   d = g if k == 0, else (B + eta I)^{-1} g
///   d = min(1, clip_c / |d|) d if clip_c > 0
///   theta -= alpha d; step += 1
/// A failed refresh keeps the previous sketch and is recorded in `event`.
/// Throws DivergenceError on a non-finite loss.
StepRecord cao_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                    const CaoConfig& cfg);

/// Heavy ball: buf = momentum buf + g; theta -= lr buf (buf clipped as the
/// update direction).
StepRecord sgd_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                    const SgdConfig& cfg);

/// Bias-corrected Adam with coupled weight decay.
StepRecord adam_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                     const AdamConfig& cfg);

StepRecord optimizer_step(OptimizerState& state, const Problem& problem, const Batch& batch,
                          const OptimizerSpec& spec);

/// Shuffled minibatches for one pass over the data, reseeded per epoch.
/// Deterministic objectives, batch_size 0, or batch_size >= num_samples give
/// a single full batch.
std::vector<Batch> epoch_batches(std::size_t num_samples, std::size_t batch_size,
                                 std::uint64_t seed, long epoch);

std::vector<StepRecord> run_epoch(OptimizerState& state, const Problem& problem,
                                  const std::vector<Batch>& schedule, const OptimizerSpec& spec,
                                  long epoch);

/// HVP calls a fresh run of `steps` iterations performs with warm_steps = 0:
/// ceil(steps / m) * (t_pow + 1) * k.
long expected_hvp_calls(const CaoConfig& cfg, long steps);

std::string optimizer_kind(const OptimizerSpec& spec);
nlohmann::json to_json(const OptimizerSpec& spec);
/// {"type": "cao" | "sgd" | "adam", ...}; throws ConfigError.
OptimizerSpec optimizer_from_json(const nlohmann::json& j);

/// Text checkpoint ("cao-checkpoint 1"); doubles printed with 17
/// significant digits so save/load round-trips exactly.
void save_checkpoint(std::ostream& out, const OptimizerState& state);
OptimizerState load_checkpoint(std::istream& in);

}  // namespace cao

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cao/errors.hpp"
#include "cao/harness.hpp"
#include "cao/kernels.hpp"
#include "cao/rng.hpp"

namespace cao::harness {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
}

void hash_batch(std::uint64_t& h, const Batch& b) {
  if (b.full()) {
    fnv_mix(h, ~0ULL);
  } else {
    fnv_mix(h, b.indices.size());
    for (auto i : b.indices) fnv_mix(h, i);
  }
  fnv_mix(h, b.rng_seed);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Reproducible per-run optimizer: CAO's Lanczos seed is tied to the run seed.
OptimizerSpec seeded(const OptimizerSpec& spec, std::uint64_t seed) {
  OptimizerSpec s = spec;
  if (auto* c = std::get_if<CaoConfig>(&s)) c->seed = derive_seed(c->seed, seed);
  return s;
}

nlohmann::json header_config(const ExperimentConfig& cfg) {
  auto j = cfg.to_json();
  j.erase("out_dir");  // a rerun elsewhere must produce the same bytes
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig with_optimizers(const ExperimentConfig& cfg, std::vector<NamedOptimizer> opts) {
  ExperimentConfig c = cfg;
  c.optimizers = std::move(opts);
  c.baseline = c.optimizers.front().name;
  c.ablation_base.clear();
  c.sweep_base.clear();
  return c;
}

void run_grid(const ExperimentConfig& cfg, const std::string& experiment) {
  fs::remove_all(log_root(cfg, experiment));
  const auto problem = make_problem(cfg.problem);
  for (auto seed : cfg.seeds) {
    for (const auto& o : cfg.optimizers) run_single(cfg, problem, experiment, o, seed);
  }
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

RunResult run_single(const ExperimentConfig& cfg, const ProblemPtr& problem,
                     const std::string& experiment, const NamedOptimizer& opt,
                     std::uint64_t seed) {
  const auto path = log_path(cfg, experiment, opt.name, seed);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  const OptimizerSpec spec = seeded(opt.spec, seed);
  nlohmann::json spec_json = to_json(spec);
  spec_json["name"] = opt.name;
  const nlohmann::json header = {{"type", "header"},
                                 {"format", "cao-runlog"},
                                 {"version", kLogFormatVersion},
                                 {"experiment", experiment},
                                 {"optimizer", opt.name},
                                 {"seed", seed},
                                 {"spec", spec_json},
                                 {"problem", problem->describe()},
                                 {"kernel_backend", std::string(kernels::backend_name(kernels::active_backend()))},
                                 {"config", header_config(cfg)}};
  out << header.dump() << '\n';

  const std::size_t n_samples = problem->num_samples();
  const bool stochastic = n_samples > 0 && cfg.batch_size > 0 && cfg.batch_size < n_samples;

  auto state = OptimizerState::start(problem->initial_point(seed));
  std::uint64_t hash = kFnvOffset;
  long epoch = 0;
  auto schedule = epoch_batches(n_samples, cfg.batch_size, seed, epoch);
  std::size_t pos = 0;
  double reference = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::string reason;
  long clamp_events = 0;
  const auto t_run = std::chrono::steady_clock::now();

  RunResult res;
  res.optimizer = opt.name;
  res.seed = seed;
  res.log = path;

  for (long t = 0; t < cfg.steps; ++t) {
    if (pos == schedule.size()) {
      schedule = epoch_batches(n_samples, cfg.batch_size, seed, ++epoch);
      pos = 0;
    }
    const Batch& batch = schedule[pos++];
    hash_batch(hash, batch);

    std::optional<double> full;
    const auto t_step = std::chrono::steady_clock::now();
    StepRecord rec;
    try {
      if (stochastic && t % cfg.eval_every == 0) {
        full = problem->loss(state.theta, Batch::all());
      }
      rec = optimizer_step(state, *problem, batch, spec);
    } catch (const DivergenceError& e) {
      diverged = true;
      reason = e.what();
      break;
    } catch (const NumericError& e) {
      diverged = true;
      reason = e.what();
      break;
    }
    rec.epoch = epoch;
    rec.full_loss = full;
    const double wall = seconds_since(t_step);

    nlohmann::json row = {{"type", "step"},
                          {"step", rec.step},
                          {"epoch", rec.epoch},
                          {"loss", rec.loss}};
    if (rec.full_loss) row["full_loss"] = *rec.full_loss;
    row["grad_norm"] = rec.grad_norm;
    row["update_norm"] = rec.update_norm;
    row["refreshed"] = rec.refreshed;
    if (rec.refreshed) {
      row["sketch_eigvals"] = rec.sketch_eigvals;
      row["qr_repairs"] = rec.qr_repairs;
      row["negative_curvature"] = rec.negative_curvature;
    }
    row["clamped"] = rec.clamped;
    if (!rec.event.empty()) row["event"] = rec.event;
    row["wall_s"] = wall;
    out << row.dump() << '\n';
    if (rec.clamped) ++clamp_events;

    const double tracked = rec.full_loss.value_or(rec.loss);
    if (!std::isfinite(tracked)) {
      diverged = true;
      reason = "non-finite loss";
      break;
    }
    if (std::isnan(reference)) reference = std::max(std::abs(tracked), 1.0);
    if (tracked > cfg.divergence_factor * reference) {
      diverged = true;
      reason = "loss exceeded divergence_factor x initial loss";
      break;
    }
    res.steps_run = t + 1;
  }

  double final_loss = std::numeric_limits<double>::quiet_NaN();
  if (!diverged) {
    try {
      final_loss = problem->loss(state.theta, Batch::all());
    } catch (const NumericError& e) {
      diverged = true;
      reason = e.what();
    }
  }

  nlohmann::json summary = {{"type", "summary"},
                            {"diverged", diverged},
                            {"steps_run", res.steps_run},
                            {"hvp_calls", state.hvp_calls},
                            {"refreshes", state.refreshes},
                            {"refresh_failures", state.refresh_failures},
                            {"clamp_events", clamp_events},
                            {"schedule_hash", hex64(hash)},
                            {"final_loss", final_loss}};
  if (diverged) summary["reason"] = reason;
  summary["wall_total_s"] = seconds_since(t_run);
  out << summary.dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());

  res.diverged = diverged;
  res.hvp_calls = state.hvp_calls;
  res.refreshes = state.refreshes;
  res.clamp_events = clamp_events;
  res.schedule_hash = hex64(hash);
  res.final_loss = final_loss;
  return res;
}

std::vector<RunResult> run_comparison(const ExperimentConfig& cfg) {
  fs::remove_all(log_root(cfg, cfg.name));
  const auto problem = make_problem(cfg.problem);
  std::vector<RunResult> results;
  for (auto seed : cfg.seeds) {
    for (const auto& o : cfg.optimizers) {
      results.push_back(run_single(cfg, problem, cfg.name, o, seed));
    }
  }
  return results;
}

AblationSummary k_ablation(const ExperimentConfig& cfg, const std::vector<std::size_t>& ks) {
  if (cfg.ablation_base.empty()) throw ConfigError("config has no ablation.base");
  if (ks.empty()) throw ConfigError("k ablation needs at least one rank");
  const auto& base = std::get<CaoConfig>(cfg.optimizer(cfg.ablation_base).spec);
  std::vector<NamedOptimizer> opts;
  for (auto k : ks) {
    CaoConfig c = base;
    c.k = k;
    c.validate();
    opts.push_back({"k" + std::to_string(k), c});
  }
  const auto grid = with_optimizers(cfg, std::move(opts));
  const std::string exp = cfg.name + "-ablate-k";
  run_grid(grid, exp);
  return summarize_logs(exp + " (rank ablation)", load_logs(log_root(cfg, exp)), cfg.threshold);
}

AblationSummary sensitivity_sweep(const ExperimentConfig& cfg, const std::vector<double>& etas,
                                  const std::vector<long>& ms) {
  if (cfg.sweep_base.empty()) throw ConfigError("config has no sweep.base");
  if (etas.empty() || ms.empty()) throw ConfigError("sweep needs at least one eta and one m");
  const auto& base = std::get<CaoConfig>(cfg.optimizer(cfg.sweep_base).spec);
  std::vector<NamedOptimizer> opts;
  for (double eta : etas) {
    for (long m : ms) {
      CaoConfig c = base;
      c.eta = eta;
      c.m = m;
      c.validate();
      opts.push_back({"eta" + format_g(eta) + "_m" + std::to_string(m), c});
    }
  }
  const auto grid = with_optimizers(cfg, std::move(opts));
  const std::string exp = cfg.name + "-sweep";
  run_grid(grid, exp);
  return summarize_logs(exp + " (damping x refresh sweep)", load_logs(log_root(cfg, exp)),
                        cfg.threshold);
}

}  // namespace cao::harness

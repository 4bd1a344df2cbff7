#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cao/optimizer.hpp"
#include "cao/problems.hpp"

namespace cao::harness {

namespace fs = std::filesystem;

inline constexpr int kLogFormatVersion = 1;

struct NamedOptimizer {
  std::string name;
  OptimizerSpec spec;
};

/// One declarative experiment document. See configs/README.md for the
/// schema.
struct ExperimentConfig {
  std::string name;
  nlohmann::json problem;
  std::vector<NamedOptimizer> optimizers;
  std::vector<std::uint64_t> seeds;
  long steps = 0;
  std::size_t batch_size = 0;  // 0 = full batch
  long eval_every = 1;         // full-data loss cadence for stochastic problems
  double threshold = 0.0;
  std::vector<double> thresholds;
  std::string baseline;  // speedup denominator, by optimizer name
  double divergence_factor = 1e4;
  fs::path out_dir = "out";

  std::string ablation_base;
  std::vector<std::size_t> ablation_ks{0, 1, 3, 5};
  std::string sweep_base;
  std::vector<double> sweep_etas;
  std::vector<long> sweep_ms;

  const NamedOptimizer& optimizer(const std::string& name) const;

  /// Throws ConfigError on missing or invalid fields.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const fs::path& path);
  nlohmann::json to_json() const;
};

/// Where an experiment's artifacts live under out_dir.
fs::path log_root(const ExperimentConfig& cfg, const std::string& experiment);
fs::path log_path(const ExperimentConfig& cfg, const std::string& experiment,
                  const std::string& optimizer, std::uint64_t seed);
fs::path tables_dir(const ExperimentConfig& cfg);
fs::path figures_dir(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Run logs: line-delimited JSON. A header line (format, version, experiment,
// optimizer, seed, problem, full config), one line per step, and a summary
// line. Keys starting with "wall" hold timings and are the only fields that
// vary between identical reruns.

struct LogRow {
  long step = 0;
  long epoch = 0;
  double loss = 0.0;
  std::optional<double> full_loss;
  bool refreshed = false;
  bool clamped = false;

  /// Loss used for thresholds and curves: full-data loss when recorded.
  double tracked_loss() const { return full_loss.value_or(loss); }
};

struct RunLog {
  nlohmann::json header;
  std::vector<LogRow> rows;
  nlohmann::json summary;

  std::string optimizer() const;
  std::uint64_t seed() const;
  bool diverged() const;
};

RunLog read_runlog(const fs::path& path);

struct RunResult {
  std::string optimizer;
  std::uint64_t seed = 0;
  fs::path log;
  bool diverged = false;
  long steps_run = 0;
  long hvp_calls = 0;
  long refreshes = 0;
  long clamp_events = 0;
  std::string schedule_hash;
  double final_loss = 0.0;
};

/// One (optimizer, seed) run, streamed to its log file.
RunResult run_single(const ExperimentConfig& cfg, const ProblemPtr& problem,
                     const std::string& experiment, const NamedOptimizer& opt,
                     std::uint64_t seed);

/// Every optimizer on every seed; per seed all optimizers consume the same
/// batch schedule.
std::vector<RunResult> run_comparison(const ExperimentConfig& cfg);

/// optimizer name -> logs sorted by seed.
using LogSet = std::map<std::string, std::vector<RunLog>>;
LogSet load_logs(const fs::path& experiment_dir);

// ---------------------------------------------------------------------------
// Summaries

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};
MeanStd mean_std(const std::vector<double>& values);

/// First step whose tracked loss is <= threshold.
std::optional<long> first_hit_step(const RunLog& log, double threshold);
std::optional<long> first_hit_epoch(const RunLog& log, double threshold);

struct TttRow {
  std::string optimizer;
  std::size_t runs = 0;
  std::size_t reached = 0;  // unreached runs are excluded from the means
  MeanStd step;
  MeanStd epoch;
  std::vector<std::optional<long>> per_seed;
  std::optional<double> speedup;  // baseline mean / this mean
};

struct TttTable {
  double threshold = 0.0;
  std::string baseline;
  std::vector<TttRow> rows;

  const TttRow& row(const std::string& optimizer) const;
  std::string render() const;
};

/// Throws Error when `logs` is empty.
TttTable time_to_threshold(const LogSet& logs, double threshold, const std::string& baseline);
std::vector<TttTable> threshold_sweep(const LogSet& logs, const std::vector<double>& thresholds,
                                      const std::string& baseline);
std::string render_threshold_sweep(const std::vector<TttTable>& tables);

struct AblationCell {
  std::string label;
  std::vector<std::optional<long>> first_hit;  // per seed
  MeanStd first_hit_stats;
  MeanStd final_loss;
  long diverged = 0;
  long clamp_events = 0;
  long hvp_calls = 0;           // summed over seeds
  long expected_hvp_calls = 0;  // summed over seeds
};

struct AblationSummary {
  std::string title;
  std::vector<AblationCell> cells;
  std::string render() const;
};

/// Replicates the CAO optimizer `ablation_base` at each rank k.
AblationSummary k_ablation(const ExperimentConfig& cfg, const std::vector<std::size_t>& ks);

/// Replicates `sweep_base` over the damping x refresh-interval grid.
AblationSummary sensitivity_sweep(const ExperimentConfig& cfg, const std::vector<double>& etas,
                                  const std::vector<long>& ms);

/// Summaries recomputed from logs alone.
AblationSummary summarize_logs(const std::string& title, const LogSet& logs, double threshold);

/// Tab-separated loss curves: step, then <opt>_mean, <opt>_std per optimizer
/// in name order. Optimizers with a single seed get the std column named
/// <opt>_std_single_seed (all zeros). Throws when optimizers have different
/// seed counts.
std::string emit_plot_data(const LogSet& logs);

}  // namespace cao::harness

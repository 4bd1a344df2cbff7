// cao_bench: experiment runner and summary tool.
//
//   cao_bench run      --config C      run every optimizer x seed, write logs and tables
//   cao_bench ttt      --config C      time-to-threshold tables recomputed from logs
//   cao_bench ablate-k --config C      rank ablation around ablation.base
//   cao_bench sweep    --config C      damping x refresh-interval grid around sweep.base
//   cao_bench plotdata --config C      loss-vs-step TSV from logs
//   cao_bench theory                   executable theory checks
//
// Exit codes: 0 ok, 1 failed check or runtime error, 2 divergence, 3 config error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cao/errors.hpp"
#include "cao/harness.hpp"
#include "cao/theory.hpp"

namespace fs = std::filesystem;
using namespace cao;
using namespace cao::harness;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitConfig = 3;

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override) {
  auto cfg = ExperimentConfig::from_file(path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

// Tables for a comparison experiment, computed from its logs only.
std::string write_comparison_tables(const ExperimentConfig& cfg, double threshold) {
  const auto logs = load_logs(log_root(cfg, cfg.name));
  const auto ttt = time_to_threshold(logs, threshold, cfg.baseline);
  std::string text = ttt.render();
  write_file(tables_dir(cfg) / (cfg.name + "-ttt.txt"), text);
  if (!cfg.thresholds.empty()) {
    const auto sweep = render_threshold_sweep(threshold_sweep(logs, cfg.thresholds, cfg.baseline));
    write_file(tables_dir(cfg) / (cfg.name + "-thresholds.txt"), sweep);
    text += "\n" + sweep;
  }
  const auto summary = summarize_logs(cfg.name + " (final metrics)", logs, threshold).render();
  write_file(tables_dir(cfg) / (cfg.name + "-summary.txt"), summary);
  text += "\n" + summary;
  return text;
}

std::string write_plot_data(const ExperimentConfig& cfg, const std::string& experiment) {
  const fs::path path = figures_dir(cfg) / (experiment + ".tsv");
  write_file(path, emit_plot_data(load_logs(log_root(cfg, experiment))));
  return path.string();
}

bool any_diverged(const LogSet& logs) {
  for (const auto& [name, runs] : logs) {
    for (const auto& r : runs) {
      if (r.diverged()) return true;
    }
  }
  return false;
}

int cmd_run(const ExperimentConfig& cfg) {
  const auto results = run_comparison(cfg);
  bool diverged = false;
  std::printf("optimizer\tseed\tsteps\thvp_calls\trefreshes\tclamps\tschedule\tfinal_loss\n");
  for (const auto& r : results) {
    std::printf("%s\t%llu\t%ld\t%ld\t%ld\t%ld\t%s\t%.6g%s\n", r.optimizer.c_str(),
                static_cast<unsigned long long>(r.seed), r.steps_run, r.hvp_calls, r.refreshes,
                r.clamp_events, r.schedule_hash.c_str(), r.final_loss,
                r.diverged ? "\tDIVERGED" : "");
    diverged = diverged || r.diverged;
  }
  std::printf("\n%s", write_comparison_tables(cfg, cfg.threshold).c_str());
  std::printf("plot data: %s\n", write_plot_data(cfg, cfg.name).c_str());
  if (diverged) {
    std::fprintf(stderr, "cao_bench: at least one run diverged (partial logs kept)\n");
    return kExitDiverged;
  }
  return 0;
}

int cmd_ttt(const ExperimentConfig& cfg, std::optional<double> threshold) {
  std::printf("%s", write_comparison_tables(cfg, threshold.value_or(cfg.threshold)).c_str());
  return 0;
}

int report_grid(const ExperimentConfig& cfg, const AblationSummary& s, const std::string& exp,
                const std::string& table) {
  const auto text = s.render();
  write_file(tables_dir(cfg) / table, text);
  std::printf("%s", text.c_str());
  std::printf("plot data: %s\n", write_plot_data(cfg, exp).c_str());
  return any_diverged(load_logs(log_root(cfg, exp))) ? kExitDiverged : 0;
}

int cmd_theory(std::uint64_t seed, const fs::path& out_dir) {
  const auto reports = run_theory_suite(seed);
  std::string records;
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-4s %s\n", r.pass ? "PASS" : "FAIL", r.check_name.c_str());
    records += r.to_record() + "\n";
    ok = ok && r.pass;
  }
  const fs::path path = out_dir / "logs" / "theory" / "reports.log";
  write_file(path, records);
  std::printf("reports: %s\n", path.string().c_str());
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAO optimizer benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("-o,--out", out_dir, "output root, overrides config out_dir");
  };

  auto* run = app.add_subcommand("run", "run the comparison and write logs, tables, plot data");
  add_common(run);

  std::optional<double> threshold;
  auto* ttt = app.add_subcommand("ttt", "time-to-threshold tables from existing logs");
  add_common(ttt);
  ttt->add_option("-t,--threshold", threshold, "override the config threshold");

  std::vector<std::size_t> ks;
  auto* ablate = app.add_subcommand("ablate-k", "rank ablation of ablation.base");
  add_common(ablate);
  ablate->add_option("--ks", ks, "ranks (default from config)")->delimiter(',');

  std::vector<double> etas;
  std::vector<long> ms;
  auto* sweep = app.add_subcommand("sweep", "damping x refresh-interval grid of sweep.base");
  add_common(sweep);
  sweep->add_option("--etas", etas, "damping grid (default from config)")->delimiter(',');
  sweep->add_option("--ms", ms, "refresh intervals (default from config)")->delimiter(',');

  std::string experiment;
  auto* plot = app.add_subcommand("plotdata", "loss curves (mean, std over seeds) from logs");
  add_common(plot);
  plot->add_option("-e,--experiment", experiment,
                   "experiment directory under logs/ (default: config name)");

  std::uint64_t theory_seed = 0;
  std::string theory_out = "out";
  auto* theory = app.add_subcommand("theory", "run the theory checks");
  theory->add_option("--seed", theory_seed, "seed for the check suite");
  theory->add_option("-o,--out", theory_out, "output root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (theory->parsed()) return cmd_theory(theory_seed, theory_out);
    const auto cfg = load_config(config_path, out_dir);
    if (run->parsed()) return cmd_run(cfg);
    if (ttt->parsed()) return cmd_ttt(cfg, threshold);
    if (ablate->parsed()) {
      const auto s = k_ablation(cfg, ks.empty() ? cfg.ablation_ks : ks);
      return report_grid(cfg, s, cfg.name + "-ablate-k", cfg.name + "-ablate-k.txt");
    }
    if (sweep->parsed()) {
      const auto s = sensitivity_sweep(cfg, etas.empty() ? cfg.sweep_etas : etas,
                                       ms.empty() ? cfg.sweep_ms : ms);
      return report_grid(cfg, s, cfg.name + "-sweep", cfg.name + "-sweep.txt");
    }
    if (plot->parsed()) {
      std::printf("%s\n", write_plot_data(cfg, experiment.empty() ? cfg.name : experiment).c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "cao_bench: config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "cao_bench: divergence: %s\n", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cao_bench: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}

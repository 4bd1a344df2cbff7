#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "cao/errors.hpp"
#include "cao/harness.hpp"

namespace cao::harness {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pm(const MeanStd& s) {
  if (s.count == 0) return "unreached";
  return fmt("%.2f", s.mean) + " ± " + fmt("%.2f", s.std);
}

bool has_full_loss(const RunLog& log) {
  return std::any_of(log.rows.begin(), log.rows.end(),
                     [](const LogRow& r) { return r.full_loss.has_value(); });
}

const LogRow* first_hit(const RunLog& log, double threshold) {
  // Stochastic runs are judged on their full-data evaluations only.
  const bool full_only = has_full_loss(log);
  for (const auto& r : log.rows) {
    if (full_only && !r.full_loss) continue;
    if (r.tracked_loss() <= threshold) return &r;
  }
  return nullptr;
}

std::vector<double> reached_values(const std::vector<std::optional<long>>& v) {
  std::vector<double> out;
  for (const auto& x : v) {
    if (x) out.push_back(static_cast<double>(*x));
  }
  return out;
}

std::string seed_list(const std::vector<std::optional<long>>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += v[i] ? std::to_string(*v[i]) : "unreached";
  }
  return s;
}

// Refresh steps in [0, steps) and the HVPs they cost.
long refresh_hvp_budget(const CaoConfig& c, long steps) {
  if (c.warm_steps == 0) return expected_hvp_calls(c, steps);
  if (c.k == 0) return 0;
  long n = 0;
  for (long t = c.warm_steps; t < steps; ++t) {
    if (t == c.warm_steps || t % c.m == 0) ++n;
  }
  return n * (c.t_pow + 1) * static_cast<long>(c.k);
}

double summary_number(const RunLog& log, const char* key) {
  if (!log.summary.is_object() || !log.summary.contains(key) || !log.summary.at(key).is_number()) {
    return std::nan("");
  }
  return log.summary.at(key).get<double>();
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  return s;
}

std::optional<long> first_hit_step(const RunLog& log, double threshold) {
  const auto* r = first_hit(log, threshold);
  if (!r) return std::nullopt;
  return r->step;
}

std::optional<long> first_hit_epoch(const RunLog& log, double threshold) {
  const auto* r = first_hit(log, threshold);
  if (!r) return std::nullopt;
  return r->epoch;
}

const TttRow& TttTable::row(const std::string& optimizer) const {
  for (const auto& r : rows) {
    if (r.optimizer == optimizer) return r;
  }
  throw Error("no row for optimizer '" + optimizer + "'");
}

std::string TttTable::render() const {
  std::ostringstream out;
  out << "# time to threshold " << fmt("%g", threshold);
  if (!baseline.empty()) out << ", speedup = " << baseline << " mean / optimizer mean";
  out << "\n";
  out << "optimizer\treached\tstep\tepoch\tspeedup\tper_seed_step\n";
  for (const auto& r : rows) {
    out << r.optimizer << '\t' << r.reached << '/' << r.runs;
    if (r.reached < r.runs && r.reached > 0) {
      out << " (" << (r.runs - r.reached) << " unreached excluded)";
    }
    out << '\t' << pm(r.step) << '\t' << pm(r.epoch) << '\t'
        << (r.speedup ? fmt("%.2fx", *r.speedup) : std::string("n/a")) << '\t'
        << seed_list(r.per_seed) << '\n';
  }
  return out.str();
}

TttTable time_to_threshold(const LogSet& logs, double threshold, const std::string& baseline) {
  if (logs.empty()) throw Error("time_to_threshold: no logs");
  TttTable t;
  t.threshold = threshold;
  t.baseline = baseline;
  for (const auto& [name, runs] : logs) {
    if (runs.empty()) throw Error("time_to_threshold: optimizer '" + name + "' has no logs");
    TttRow r;
    r.optimizer = name;
    r.runs = runs.size();
    std::vector<std::optional<long>> epochs;
    for (const auto& log : runs) {
      r.per_seed.push_back(first_hit_step(log, threshold));
      epochs.push_back(first_hit_epoch(log, threshold));
    }
    const auto steps = reached_values(r.per_seed);
    r.reached = steps.size();
    r.step = mean_std(steps);
    r.epoch = mean_std(reached_values(epochs));
    t.rows.push_back(std::move(r));
  }
  const auto base = std::find_if(t.rows.begin(), t.rows.end(),
                                 [&](const TttRow& r) { return r.optimizer == baseline; });
  if (base != t.rows.end() && base->step.count > 0) {
    for (auto& r : t.rows) {
      if (r.step.count > 0 && r.step.mean > 0.0) r.speedup = base->step.mean / r.step.mean;
    }
  }
  return t;
}

std::vector<TttTable> threshold_sweep(const LogSet& logs, const std::vector<double>& thresholds,
                                      const std::string& baseline) {
  if (thresholds.empty()) throw Error("threshold_sweep: no thresholds");
  std::vector<TttTable> out;
  for (double th : thresholds) out.push_back(time_to_threshold(logs, th, baseline));
  return out;
}

std::string render_threshold_sweep(const std::vector<TttTable>& tables) {
  if (tables.empty()) return {};
  std::ostringstream out;
  out << "# first-hit step (mean over reached seeds) and speedup vs " << tables.front().baseline
      << "\nthreshold";
  for (const auto& r : tables.front().rows) out << '\t' << r.optimizer << "_step";
  for (const auto& r : tables.front().rows) out << '\t' << r.optimizer << "_speedup";
  out << '\n';
  for (const auto& t : tables) {
    out << fmt("%g", t.threshold);
    for (const auto& r : t.rows) {
      out << '\t' << (r.step.count ? fmt("%.2f", r.step.mean) : std::string("unreached"));
      if (r.step.count && r.reached < r.runs) out << '(' << r.reached << '/' << r.runs << ')';
    }
    for (const auto& r : t.rows) {
      out << '\t' << (r.speedup ? fmt("%.2fx", *r.speedup) : std::string("n/a"));
    }
    out << '\n';
  }
  return out.str();
}

AblationSummary summarize_logs(const std::string& title, const LogSet& logs, double threshold) {
  if (logs.empty()) throw Error("summarize_logs: no logs");
  AblationSummary s;
  s.title = title;
  for (const auto& [name, runs] : logs) {
    AblationCell c;
    c.label = name;
    std::vector<double> finals;
    for (const auto& log : runs) {
      c.first_hit.push_back(first_hit_step(log, threshold));
      if (log.diverged()) {
        ++c.diverged;
      } else {
        finals.push_back(summary_number(log, "final_loss"));
      }
      for (const auto& r : log.rows) c.clamp_events += r.clamped ? 1 : 0;
      const double h = summary_number(log, "hvp_calls");
      if (std::isfinite(h)) c.hvp_calls += static_cast<long>(h);
      const auto spec = optimizer_from_json(log.header.at("spec"));
      if (const auto* cao = std::get_if<CaoConfig>(&spec)) {
        c.expected_hvp_calls += refresh_hvp_budget(*cao, static_cast<long>(log.rows.size()));
      }
    }
    c.first_hit_stats = mean_std(reached_values(c.first_hit));
    c.final_loss = mean_std(finals);
    s.cells.push_back(std::move(c));
  }
  return s;
}

std::string AblationSummary::render() const {
  std::ostringstream out;
  out << "# " << title << "\n";
  out << "cell\treached\tfirst_hit_step\tfinal_loss\tdiverged\tclamp_events\thvp_calls\t"
         "expected_hvp_calls\tunstable\tper_seed_step\n";
  for (const auto& c : cells) {
    out << c.label << '\t' << c.first_hit_stats.count << '/' << c.first_hit.size() << '\t'
        << pm(c.first_hit_stats) << '\t';
    if (c.final_loss.count) {
      out << fmt("%.6g", c.final_loss.mean) << " ± " << fmt("%.2g", c.final_loss.std);
    } else {
      out << "n/a";
    }
    out << '\t' << c.diverged << '\t' << c.clamp_events << '\t' << c.hvp_calls << '\t'
        << c.expected_hvp_calls << '\t' << ((c.diverged || c.clamp_events) ? "yes" : "no") << '\t'
        << seed_list(c.first_hit) << '\n';
  }
  return out.str();
}

std::string emit_plot_data(const LogSet& logs) {
  if (logs.empty()) throw Error("emit_plot_data: no logs");
  const std::size_t seeds = logs.begin()->second.size();
  long max_step = -1;
  for (const auto& [name, runs] : logs) {
    if (runs.size() != seeds) {
      throw Error("emit_plot_data: optimizer '" + name + "' has " + std::to_string(runs.size()) +
                  " seeds, expected " + std::to_string(seeds));
    }
    for (const auto& log : runs) {
      if (!log.rows.empty()) max_step = std::max(max_step, log.rows.back().step);
    }
  }

  std::ostringstream out;
  out << "step";
  for (const auto& [name, runs] : logs) {
    out << '\t' << name << "_mean\t" << name << (seeds == 1 ? "_std_single_seed" : "_std");
  }
  out << '\n';

  // step -> values per optimizer, in log order
  std::vector<std::map<long, std::vector<double>>> curves;
  for (const auto& [name, runs] : logs) {
    auto& m = curves.emplace_back();
    for (const auto& log : runs) {
      const bool full_only = has_full_loss(log);
      for (const auto& r : log.rows) {
        if (full_only && !r.full_loss) continue;
        m[r.step].push_back(r.tracked_loss());
      }
    }
  }
  for (long t = 0; t <= max_step; ++t) {
    bool any = false;
    for (const auto& m : curves) any = any || m.count(t);
    if (!any) continue;
    out << t;
    for (const auto& m : curves) {
      const auto it = m.find(t);
      if (it == m.end()) {
        out << "\tnan\tnan";
        continue;
      }
      const auto s = mean_std(it->second);
      out << '\t' << fmt("%.10g", s.mean) << '\t' << fmt("%.10g", s.std);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cao::harness

#include <algorithm>
#include <fstream>
#include <set>

#include "cao/errors.hpp"
#include "cao/harness.hpp"

namespace cao::harness {
namespace {

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

const NamedOptimizer& ExperimentConfig::optimizer(const std::string& n) const {
  for (const auto& o : optimizers) {
    if (o.name == n) return o;
  }
  throw ConfigError("no optimizer named '" + n + "'");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.name = field<std::string>(j, "name", "config");
  if (!valid_name(c.name)) throw ConfigError("config.name must match [A-Za-z0-9_.-]+");
  c.problem = field<nlohmann::json>(j, "problem", "config");
  make_problem(c.problem);  // validate early

  const auto opts = field<nlohmann::json>(j, "optimizers", "config");
  if (!opts.is_array() || opts.empty()) throw ConfigError("config.optimizers must be a non-empty list");
  std::set<std::string> names;
  for (const auto& o : opts) {
    NamedOptimizer n;
    n.name = field<std::string>(o, "name", "optimizer");
    if (!valid_name(n.name)) throw ConfigError("optimizer name '" + n.name + "' is not a valid file name");
    if (!names.insert(n.name).second) throw ConfigError("duplicate optimizer name '" + n.name + "'");
    n.spec = optimizer_from_json(o);
    c.optimizers.push_back(std::move(n));
  }

  c.seeds = field<std::vector<std::uint64_t>>(j, "seeds", "config");
  if (c.seeds.empty()) throw ConfigError("config.seeds needs at least one seed");

  const auto budget = field<nlohmann::json>(j, "budget", "config");
  c.steps = field<long>(budget, "steps", "budget");
  if (c.steps < 1) throw ConfigError("budget.steps must be >= 1");
  c.batch_size = field_or<std::size_t>(budget, "batch_size", 0, "budget");
  c.eval_every = field_or<long>(budget, "eval_every", 1, "budget");
  if (c.eval_every < 1) throw ConfigError("budget.eval_every must be >= 1");

  c.threshold = field<double>(j, "threshold", "config");
  c.thresholds = field_or<std::vector<double>>(j, "thresholds", {}, "config");
  c.baseline = field_or<std::string>(j, "baseline", c.optimizers.front().name, "config");
  c.optimizer(c.baseline);
  c.divergence_factor = field_or<double>(j, "divergence_factor", c.divergence_factor, "config");
  if (!(c.divergence_factor > 1.0)) throw ConfigError("config.divergence_factor must be > 1");
  c.out_dir = field_or<std::string>(j, "out_dir", "out", "config");

  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    c.ablation_base = field<std::string>(a, "base", "ablation");
    c.ablation_ks = field_or<std::vector<std::size_t>>(a, "ks", c.ablation_ks, "ablation");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    c.sweep_base = field<std::string>(s, "base", "sweep");
    c.sweep_etas = field<std::vector<double>>(s, "etas", "sweep");
    c.sweep_ms = field<std::vector<long>>(s, "ms", "sweep");
  }
  for (const auto* base : {&c.ablation_base, &c.sweep_base}) {
    if (base->empty()) continue;
    if (!std::holds_alternative<CaoConfig>(c.optimizer(*base).spec)) {
      throw ConfigError("ablation/sweep base '" + *base + "' must be a cao optimizer");
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json opts = nlohmann::json::array();
  for (const auto& o : optimizers) {
    nlohmann::json j = cao::to_json(o.spec);
    j["name"] = o.name;
    opts.push_back(j);
  }
  nlohmann::json j = {{"name", name},
                      {"problem", problem},
                      {"optimizers", opts},
                      {"seeds", seeds},
                      {"budget", {{"steps", steps}, {"batch_size", batch_size}, {"eval_every", eval_every}}},
                      {"threshold", threshold},
                      {"thresholds", thresholds},
                      {"baseline", baseline},
                      {"divergence_factor", divergence_factor},
                      {"out_dir", out_dir.string()}};
  if (!ablation_base.empty()) j["ablation"] = {{"base", ablation_base}, {"ks", ablation_ks}};
  if (!sweep_base.empty()) j["sweep"] = {{"base", sweep_base}, {"etas", sweep_etas}, {"ms", sweep_ms}};
  return j;
}

fs::path log_root(const ExperimentConfig& cfg, const std::string& experiment) {
  return cfg.out_dir / "logs" / experiment;
}

fs::path log_path(const ExperimentConfig& cfg, const std::string& experiment,
                  const std::string& optimizer, std::uint64_t seed) {
  return log_root(cfg, experiment) / optimizer / (std::to_string(seed) + ".log");
}

fs::path tables_dir(const ExperimentConfig& cfg) { return cfg.out_dir / "tables"; }
fs::path figures_dir(const ExperimentConfig& cfg) { return cfg.out_dir / "figures-data"; }

}  // namespace cao::harness

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cao/errors.hpp"
#include "cao/harness.hpp"
#include "doctest.h"

using namespace cao;
using namespace cao::harness;

namespace {

RunLog fake_log(const std::string& opt, std::uint64_t seed, const std::vector<double>& losses,
                long steps_per_epoch = 10) {
  RunLog log;
  log.header = {{"type", "header"}, {"optimizer", opt}, {"seed", seed}};
  for (std::size_t t = 0; t < losses.size(); ++t) {
    LogRow r;
    r.step = static_cast<long>(t);
    r.epoch = r.step / steps_per_epoch;
    r.loss = losses[t];
    log.rows.push_back(r);
  }
  log.summary = {{"type", "summary"}, {"diverged", false}, {"final_loss", losses.back()}};
  return log;
}

// Loss 1 until `hit`, then 0.
RunLog hit_at(const std::string& opt, std::uint64_t seed, long hit, long steps = 100) {
  std::vector<double> l(static_cast<std::size_t>(steps), 1.0);
  for (long t = hit; t < steps; ++t) l[static_cast<std::size_t>(t)] = 0.0;
  return fake_log(opt, seed, l);
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cao-test-harness-" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json small_config(const fs::path& out) {
  return {
      {"name", "tiny"},
      {"problem", {{"type", "logreg"}, {"n_features", 5}, {"n_samples", 96}, {"seed", 2}}},
      {"optimizers",
       {{{"name", "cao"}, {"type", "cao"}, {"alpha", 0.5}, {"k", 1}, {"m", 10}, {"eta", 1.0}},
        {{"name", "sgd"}, {"type", "sgd"}, {"lr", 0.2}, {"momentum", 0.9}},
        {{"name", "adam"}, {"type", "adam"}, {"lr", 0.05}}}},
      {"seeds", {0, 1, 2}},
      {"budget", {{"steps", 30}, {"batch_size", 32}, {"eval_every", 2}}},
      {"threshold", 0.5},
      {"thresholds", {0.6, 0.55, 0.5, 0.45, 0.4}},
      {"baseline", "sgd"},
      {"out_dir", out.string()},
      {"ablation", {{"base", "cao"}, {"ks", {0, 1, 2, 3}}}},
      {"sweep", {{"base", "cao"}, {"etas", {0.5, 1.0, 2.0}}, {"ms", {5, 10, 20}}}}};
}

// Log text with every "wall*" key removed.
std::string strip_wall(const fs::path& p) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    for (auto it = j.begin(); it != j.end();) {
      if (it.key().rfind("wall", 0) == 0) {
        it = j.erase(it);
      } else {
        ++it;
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<fs::path> all_logs(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".log") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("mean and sample standard deviation") {
  const auto s = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.std == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(mean_std({3}).std == 0.0);
  CHECK(mean_std({}).count == 0);
}

TEST_CASE("first hit uses full-data rows when present") {
  auto log = fake_log("a", 0, {1.0, 0.4, 0.3, 0.2, 0.1});
  CHECK(first_hit_step(log, 0.35) == 2);
  CHECK(first_hit_step(log, 0.01) == std::nullopt);
  log.rows[1].full_loss = 0.9;
  log.rows[3].full_loss = 0.25;
  CHECK(first_hit_step(log, 0.35) == 3);
  auto epochs = fake_log("a", 0, std::vector<double>(30, 1.0), 10);
  epochs.rows[24].loss = 0.0;
  CHECK(first_hit_epoch(epochs, 0.5) == 2);
}

TEST_CASE("time-to-threshold table formatting") {
  LogSet logs;
  logs["cao"] = {hit_at("cao", 0, 19), hit_at("cao", 1, 19), hit_at("cao", 2, 19)};
  logs["sgd"] = {hit_at("sgd", 0, 59), hit_at("sgd", 1, 59), hit_at("sgd", 2, 59)};
  logs["adam"] = {hit_at("adam", 0, 30), hit_at("adam", 1, 200), hit_at("adam", 2, 40)};
  const auto t = time_to_threshold(logs, 0.5, "sgd");
  const auto& cao = t.row("cao");
  CHECK(cao.step.mean == 19.0);
  CHECK(cao.reached == 3);
  CHECK(*cao.speedup == doctest::Approx(59.0 / 19.0));
  const auto text = t.render();
  CHECK(text.find("19.00 ± 0.00") != std::string::npos);
  CHECK(text.find("3.11x") != std::string::npos);
  CHECK(text.find("1.00x") != std::string::npos);
  // adam reaches on 2 of 3 seeds; its mean covers only those.
  const auto& adam = t.row("adam");
  CHECK(adam.reached == 2);
  CHECK(adam.step.mean == 35.0);
  CHECK(text.find("(1 unreached excluded)") != std::string::npos);
  CHECK(text.find("30,unreached,40") != std::string::npos);
  CHECK_THROWS_AS(t.row("lbfgs"), Error);
  CHECK_THROWS_AS(time_to_threshold({}, 0.5, "sgd"), Error);
}

TEST_CASE("speedup 2.95x and unreached rows") {
  LogSet logs;
  logs["base"] = {hit_at("base", 0, 59)};
  logs["fast"] = {hit_at("fast", 0, 20)};
  logs["never"] = {fake_log("never", 0, std::vector<double>(50, 1.0))};
  const auto t = time_to_threshold(logs, 0.5, "base");
  const auto text = t.render();
  CHECK(text.find("2.95x") != std::string::npos);
  CHECK(!t.row("never").speedup);
  CHECK(text.find("never\t0/1\tunreached\tunreached\tn/a") != std::string::npos);
}

TEST_CASE("threshold sweep is monotone in the threshold") {
  LogSet logs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    std::vector<double> a, b;
    for (int t = 0; t < 200; ++t) {
      a.push_back(std::exp(-0.05 * t * (1 + 0.1 * static_cast<double>(s))));
      b.push_back(std::exp(-0.02 * t));
    }
    logs["a"].push_back(fake_log("a", s, a));
    logs["b"].push_back(fake_log("b", s, b));
  }
  const std::vector<double> th{0.5, 0.2, 0.1, 0.05, 0.02};
  const auto tables = threshold_sweep(logs, th, "b");
  REQUIRE(tables.size() == 5);
  for (std::size_t i = 1; i < tables.size(); ++i) {
    CHECK(tables[i].row("a").step.mean >= tables[i - 1].row("a").step.mean);
    CHECK(tables[i].row("b").step.mean >= tables[i - 1].row("b").step.mean);
  }
  const auto text = render_threshold_sweep(tables);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 5);
  CHECK_THROWS_AS(threshold_sweep(logs, {}, "b"), Error);
}

TEST_CASE("plot data columns, single seed, and seed mismatch") {
  LogSet logs;
  logs["a"] = {fake_log("a", 0, {4, 2, 1}), fake_log("a", 1, {2, 2, 3})};
  logs["b"] = {fake_log("b", 0, {1, 1, 1}), fake_log("b", 1, {1, 3, 1})};
  const auto text = emit_plot_data(logs);
  std::istringstream in(text);
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header == "step\ta_mean\ta_std\tb_mean\tb_std");
  CHECK(row0.rfind("0\t3\t", 0) == 0);
  CHECK(row1.rfind("1\t2\t0\t2\t", 0) == 0);

  LogSet single;
  single["a"] = {fake_log("a", 0, {1, 0.5})};
  CHECK(emit_plot_data(single).rfind("step\ta_mean\ta_std_single_seed\n", 0) == 0);

  logs["b"].pop_back();
  CHECK_THROWS_AS(emit_plot_data(logs), Error);
}

TEST_CASE("comparison runs share schedules and rerun byte for byte") {
  const auto out = scratch("cmp");
  const auto cfg = ExperimentConfig::from_json(small_config(out));
  const auto results = run_comparison(cfg);
  CHECK(results.size() == 9);
  const auto logs = all_logs(log_root(cfg, "tiny"));
  CHECK(logs.size() == 9);
  CHECK(fs::exists(log_path(cfg, "tiny", "cao", 2)));

  std::map<std::uint64_t, std::set<std::string>> hashes;
  for (const auto& r : results) {
    CHECK_FALSE(r.diverged);
    hashes[r.seed].insert(r.schedule_hash);
  }
  for (const auto& [seed, h] : hashes) CHECK(h.size() == 1);
  CHECK(*hashes[0].begin() != *hashes[1].begin());

  std::vector<std::string> first;
  for (const auto& p : logs) first.push_back(strip_wall(p));
  run_comparison(cfg);
  for (std::size_t i = 0; i < logs.size(); ++i) CHECK(strip_wall(logs[i]) == first[i]);

  const auto set = load_logs(log_root(cfg, "tiny"));
  REQUIRE(set.size() == 3);
  const auto& log = set.at("cao").at(1);
  CHECK(log.seed() == 1);
  CHECK(log.optimizer() == "cao");
  CHECK(log.header.at("format") == "cao-runlog");
  CHECK(log.header.at("version") == kLogFormatVersion);
  CHECK(log.rows.size() == 30);
  // Stochastic run: full-data loss every eval_every steps, epochs of 3 batches.
  CHECK(log.rows[0].full_loss.has_value());
  CHECK_FALSE(log.rows[1].full_loss.has_value());
  CHECK(log.rows[3].epoch == 1);
  CHECK(log.rows[0].refreshed);
  CHECK(log.rows[10].refreshed);
  CHECK(log.summary.at("hvp_calls") == 3 * 11);

  const auto t = time_to_threshold(set, cfg.threshold, cfg.baseline);
  CHECK(t.rows.size() == 3);
  fs::remove_all(out);
}

TEST_CASE("rank ablation and sensitivity sweep from logs") {
  const auto out = scratch("abl");
  const auto cfg = ExperimentConfig::from_json(small_config(out));
  const auto abl = k_ablation(cfg, cfg.ablation_ks);
  CHECK(all_logs(log_root(cfg, "tiny-ablate-k")).size() == 12);
  REQUIRE(abl.cells.size() == 4);
  for (const auto& c : abl.cells) {
    CHECK(c.hvp_calls == c.expected_hvp_calls);
    CHECK(c.first_hit.size() == 3);
  }
  const auto k0 = std::find_if(abl.cells.begin(), abl.cells.end(),
                               [](const AblationCell& c) { return c.label == "k0"; });
  REQUIRE(k0 != abl.cells.end());
  CHECK(k0->hvp_calls == 0);

  const auto sweep = sensitivity_sweep(cfg, cfg.sweep_etas, cfg.sweep_ms);
  CHECK(sweep.cells.size() == 9);
  std::set<std::string> labels;
  for (const auto& c : sweep.cells) {
    labels.insert(c.label);
    CHECK(c.hvp_calls == c.expected_hvp_calls);
    CHECK(c.hvp_calls > 0);
  }
  CHECK(labels.count("eta0.5_m5") == 1);
  CHECK(labels.count("eta2_m20") == 1);
  const auto text = sweep.render();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 9);
  fs::remove_all(out);
}

TEST_CASE("divergence is detected and summarized") {
  const auto out = scratch("div");
  auto j = small_config(out);
  j["problem"] = {{"type", "quadratic"}, {"spectrum", {2, 8}}, {"rotate", false}};
  j["optimizers"] = {{{"name", "hot"}, {"type", "sgd"}, {"lr", 1.0}, {"momentum", 0.0}}};
  j["baseline"] = "hot";
  j.erase("ablation");
  j.erase("sweep");
  j["budget"] = {{"steps", 100}};
  const auto cfg = ExperimentConfig::from_json(j);
  const auto res = run_comparison(cfg);
  for (const auto& r : res) {
    CHECK(r.diverged);
    CHECK(r.steps_run < 100);
  }
  const auto logs = load_logs(log_root(cfg, "tiny"));
  CHECK(logs.at("hot").front().diverged());
  CHECK(logs.at("hot").front().summary.at("final_loss").is_null());
  fs::remove_all(out);
}

TEST_CASE("config validation") {
  const auto base = small_config("out");
  auto bad = [&](auto mutate) {
    auto j = base;
    mutate(j);
    return j;
  };
  CHECK_NOTHROW(ExperimentConfig::from_json(base));
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j.erase("name"); })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["name"] = "a/b"; })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["seeds"] = nlohmann::json::array(); })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["budget"]["steps"] = 0; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["baseline"] = "nope"; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["divergence_factor"] = 0.5; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["optimizers"][1]["name"] = "cao"; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["ablation"]["base"] = "sgd"; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["problem"]["type"] = "x"; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](auto& j) { j["threshold"] = "low"; })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/cfg.json"), Error);

  const auto cfg = ExperimentConfig::from_json(base);
  const auto again = ExperimentConfig::from_json(cfg.to_json());
  CHECK(again.to_json() == cfg.to_json());
}

TEST_CASE("checked-in configs parse") {
  for (const char* name : {"skewed_quadratic.json", "mlp_synthetic.json"}) {
    INFO(name);
    CHECK_NOTHROW(ExperimentConfig::from_file(fs::path(CAO_SOURCE_DIR) / "configs" / name));
  }
}

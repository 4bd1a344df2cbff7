#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cao/errors.hpp"
#include "cao/harness.hpp"

namespace cao::harness {

std::string RunLog::optimizer() const { return header.value("optimizer", std::string{}); }

std::uint64_t RunLog::seed() const { return header.value("seed", std::uint64_t{0}); }

bool RunLog::diverged() const {
  // A log without a summary line was cut short.
  if (!summary.is_object()) return true;
  return summary.value("diverged", false);
}

RunLog read_runlog(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open log " + path.string());
  RunLog log;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const auto type = j.value("type", std::string{});
    if (type == "header") {
      if (j.value("format", std::string{}) != "cao-runlog") {
        throw IoError(path.string() + ": not a run log");
      }
      if (j.value("version", 0) != kLogFormatVersion) {
        throw IoError(path.string() + ": unsupported log version");
      }
      log.header = std::move(j);
    } else if (type == "step") {
      LogRow r;
      r.step = j.at("step").get<long>();
      r.epoch = j.at("epoch").get<long>();
      // NaN is written as null.
      r.loss = j.at("loss").is_number() ? j.at("loss").get<double>()
                                        : std::numeric_limits<double>::quiet_NaN();
      if (j.contains("full_loss")) {
        r.full_loss = j.at("full_loss").is_number() ? j.at("full_loss").get<double>()
                                                    : std::numeric_limits<double>::quiet_NaN();
      }
      r.refreshed = j.value("refreshed", false);
      r.clamped = j.value("clamped", false);
      log.rows.push_back(r);
    } else if (type == "summary") {
      log.summary = std::move(j);
    } else {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": unknown record type");
    }
  }
  if (log.header.is_null()) throw IoError(path.string() + ": missing header");
  return log;
}

LogSet load_logs(const fs::path& experiment_dir) {
  if (!fs::is_directory(experiment_dir)) {
    throw IoError("no log directory " + experiment_dir.string());
  }
  LogSet set;
  for (const auto& opt_dir : fs::directory_iterator(experiment_dir)) {
    if (!opt_dir.is_directory()) continue;
    std::vector<RunLog> logs;
    for (const auto& f : fs::directory_iterator(opt_dir.path())) {
      if (f.path().extension() == ".log") logs.push_back(read_runlog(f.path()));
    }
    if (logs.empty()) continue;
    std::sort(logs.begin(), logs.end(),
              [](const RunLog& a, const RunLog& b) { return a.seed() < b.seed(); });
    set[opt_dir.path().filename().string()] = std::move(logs);
  }
  return set;
}

}  // namespace cao::harness

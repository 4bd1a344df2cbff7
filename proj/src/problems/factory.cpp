#include "cao/errors.hpp"
#include "cao/problems.hpp"

namespace cao {
namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("problem.") + key + ": " + e.what());
  }
}

template <typename T>
T require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("problem: missing '") + key + "'");
  return get_or<T>(j, key, T{});
}

std::vector<double> quadratic_spectrum(const nlohmann::json& j) {
  auto spectrum = require<std::vector<double>>(j, "spectrum");
  const auto pad_count = get_or<std::size_t>(j, "pad_count", 0);
  if (pad_count > 0) {
    if (!j.contains("pad_value")) throw ConfigError("problem: pad_count requires pad_value");
    spectrum.insert(spectrum.end(), pad_count, j.at("pad_value").get<double>());
  }
  return spectrum;
}

}  // namespace

ProblemPtr make_problem(const nlohmann::json& section) {
  if (!section.is_object()) throw ConfigError("problem section must be an object");
  const auto type = require<std::string>(section, "type");
  try {
    if (type == "quadratic") {
      QuadraticOptions o;
      o.spectrum = quadratic_spectrum(section);
      o.seed = get_or<std::uint64_t>(section, "seed", 0);
      o.rotate = get_or<bool>(section, "rotate", true);
      o.random_center = get_or<bool>(section, "random_center", false);
      return std::make_shared<QuadraticProblem>(std::move(o));
    }
    if (type == "rosenbrock") {
      return std::make_shared<RosenbrockProblem>(require<std::size_t>(section, "n"),
                                                 get_or<double>(section, "init_noise", 0.1));
    }
    if (type == "logreg") {
      LogRegOptions o;
      o.n_features = require<std::size_t>(section, "n_features");
      o.n_samples = require<std::size_t>(section, "n_samples");
      o.seed = get_or<std::uint64_t>(section, "seed", 0);
      o.reg = get_or<double>(section, "reg", o.reg);
      o.separation = get_or<double>(section, "separation", o.separation);
      return std::make_shared<LogRegProblem>(o);
    }
    if (type == "mlp") {
      const auto widths = require<std::vector<std::size_t>>(section, "widths");
      if (widths.size() != 3) throw ConfigError("mlp: widths must be [inputs, hidden, classes]");
      MlpOptions o;
      o.inputs = widths[0];
      o.hidden = widths[1];
      o.classes = widths[2];
      o.n_samples = get_or<std::size_t>(section, "n_samples", o.n_samples);
      o.seed = get_or<std::uint64_t>(section, "seed", 0);
      o.separation = get_or<double>(section, "separation", o.separation);
      o.noise = get_or<double>(section, "noise", o.noise);
      o.feature_scale = get_or<double>(section, "feature_scale", o.feature_scale);
      o.feature_offset = get_or<double>(section, "feature_offset", o.feature_offset);
      return std::make_shared<MlpProblem>(o);
    }
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown problem type '" + type + "'");
}

}  // namespace cao

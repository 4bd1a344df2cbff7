#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "cao/errors.hpp"
#include "cao/optimizer.hpp"

namespace cao {
namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("optimizer.") + key + ": " + e.what());
  }
}

}  // namespace

std::string optimizer_kind(const OptimizerSpec& spec) {
  switch (spec.index()) {
    case 0:
      return "cao";
    case 1:
      return "sgd";
    default:
      return "adam";
  }
}

nlohmann::json to_json(const OptimizerSpec& spec) {
  if (const auto* c = std::get_if<CaoConfig>(&spec)) {
    return {{"type", "cao"},         {"alpha", c->alpha},
            {"k", c->k},             {"m", c->m},
            {"eta", c->eta},         {"clip", c->clip_c},
            {"weight_decay", c->weight_decay}, {"t_pow", c->t_pow},
            {"warm_steps", c->warm_steps},     {"floor", c->floor},
            {"eta_scaled_k0", c->eta_scaled_k0}, {"seed", c->seed},
            {"reorth", c->reorth}};
  }
  if (const auto* s = std::get_if<SgdConfig>(&spec)) {
    return {{"type", "sgd"}, {"lr", s->lr}, {"momentum", s->momentum},
            {"weight_decay", s->weight_decay}, {"clip", s->clip}};
  }
  const auto& a = std::get<AdamConfig>(spec);
  return {{"type", "adam"}, {"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2},
          {"eps", a.eps}, {"weight_decay", a.weight_decay}, {"clip", a.clip}};
}

OptimizerSpec optimizer_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("optimizer needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "cao") {
    CaoConfig c;
    read_opt(j, "alpha", c.alpha);
    read_opt(j, "k", c.k);
    read_opt(j, "m", c.m);
    read_opt(j, "eta", c.eta);
    read_opt(j, "clip", c.clip_c);
    read_opt(j, "weight_decay", c.weight_decay);
    read_opt(j, "t_pow", c.t_pow);
    read_opt(j, "warm_steps", c.warm_steps);
    read_opt(j, "floor", c.floor);
    read_opt(j, "eta_scaled_k0", c.eta_scaled_k0);
    read_opt(j, "seed", c.seed);
    read_opt(j, "reorth", c.reorth);
    c.validate();
    return c;
  }
  if (type == "sgd") {
    SgdConfig s;
    read_opt(j, "lr", s.lr);
    read_opt(j, "momentum", s.momentum);
    read_opt(j, "weight_decay", s.weight_decay);
    read_opt(j, "clip", s.clip);
    s.validate();
    return s;
  }
  if (type == "adam") {
    AdamConfig a;
    if (!j.contains("lr")) throw ConfigError("adam: learning rate must be stated explicitly");
    read_opt(j, "lr", a.lr);
    read_opt(j, "beta1", a.beta1);
    read_opt(j, "beta2", a.beta2);
    read_opt(j, "eps", a.eps);
    read_opt(j, "weight_decay", a.weight_decay);
    read_opt(j, "clip", a.clip);
    a.validate();
    return a;
  }
  throw ConfigError("unknown optimizer type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "cao-checkpoint";
constexpr int kVersion = 1;

void write_doubles(std::ostream& out, const char* tag, std::span<const double> v) {
  out << tag << ' ' << v.size();
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out << ' ' << buf;
  }
  out << '\n';
}

void expect(std::istream& in, const std::string& tag) {
  std::string got;
  if (!(in >> got) || got != tag) {
    throw IoError("checkpoint: expected '" + tag + "', found '" + got + "'");
  }
}

double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw IoError("checkpoint: truncated");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw IoError("checkpoint: bad number '" + tok + "'");
  return v;
}

template <typename T>
T read_int(std::istream& in) {
  T v{};
  if (!(in >> v)) throw IoError("checkpoint: truncated");
  return v;
}

ParamVector read_doubles(std::istream& in, const std::string& tag) {
  expect(in, tag);
  const auto n = read_int<std::size_t>(in);
  ParamVector v(n);
  for (auto& x : v) x = read_double(in);
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const OptimizerState& s) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "step " << s.step << '\n';
  out << "counters " << s.hvp_calls << ' ' << s.refreshes << ' ' << s.refresh_failures << '\n';
  write_doubles(out, "theta", s.theta);
  write_doubles(out, "momentum", s.momentum);
  write_doubles(out, "adam_m", s.adam_m);
  write_doubles(out, "adam_v", s.adam_v);
  if (s.sketch) {
    const Sketch& k = *s.sketch;
    out << "sketch " << k.basis.rows() << ' ' << k.basis.cols() << ' ' << k.refreshed_at << ' '
        << k.qr_repairs << '\n';
    write_doubles(out, "eigvals", k.eigvals);
    write_doubles(out, "basis", k.basis.data());
  } else {
    out << "nosketch\n";
  }
  out << "end\n";
  if (!out) throw IoError("checkpoint: write failed");
}

OptimizerState load_checkpoint(std::istream& in) {
  expect(in, kMagic);
  if (read_int<int>(in) != kVersion) throw IoError("checkpoint: unsupported version");
  OptimizerState s;
  expect(in, "step");
  s.step = read_int<long>(in);
  expect(in, "counters");
  s.hvp_calls = read_int<long>(in);
  s.refreshes = read_int<long>(in);
  s.refresh_failures = read_int<long>(in);
  s.theta = read_doubles(in, "theta");
  s.momentum = read_doubles(in, "momentum");
  s.adam_m = read_doubles(in, "adam_m");
  s.adam_v = read_doubles(in, "adam_v");
  std::string tag;
  in >> tag;
  if (tag == "sketch") {
    Sketch k;
    const auto rows = read_int<std::size_t>(in);
    const auto cols = read_int<std::size_t>(in);
    k.refreshed_at = read_int<long>(in);
    k.qr_repairs = read_int<int>(in);
    k.eigvals = read_doubles(in, "eigvals");
    const ParamVector basis = read_doubles(in, "basis");
    if (basis.size() != rows * cols || k.eigvals.size() != cols) {
      throw IoError("checkpoint: sketch shape mismatch");
    }
    k.basis = DenseMatrix(rows, cols);
    std::copy(basis.begin(), basis.end(), k.basis.data().begin());
    s.sketch = std::move(k);
  } else if (tag != "nosketch") {
    throw IoError("checkpoint: expected sketch section, found '" + tag + "'");
  }
  expect(in, "end");
  return s;
}

}  // namespace cao

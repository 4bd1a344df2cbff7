#include "cao/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cao/errors.hpp"
#include "cao/kernels.hpp"
#include "cao/precondition.hpp"
#include "cao/rng.hpp"

namespace cao {

nlohmann::json TheoryReport::to_json() const {
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : measured) m[k] = v;
  return {{"check", check_name}, {"pass", pass}, {"tolerance", tolerance},
          {"measured", m}, {"notes", notes}};
}

std::string TheoryReport::to_record() const { return to_json().dump(); }

namespace {

void require_full_batch_cfg(const CaoConfig& cfg, const char* who) {
  if (cfg.clip_c != 0.0 || cfg.weight_decay != 0.0) {
    throw ContractViolation(std::string(who) + ": clipping and weight decay must be off");
  }
}

bool literal_k0(const CaoConfig& cfg) { return cfg.k == 0 && !cfg.eta_scaled_k0; }

}  // namespace

TheoryReport check_descent_lemma(const Problem& problem, std::span<const double> theta,
                                 std::span<const double> d, double alpha, double L,
                                 double slack) {
  TheoryReport r;
  r.check_name = "descent_lemma";
  r.tolerance = slack;
  const double f0 = problem.loss(theta);
  const ParamVector g = problem.grad(theta);
  ParamVector moved(theta.begin(), theta.end());
  kernels::axpy(-alpha, d, moved);
  const double lhs = problem.loss(moved);
  const double dd = kernels::dot(d, d);
  const double rhs = f0 - alpha * kernels::dot(g, d) + 0.5 * L * alpha * alpha * dd;
  r.measured = {{"lhs", lhs}, {"rhs", rhs}, {"gap", rhs - lhs}, {"L", L}, {"alpha", alpha}};
  r.pass = lhs <= rhs + slack;
  return r;
}

TheoryReport check_descent_lemma(const Problem& problem, std::span<const double> theta,
                                 std::span<const double> d, double alpha) {
  if (!problem.meta().smoothness_L) {
    throw UnsupportedOperation(problem.name() + ": no smoothness constant declared");
  }
  return check_descent_lemma(problem, theta, d, alpha, *problem.meta().smoothness_L);
}

double estimate_smoothness(const Problem& problem, const std::vector<ParamVector>& points) {
  double L = 0.0;
  for (const auto& p : points) L = std::max(L, symmetric_spectral_norm(problem.dense_hessian(p)));
  return L;
}

double sufficient_stepsize(double L, double eta) {
  if (!(L > 0.0) || !(eta > 0.0)) throw ContractViolation("sufficient_stepsize: L, eta must be > 0");
  return eta * eta / (L * (L + eta));
}

double stationarity_stepsize(double L, double eta, double c) {
  if (!(L > 0.0) || !(eta > 0.0) || !(c > 0.0)) {
    throw ContractViolation("stationarity_stepsize: arguments must be > 0");
  }
  return c * eta / L;
}

TheoryReport check_sufficient_descent(const Problem& problem, const CaoConfig& cfg_in,
                                      const DescentCheckOptions& opts) {
  require_full_batch_cfg(cfg_in, "check_sufficient_descent");
  if (!problem.meta().smoothness_L) {
    throw UnsupportedOperation(problem.name() + ": sufficient descent needs L");
  }
  const double L = *problem.meta().smoothness_L;
  CaoConfig cfg = cfg_in;
  cfg.alpha = (literal_k0(cfg) ? 1.0 / L : sufficient_stepsize(L, cfg.eta)) * opts.alpha_scale;
  cfg.validate();

  TheoryReport r;
  r.check_name = "sufficient_descent";
  r.tolerance = opts.slack;

  OptimizerState state = OptimizerState::start(problem.initial_point(opts.seed));
  long violations = 0;
  long fallback_violations = 0;
  long clamp_events = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  double worst_step = -1;
  double min_lambda = std::numeric_limits<double>::infinity();
  long steps_run = 0;
  bool diverged = false;

  for (long t = 0; t < opts.steps; ++t) {
    double f_next = 0.0;
    StepRecord rec;
    try {
      rec = cao_step(state, problem, Batch::all(), cfg);
      f_next = problem.loss(state.theta);
    } catch (const Error& e) {
      diverged = true;
      r.notes.push_back(std::string("diverged: ") + e.what());
      break;
    }
    ++steps_run;

    double lambda_min = 1.0;
    if (cfg.k == 0) {
      lambda_min = cfg.eta_scaled_k0 ? 1.0 / cfg.eta : 1.0;
    } else if (state.sketch) {
      const DampedPreconditioner pc(*state.sketch, cfg.eta, cfg.floor);
      lambda_min = min_eigenvalue(pc);
      if (pc.clamped()) ++clamp_events;
    }
    if (!literal_k0(cfg) && lambda_min < 1.0 / (L + cfg.eta) * (1.0 - 1e-12)) ++fallback_violations;
    min_lambda = std::min(min_lambda, lambda_min);

    const double required = 0.5 * cfg.alpha * lambda_min * rec.grad_norm * rec.grad_norm;
    const double margin = (rec.loss - f_next) - required;
    if (margin < min_margin) {
      min_margin = margin;
      worst_step = static_cast<double>(t);
    }
    if (margin < -opts.slack) ++violations;
  }

  if (clamp_events > 0) r.notes.push_back("denominator floor fired during the run");
  r.measured = {{"alpha", cfg.alpha},
                {"L", L},
                {"eta", cfg.eta},
                {"steps_run", static_cast<double>(steps_run)},
                {"violations", static_cast<double>(violations)},
                {"fallback_violations", static_cast<double>(fallback_violations)},
                {"min_margin", std::isfinite(min_margin) ? min_margin : 0.0},
                {"worst_step", worst_step},
                {"min_lambda_min", std::isfinite(min_lambda) ? min_lambda : 0.0},
                {"clamp_events", static_cast<double>(clamp_events)},
                {"diverged", diverged ? 1.0 : 0.0}};
  r.pass = !diverged && violations == 0 && fallback_violations == 0 && steps_run == opts.steps;
  return r;
}

TheoryReport check_stationarity_rate(const Problem& problem, const CaoConfig& cfg,
                                     const StationarityOptions& opts) {
  require_full_batch_cfg(cfg, "check_stationarity_rate");
  cfg.validate();
  if (opts.horizons.empty()) throw ContractViolation("check_stationarity_rate: no horizons");
  std::vector<long> horizons = opts.horizons;
  std::sort(horizons.begin(), horizons.end());
  const long total = horizons.back();

  TheoryReport r;
  r.check_name = "stationarity_rate";
  r.tolerance = opts.growth_factor;

  OptimizerState state = OptimizerState::start(problem.initial_point(opts.seed));
  std::vector<double> grad_sq;
  double f0 = 0.0;
  double f_best = std::numeric_limits<double>::infinity();
  bool diverged = false;
  for (long t = 0; t < total; ++t) {
    StepRecord rec;
    try {
      rec = cao_step(state, problem, Batch::all(), cfg);
    } catch (const Error& e) {
      diverged = true;
      r.notes.push_back(std::string("diverged: ") + e.what());
      break;
    }
    if (t == 0) f0 = rec.loss;
    if (rec.loss > opts.divergence_factor * f0) {
      diverged = true;
      r.notes.push_back("loss exceeded the divergence guard");
      break;
    }
    f_best = std::min(f_best, rec.loss);
    grad_sq.push_back(rec.grad_norm * rec.grad_norm);
  }
  if (!diverged) {
    try {
      f_best = std::min(f_best, problem.loss(state.theta));
    } catch (const NumericError&) {
      diverged = true;
    }
  }

  r.measured["alpha"] = cfg.alpha;
  r.measured["f0"] = f0;
  r.measured["f_best"] = std::isfinite(f_best) ? f_best : 0.0;
  r.measured["diverged"] = diverged ? 1.0 : 0.0;
  if (diverged) {
    r.pass = false;
    return r;
  }

  const double bound = opts.bound_factor * (f0 - f_best) / cfg.alpha;
  r.measured["bound"] = bound;
  bool ok = true;
  double prev_c = -1.0;
  long prev_t = 0;
  for (long T : horizons) {
    const double min_g = *std::min_element(grad_sq.begin(), grad_sq.begin() + T);
    const double c_t = static_cast<double>(T) * min_g;
    r.measured["c_T" + std::to_string(T)] = c_t;
    ok = ok && c_t <= bound;
    if (prev_c >= 0.0 && T == 2 * prev_t) ok = ok && c_t <= opts.growth_factor * prev_c;
    prev_c = c_t;
    prev_t = T;
  }
  r.pass = ok;
  return r;
}

Sketch first_refresh_sketch(const Problem& problem, std::span<const double> theta,
                            const CaoConfig& cfg, const Batch& batch) {
  if (cfg.k == 0) return Sketch::none(problem.dim());
  LanczosConfig lc;
  lc.k = cfg.k;
  lc.iters = cfg.t_pow;
  lc.seed = derive_seed(cfg.seed, 0);
  lc.reorth = cfg.reorth;
  const ParamVector at(theta.begin(), theta.end());
  return block_lanczos(
      [&](std::span<const double> v, std::span<double> out) {
        const ParamVector hv = problem.hvp(at, v, batch);
        std::copy(hv.begin(), hv.end(), out.begin());
      },
      problem.dim(), lc);
}

double residual_curvature(const Problem& problem, std::span<const double> theta,
                          const Sketch& sketch, const Batch& batch) {
  return sketch_residual(sketch, problem.dense_hessian(theta, batch));
}

double contraction_stepsize(const Problem& problem, std::span<const double> theta,
                            const CaoConfig& cfg) {
  const double scaling = literal_k0(cfg) ? 1.0 : cfg.eta;
  const double perp = residual_curvature(problem, theta, first_refresh_sketch(problem, theta, cfg));
  return perp > 0.0 ? std::min(1.0, scaling / perp) : 1.0;
}

TheoryReport check_pl_contraction(const Problem& problem, const CaoConfig& cfg,
                                  const ContractionOptions& opts) {
  require_full_batch_cfg(cfg, "check_pl_contraction");
  cfg.validate();
  const auto& meta = problem.meta();
  if (!meta.pl_mu || !meta.f_star) {
    throw UnsupportedOperation(problem.name() + ": contraction check needs mu and f*");
  }
  const double f_star = *meta.f_star;
  const double mu = *meta.pl_mu;

  TheoryReport r;
  r.check_name = "pl_contraction";
  r.tolerance = opts.gamma_min;

  OptimizerState state = OptimizerState::start(problem.initial_point(opts.seed));
  if (problem.has_dense_oracle()) {
    r.measured["residual_lambda_perp"] =
        residual_curvature(problem, state.theta, first_refresh_sketch(problem, state.theta, cfg));
  }

  std::vector<double> gaps;
  double min_pl_ratio = std::numeric_limits<double>::infinity();
  const long total = static_cast<long>(opts.windows) * cfg.m;
  for (long t = 0; t < total; ++t) {
    StepRecord rec;
    try {
      rec = cao_step(state, problem, Batch::all(), cfg);
    } catch (const Error& e) {
      r.notes.push_back(std::string("diverged: ") + e.what());
      r.pass = false;
      return r;
    }
    if (t % cfg.m == 0) {
      const double gap = rec.loss - f_star;
      gaps.push_back(gap);
      if (gap > opts.floor) {
        min_pl_ratio = std::min(min_pl_ratio, 0.5 * rec.grad_norm * rec.grad_norm / gap);
      }
    }
  }
  gaps.push_back(problem.loss(state.theta) - f_star);

  double max_rho = -std::numeric_limits<double>::infinity();
  int counted = 0;
  for (std::size_t w = 0; w + 1 < gaps.size(); ++w) {
    if (gaps[w] < opts.floor) continue;
    const double rho = gaps[w + 1] / gaps[w];
    r.measured["rho_" + std::to_string(w)] = rho;
    max_rho = std::max(max_rho, rho);
    ++counted;
  }
  r.measured["alpha"] = cfg.alpha;
  r.measured["mu"] = mu;
  r.measured["windows_counted"] = counted;
  if (std::isfinite(min_pl_ratio)) r.measured["min_pl_ratio"] = min_pl_ratio;
  if (counted == 0) {
    r.notes.push_back("no window above the floating-point floor");
    r.pass = false;
    return r;
  }
  r.measured["max_rho"] = max_rho;
  r.measured["gamma"] = 1.0 - max_rho;
  r.pass = max_rho <= 1.0 - opts.gamma_min;
  return r;
}

QuadraticOptions skewed_quadratic(std::uint64_t seed) {
  QuadraticOptions o;
  o.spectrum = {100.0, 10.0};
  o.spectrum.insert(o.spectrum.end(), 48, 1.0);
  o.seed = seed;
  return o;
}

std::vector<SuiteCase> quadratic_suite(std::uint64_t seed) {
  std::vector<SuiteCase> suite;

  CaoConfig exact;
  exact.k = 2;
  exact.eta = 1.0;
  exact.m = 50;
  exact.t_pow = 30;
  exact.seed = seed;
  suite.push_back({"diag_2_8", std::make_shared<QuadraticProblem>(
                                   QuadraticOptions{{2.0, 8.0}, seed, false, false}),
                   exact});

  CaoConfig k0 = exact;
  k0.k = 0;
  suite.push_back({"diag_2_8_k0", suite.front().problem, k0});

  CaoConfig skew = exact;
  skew.k = 1;
  suite.push_back({"skewed_100_10_1", std::make_shared<QuadraticProblem>(skewed_quadratic(seed)),
                   skew});

  // Five-fold top cluster over a log-spaced bulk (condition number 1e5).
  // A rank-1 sketch leaves four copies of the top eigenvalue in the
  // complement, so a too-large stepsize overshoots there.
  QuadraticOptions worst;
  worst.seed = seed;
  worst.spectrum.assign(5, 1000.0);
  for (int i = 0; i < 45; ++i) worst.spectrum.push_back(std::pow(10.0, -2.0 * i / 44.0));
  CaoConfig wc = skew;
  wc.eta = 100.0;
  suite.push_back({"clustered_top_1e5", std::make_shared<QuadraticProblem>(worst), wc, true});
  return suite;
}

std::vector<TheoryReport> run_theory_suite(std::uint64_t seed) {
  std::vector<TheoryReport> out;
  auto tagged = [](TheoryReport r, const std::string& tag) {
    r.check_name += "/" + tag;
    return r;
  };

  // Descent lemma on sampled (theta, d, alpha).
  const auto suite = quadratic_suite(seed);
  {
    const auto& q = *suite[2].problem;
    Rng rng(derive_seed(seed, 0x71));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TheoryReport agg;
    agg.check_name = "descent_lemma/skewed_quadratic";
    agg.pass = true;
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
      ParamVector theta(q.dim()), d(q.dim());
      fill_gaussian(theta, rng);
      fill_gaussian(d, rng);
      const auto rep = check_descent_lemma(q, theta, d, unif(rng));
      agg.pass = agg.pass && rep.pass;
      min_gap = std::min(min_gap, rep.measured.at("gap"));
      agg.tolerance = rep.tolerance;
    }
    agg.measured["min_gap"] = min_gap;
    agg.measured["samples"] = 100;
    out.push_back(agg);
  }

  for (const auto& c : suite) {
    out.push_back(tagged(check_sufficient_descent(*c.problem, c.cfg), c.name));
    if (c.worst_conditioned) {
      DescentCheckOptions neg;
      neg.alpha_scale = 50.0;
      TheoryReport rep = check_sufficient_descent(*c.problem, c.cfg, neg);
      rep.check_name = "sufficient_descent_negative_control/" + c.name;
      rep.notes.push_back("expected to fail at 50x the sufficient stepsize");
      rep.pass = !rep.pass;
      out.push_back(rep);
    }
  }

  {
    RosenbrockProblem rosen(10);
    CaoConfig cfg;
    cfg.k = 1;
    cfg.eta = 1.0;
    cfg.m = 100;
    cfg.seed = seed;
    const ParamVector x0 = rosen.initial_point(seed);
    const double L = estimate_smoothness(rosen, {x0, ParamVector(10, 1.0)});
    cfg.alpha = stationarity_stepsize(L, cfg.eta);
    StationarityOptions so;
    so.seed = seed;
    auto rep = check_stationarity_rate(rosen, cfg, so);
    rep.measured["L_estimate"] = L;
    out.push_back(tagged(rep, "rosenbrock10"));

    CaoConfig bad = cfg;
    bad.eta = 0.01;
    bad.alpha = 10.0 / L;
    TheoryReport neg = check_stationarity_rate(rosen, bad, so);
    neg.check_name = "stationarity_rate_negative_control/rosenbrock10";
    neg.notes.push_back("expected to fail at alpha = 10/L with small eta");
    neg.pass = !neg.pass;
    out.push_back(neg);
  }

  {
    const QuadraticProblem q(skewed_quadratic(seed));
    double prev_gamma = -1.0;
    bool monotone = true;
    struct Variant {
      const char* name;
      std::size_t k;
      bool eta_scaled;
    };
    for (const Variant v : {Variant{"k0_eta_scaled", 0, true}, Variant{"k1", 1, false},
                            Variant{"k3", 3, false}}) {
      CaoConfig cfg;
      cfg.k = v.k;
      cfg.eta_scaled_k0 = v.eta_scaled;
      cfg.eta = 1.0;
      cfg.m = 50;
      cfg.t_pow = 30;
      cfg.seed = seed;
      cfg.alpha = contraction_stepsize(q, q.initial_point(seed), cfg);
      ContractionOptions co;
      co.seed = seed;
      auto rep = check_pl_contraction(q, cfg, co);
      if (rep.measured.count("gamma")) {
        const double g = rep.measured.at("gamma");
        monotone = monotone && g >= prev_gamma;
        prev_gamma = g;
      } else {
        monotone = false;
      }
      out.push_back(tagged(rep, std::string("skewed_quadratic/") + v.name));
    }
    TheoryReport mono;
    mono.check_name = "pl_contraction_monotone_in_k/skewed_quadratic";
    mono.pass = monotone;
    mono.measured["last_gamma"] = prev_gamma;
    out.push_back(mono);
  }
  return out;
}

}  // namespace cao

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cao/optimizer.hpp"
#include "cao/problems.hpp"
#include "cao/sketch.hpp"

namespace cao {

/// Outcome of one executable check. `pass` is decided only from the
/// entries of `measured` and `tolerance`.
struct TheoryReport {
  std::string check_name;
  bool pass = false;
  std::map<std::string, double> measured;
  double tolerance = 0.0;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
  /// One-line structured text record.
  std::string to_record() const;
};

/// f(x - a d) <= f(x) - a <g, d> + (L a^2 / 2) |d|^2 + slack.
TheoryReport check_descent_lemma(const Problem& problem, std::span<const double> theta,
                                 std::span<const double> d, double alpha, double L,
                                 double slack = 1e-9);
/// Uses the problem's declared smoothness constant; UnsupportedOperation
/// when it has none.
TheoryReport check_descent_lemma(const Problem& problem, std::span<const double> theta,
                                 std::span<const double> d, double alpha);

/// Largest |eigenvalue| of the dense Hessian over the given points.
double estimate_smoothness(const Problem& problem, const std::vector<ParamVector>& points);

/// Global sufficient stepsize eta^2 / (L (L + eta)).
double sufficient_stepsize(double L, double eta);

/// Stepsize c * eta / L for the stationarity trend check.
double stationarity_stepsize(double L, double eta, double c = 0.5);

struct DescentCheckOptions {
  long steps = 200;
  /// Multiplies the derived stepsize; > 1 gives a negative control.
  double alpha_scale = 1.0;
  std::uint64_t seed = 0;
  double slack = 1e-9;
};

/// Full-batch run with alpha = eta^2 / (L (L + eta)) (1/L for the literal
/// k = 0 update, where M = I), asserting at every step
///   f_t - f_{t+1} >= (alpha / 2) lambda_min(M_t) |g_t|^2 - slack
/// with lambda_min(M_t) = 1 / max(max_i d_i, eta). Also checks
/// lambda_min(M_t) >= 1 / (L + eta). `cfg.alpha` is ignored.
TheoryReport check_sufficient_descent(const Problem& problem, const CaoConfig& cfg,
                                      const DescentCheckOptions& opts = {});

struct StationarityOptions {
  std::vector<long> horizons{100, 200, 400, 800};
  std::uint64_t seed = 0;
  double bound_factor = 4.0;
  double growth_factor = 2.2;
  double divergence_factor = 10.0;
};

/// Runs `cfg` for max(horizons) full-batch steps and checks, for each
/// horizon T, c_T = T min_{t<T} |g_t|^2 <= bound_factor (f_0 - f_best) / alpha,
/// and c_{2T} <= growth_factor c_T for consecutive horizons. Fails if the
/// loss exceeds divergence_factor * f_0 or becomes non-finite.
TheoryReport check_stationarity_rate(const Problem& problem, const CaoConfig& cfg,
                                     const StationarityOptions& opts = {});

struct ContractionOptions {
  int windows = 6;
  double gamma_min = 1e-6;
  double floor = 1e-14;  // windows whose starting gap is below this are skipped
  std::uint64_t seed = 0;
};

/// Full-batch run on a PL problem with known mu and f*. Samples the gap
/// f(theta_{t_r}) - f* at refresh steps t_r = r m and reports the window
/// ratios rho_r and gamma = 1 - max rho_r. Passes when every rho_r <=
/// 1 - gamma_min. Also records the PL ratio (|g|^2 / 2) / (f - f*) at
/// refresh points and the residual curvature of the first sketch.
TheoryReport check_pl_contraction(const Problem& problem, const CaoConfig& cfg,
                                  const ContractionOptions& opts = {});

/// Residual curvature outside the sketch at theta (dense oracle).
double residual_curvature(const Problem& problem, std::span<const double> theta,
                          const Sketch& sketch, const Batch& batch = {});

/// Sketch the first refresh of `cfg` would produce at theta.
Sketch first_refresh_sketch(const Problem& problem, std::span<const double> theta,
                            const CaoConfig& cfg, const Batch& batch = {});

/// alpha = min(1, s / lambda_perp), where s is the complement scaling (eta,
/// or 1 for the literal k = 0 update) and lambda_perp the residual curvature
/// of the first sketch at theta. Every eigen-direction of a quadratic then
/// contracts monotonically.
double contraction_stepsize(const Problem& problem, std::span<const double> theta,
                            const CaoConfig& cfg);

/// Quadratics used by the stepsize and contraction checks, each paired with
/// the sketch settings it is checked under.
struct SuiteCase {
  std::string name;
  std::shared_ptr<const QuadraticProblem> problem;
  CaoConfig cfg;
  bool worst_conditioned = false;
};

std::vector<SuiteCase> quadratic_suite(std::uint64_t seed);

/// Spectrum [100, 10, 1 x 48]: two dominant directions over a flat bulk.
QuadraticOptions skewed_quadratic(std::uint64_t seed);

/// The full battery run by `cao_bench theory`.
std::vector<TheoryReport> run_theory_suite(std::uint64_t seed);

}  // namespace cao

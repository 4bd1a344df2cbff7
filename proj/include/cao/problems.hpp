#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cao/linalg.hpp"
#include "json.hpp"

namespace cao {

struct ProblemMeta {
  std::string name;
  std::size_t dim = 0;
  std::optional<double> smoothness_L;
  std::optional<double> pl_mu;
  std::optional<double> f_star;

  /// Throws ContractViolation when the constants are inconsistent
  /// (mu without f*, L < mu, non-positive values).
  void validate() const;
};

/// Sample indices for a stochastic objective. Empty means the full data set.
struct Batch {
  std::vector<std::size_t> indices;
  std::uint64_t rng_seed = 0;

  bool full() const { return indices.empty(); }
  static Batch all() { return {}; }
};

/// Matrix-free objective with analytic gradient and Hessian-vector product.
///
/// Instances are immutable after construction and safe to evaluate from
/// several threads at once. The public entry points validate dimensions and
/// batch indices and reject non-finite results; subclasses implement the
/// protected `eval_*` hooks on already-validated input.
class Problem {
 public:
  virtual ~Problem() = default;

  const ProblemMeta& meta() const { return meta_; }
  std::size_t dim() const { return meta_.dim; }
  const std::string& name() const { return meta_.name; }

  /// Number of data samples; 0 for deterministic objectives, which only
  /// accept the full batch.
  virtual std::size_t num_samples() const { return 0; }

  double loss(std::span<const double> theta, const Batch& batch = {}) const;
  ParamVector grad(std::span<const double> theta, const Batch& batch = {}) const;
  ParamVector hvp(std::span<const double> theta, std::span<const double> v,
                  const Batch& batch = {}) const;

  bool has_dense_oracle() const { return dim() <= kDenseOracleCap; }
  /// Column j equals hvp(theta, e_j). Throws UnsupportedOperation above the
  /// oracle cap.
  DenseMatrix dense_hessian(std::span<const double> theta, const Batch& batch = {}) const;

  /// Seeded starting point for a run.
  virtual ParamVector initial_point(std::uint64_t seed) const = 0;

  /// Parameters sufficient to rebuild this instance with make_problem.
  virtual nlohmann::json describe() const = 0;

 protected:
  explicit Problem(ProblemMeta meta);

  /// For constructors that derive L from generated data.
  void set_smoothness(double L);

  virtual double eval_loss(std::span<const double> theta, const Batch& batch) const = 0;
  virtual void eval_grad(std::span<const double> theta, const Batch& batch,
                         std::span<double> out) const = 0;
  virtual void eval_hvp(std::span<const double> theta, std::span<const double> v,
                        const Batch& batch, std::span<double> out) const = 0;
  virtual DenseMatrix eval_dense_hessian(std::span<const double> theta, const Batch& batch) const;

 private:
  void check_inputs(std::span<const double> theta, const Batch& batch) const;

  ProblemMeta meta_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// Central-difference HVP (grad(theta + eps v) - grad(theta - eps v)) / 2 eps.
/// Used as an oracle for the analytic HVPs. v = 0 returns zero; a step too
/// small to move any coordinate throws DegenerateStep.
ParamVector fd_hvp(const Problem& problem, std::span<const double> theta,
                   std::span<const double> v, const Batch& batch, double eps);

// ---------------------------------------------------------------------------
// Instances

struct QuadraticOptions {
  std::vector<double> spectrum;
  std::uint64_t seed = 0;
  /// false: A = diag(spectrum) exactly.
  bool rotate = true;
  /// false: minimizer at the origin.
  bool random_center = false;
};

/// f(x) = 1/2 (x - x*)^T A (x - x*), A = Q diag(spectrum) Q^T with Q a
/// seeded random orthogonal matrix.
class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(QuadraticOptions opts);

  const DenseMatrix& matrix() const { return a_; }
  std::span<const double> minimizer() const { return center_; }
  std::span<const double> spectrum() const { return opts_.spectrum; }

  ParamVector initial_point(std::uint64_t seed) const override;
  nlohmann::json describe() const override;

 protected:
  double eval_loss(std::span<const double> theta, const Batch& batch) const override;
  void eval_grad(std::span<const double> theta, const Batch& batch,
                 std::span<double> out) const override;
  void eval_hvp(std::span<const double> theta, std::span<const double> v, const Batch& batch,
                std::span<double> out) const override;
  DenseMatrix eval_dense_hessian(std::span<const double> theta, const Batch& batch) const override;

 private:
  QuadraticOptions opts_;
  DenseMatrix a_;  // symmetric, so column-major storage doubles as row-major
  ParamVector center_;
};

/// Chained Rosenbrock: sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2.
class RosenbrockProblem final : public Problem {
 public:
  explicit RosenbrockProblem(std::size_t n, double init_noise = 0.1);

  ParamVector initial_point(std::uint64_t seed) const override;
  nlohmann::json describe() const override;

 protected:
  double eval_loss(std::span<const double> theta, const Batch& batch) const override;
  void eval_grad(std::span<const double> theta, const Batch& batch,
                 std::span<double> out) const override;
  void eval_hvp(std::span<const double> theta, std::span<const double> v, const Batch& batch,
                std::span<double> out) const override;
  DenseMatrix eval_dense_hessian(std::span<const double> theta, const Batch& batch) const override;

 private:
  void tridiagonal(std::span<const double> x, std::vector<double>& diag,
                   std::vector<double>& off) const;

  double init_noise_;
};

struct LogRegOptions {
  std::size_t n_features = 10;
  std::size_t n_samples = 200;
  std::uint64_t seed = 0;
  double reg = 1e-3;
  double separation = 1.0;
};

/// l2-regularized logistic regression on two seeded Gaussian classes.
/// Parameters are the feature weights followed by a bias.
class LogRegProblem final : public Problem {
 public:
  explicit LogRegProblem(LogRegOptions opts);

  std::size_t num_samples() const override { return opts_.n_samples; }
  std::span<const double> features(std::size_t i) const;
  double label(std::size_t i) const { return labels_[i]; }

  ParamVector initial_point(std::uint64_t seed) const override;
  nlohmann::json describe() const override;

 protected:
  double eval_loss(std::span<const double> theta, const Batch& batch) const override;
  void eval_grad(std::span<const double> theta, const Batch& batch,
                 std::span<double> out) const override;
  void eval_hvp(std::span<const double> theta, std::span<const double> v, const Batch& batch,
                std::span<double> out) const override;

 private:
  LogRegOptions opts_;
  std::size_t stride_;
  std::vector<double> x_;  // row-major n_samples x (n_features + 1), last column 1
  std::vector<double> labels_;
};

struct MlpOptions {
  std::size_t inputs = 8;
  std::size_t hidden = 16;
  std::size_t classes = 3;
  std::size_t n_samples = 512;
  std::uint64_t seed = 0;
  double separation = 2.0;
  double noise = 1.0;
  /// Input j is multiplied by feature_scale^(j / (inputs - 1)); 1 keeps the
  /// features isotropic.
  double feature_scale = 1.0;
  /// Added to every input after scaling; nonzero values leave the data
  /// uncentered.
  double feature_offset = 0.0;
};

/// One-hidden-layer tanh network with softmax cross-entropy on seeded
/// Gaussian-cluster data. Parameter layout: W1 (hidden x inputs, row-major),
/// b1, W2 (classes x hidden, row-major), b2. HVPs use the R-operator
/// (forward-over-reverse) applied to hand-written backprop.
class MlpProblem final : public Problem {
 public:
  explicit MlpProblem(MlpOptions opts);

  std::size_t num_samples() const override { return opts_.n_samples; }
  const MlpOptions& options() const { return opts_; }

  ParamVector initial_point(std::uint64_t seed) const override;
  nlohmann::json describe() const override;

 protected:
  double eval_loss(std::span<const double> theta, const Batch& batch) const override;
  void eval_grad(std::span<const double> theta, const Batch& batch,
                 std::span<double> out) const override;
  void eval_hvp(std::span<const double> theta, std::span<const double> v, const Batch& batch,
                std::span<double> out) const override;

 private:
  struct Layout;
  MlpOptions opts_;
  std::vector<double> x_;  // row-major n_samples x inputs
  std::vector<std::size_t> labels_;
};

/// Builds a problem from a config section: {"type": "quadratic" |
/// "rosenbrock" | "logreg" | "mlp", ...parameters}. Throws ConfigError on
/// unknown types or invalid parameters.
ProblemPtr make_problem(const nlohmann::json& section);

}  // namespace cao

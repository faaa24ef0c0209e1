#pragma once

// Safeguarded Newton descent over control coefficients and the receding
// horizon (discrete-time Markov) control built on top of it.

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/core.hpp"
#include "mfc/dynamics.hpp"
#include "mfc/estimators.hpp"
#include "mfc/meanfield.hpp"
#include "mfc/problem.hpp"

namespace mfc {

/// Cost, gradient and Hessian at one coefficient vector.
struct DerivativeSample {
  Eigen::VectorXd a;
  double value = 0.0;
  double value_se = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd grad_se;
  Eigen::MatrixXd hess;
  Eigen::MatrixXd hess_se;
};

/// Paired comparison J(trial) - J(base).
struct CostComparison {
  double trial_value = 0.0;
  double difference = 0.0;
  double difference_se = 0.0;
};

/// Source of J and its derivatives for Newton's method.
class DerivativeOracle {
 public:
  virtual ~DerivativeOracle() = default;
  virtual std::size_t dimension() const = 0;
  virtual DerivativeSample evaluate(const Eigen::VectorXd& a) = 0;
  virtual CostComparison compare(const Eigen::VectorXd& base, const Eigen::VectorXd& trial) = 0;
};

/// Monte Carlo oracle over a ControlProblem. Every evaluation reuses the same
/// seed, so all costs within one solve share common random numbers.
class MonteCarloOracle : public DerivativeOracle {
 public:
  MonteCarloOracle(const ControlProblem& problem, PiecewiseConstantControl basis,
                   std::size_t n_paths, SeedSpec seed, EstimatorOptions options = {},
                   Execution exec = Execution::kParallel);
  /// As above, keeping `problem` alive for the oracle's lifetime.
  MonteCarloOracle(std::shared_ptr<const ControlProblem> problem, PiecewiseConstantControl basis,
                   std::size_t n_paths, SeedSpec seed, EstimatorOptions options = {},
                   Execution exec = Execution::kParallel);

  std::size_t dimension() const override { return basis_.intervals(); }
  DerivativeSample evaluate(const Eigen::VectorXd& a) override;
  CostComparison compare(const Eigen::VectorXd& base, const Eigen::VectorXd& trial) override;

  /// Batch simulated under u^a (cached for the most recent two vectors).
  const PathBatch& batch(const Eigen::VectorXd& a);
  std::size_t batches_simulated() const { return simulated_; }

 private:
  std::shared_ptr<const ControlProblem> owned_;
  const ControlProblem& problem_;
  PiecewiseConstantControl basis_;
  std::size_t n_paths_;
  SeedSpec seed_;
  EstimatorOptions options_;
  Execution exec_;
  std::vector<PathBatch> cache_;
  std::size_t simulated_ = 0;
};

/// J(a) = a^T Q a / 2 + b^T a + c with exact derivatives.
class QuadraticOracle : public DerivativeOracle {
 public:
  QuadraticOracle(Eigen::MatrixXd q, Eigen::VectorXd b, double c = 0.0);

  /// The r = 0 control problem: Q = lambda diag(|I_k|), b = 0.
  static QuadraticOracle pure_control(const PiecewiseConstantControl& basis, const TimeGrid& grid,
                                      double lambda);

  std::size_t dimension() const override { return static_cast<std::size_t>(b_.size()); }
  DerivativeSample evaluate(const Eigen::VectorXd& a) override;
  CostComparison compare(const Eigen::VectorXd& base, const Eigen::VectorXd& trial) override;
  double value(const Eigen::VectorXd& a) const;

  const Eigen::MatrixXd& q() const { return q_; }
  const Eigen::VectorXd& b() const { return b_; }
  double c() const { return c_; }

 private:
  Eigen::MatrixXd q_;
  Eigen::VectorXd b_;
  double c_;
};

struct NewtonOptions {
  // Stop when |J(a^j) - J(a^{j-1})| < tol; tol <= 0 means 1e-4 (1 + |J(a^0)|).
  double tol = 0.0;
  std::size_t max_iter = 200;
  std::size_t max_halvings = 8;
  // Accept a trial if J_trial <= J + noise_factor * SE(J_trial - J).
  double noise_factor = 3.0;
  // Levenberg shifts tried: 0, then first_shift * scale * 10^i for i < shift_steps.
  double first_shift = 1e-6;
  std::size_t shift_steps = 10;
};

struct NewtonIterate {
  Eigen::VectorXd a;
  double value = 0.0;
  double value_se = 0.0;
  double grad_norm = 0.0;
  double damping = 0.0;  // Levenberg shift tau of the step that produced a
  double step_scale = 1.0;
  // Propagated standard error of each component of the Newton step,
  // sqrt(sum_l (H^-1)_kl^2 se(g_l)^2); zero for the starting point.
  Eigen::VectorXd step_se;
};

enum class NewtonStatus { kConverged, kMaxIterations, kNoDescent };

struct NewtonReport {
  std::vector<NewtonIterate> iterates;
  NewtonStatus status = NewtonStatus::kMaxIterations;
  double tol = 0.0;

  bool converged() const { return status == NewtonStatus::kConverged; }
  const Eigen::VectorXd& final_a() const { return iterates.back().a; }
};

/// Newton iteration a <- a - (H + tau I)^-1 grad with step halving. Throws
/// NumericalError when no shift in the sequence makes H + tau I positive
/// definite or the oracle returns non-finite values.
NewtonReport newton_solve(DerivativeOracle& oracle, const Eigen::VectorXd& a0,
                          const NewtonOptions& options = {});

/// Columns: iter, a_1..a_m, J, J_se, grad_norm, damping.
void write_iteration_csv(std::ostream& out, const NewtonReport& report);

const char* to_string(NewtonStatus status);

// ---------------------------------------------------------------------------
// Receding horizon control

/// A realised system that can be re-planned from its current state.
class MarkovModel {
 public:
  virtual ~MarkovModel() = default;
  virtual std::size_t intervals() const = 0;
  /// Oracle over intervals stage..end from the current realised state.
  virtual std::unique_ptr<DerivativeOracle> stage_oracle(std::size_t stage) = 0;
  /// Advances the realised system across interval `stage` with the given
  /// coefficient and realised noise.
  virtual void advance(std::size_t stage, double coefficient) = 0;
};

struct MarkovResult {
  std::vector<double> committed;
  std::vector<NewtonReport> stages;  // one per re-planned stage (m - 1)
};

/// For each stage but the last: Newton over the remaining intervals from the
/// warm start, commit its first entry, advance, and warm-start the next stage
/// with the rest. The last coefficient is committed from the warm start.
MarkovResult markov_solve(MarkovModel& model, const Eigen::VectorXd& a0,
                          const NewtonOptions& options = {});

/// Quadratic objective with already-committed prefix held fixed.
class QuadraticMarkovModel : public MarkovModel {
 public:
  explicit QuadraticMarkovModel(QuadraticOracle full);
  std::size_t intervals() const override { return full_.dimension(); }
  std::unique_ptr<DerivativeOracle> stage_oracle(std::size_t stage) override;
  void advance(std::size_t stage, double coefficient) override;

 private:
  QuadraticOracle full_;
  std::vector<double> committed_;
};

/// Monte Carlo settings shared by the model-based Markov controllers.
struct MarkovMonteCarlo {
  std::size_t n_paths = 10000;
  SeedSpec planning_seed;  // stage s uses a fresh substream of this seed
  EstimatorOptions estimator;
  Execution exec = Execution::kParallel;
};

/// Finite-N system. The realised path uses substreams of `realised_seed`
/// under path id `replication`, so a zero-control run with the same pair
/// sees identical noise.
class HkMarkovModel : public MarkovModel {
 public:
  HkMarkovModel(ModelParams params, TimeGrid grid, PiecewiseConstantControl basis,
                SystemState init, MarkovMonteCarlo mc, SeedSpec realised_seed,
                std::uint64_t replication);

  std::size_t intervals() const override { return basis_.intervals(); }
  std::unique_ptr<DerivativeOracle> stage_oracle(std::size_t stage) override;
  void advance(std::size_t stage, double coefficient) override;

  const TrajectoryBundle& realised() const { return realised_; }
  /// Left-Riemann running cost plus control cost of the realised path so far.
  double realised_cost() const { return running_ + control_; }

 private:
  ModelParams params_;
  TimeGrid grid_;
  PiecewiseConstantControl basis_;
  MarkovMonteCarlo mc_;
  SystemState state_;
  PathNoise noise_;
  DriftWorkspace workspace_;
  std::vector<double> scratch_;
  TrajectoryBundle realised_;
  double running_ = 0.0;
  double control_ = 0.0;
  std::uint64_t replication_;
};

/// Discretised mean-field system; realised leader noise as in simulate_mf.
class MeanFieldMarkovModel : public MarkovModel {
 public:
  MeanFieldMarkovModel(ModelParams params, TimeGrid grid, PiecewiseConstantControl basis,
                       GridDensity g0, double leader0, MarkovMonteCarlo mc,
                       SeedSpec realised_seed, std::uint64_t replication);

  std::size_t intervals() const override { return basis_.intervals(); }
  std::unique_ptr<DerivativeOracle> stage_oracle(std::size_t stage) override;
  void advance(std::size_t stage, double coefficient) override;

  const MeanFieldTrajectory& realised() const { return realised_; }
  double realised_cost() const { return running_ + control_; }

 private:
  ModelParams params_;
  TimeGrid grid_;
  PiecewiseConstantControl basis_;
  MarkovMonteCarlo mc_;
  FokkerPlanckSolver solver_;
  NormalSource leader_noise_;
  std::vector<double> g_;
  double y_;
  MeanFieldTrajectory realised_;
  double running_ = 0.0;
  double control_ = 0.0;
  std::uint64_t replication_;
};

/// Grid remaining after breakpoint `stage` (breakpoints must be grid nodes).
TimeGrid stage_grid(const PiecewiseConstantControl& basis, const TimeGrid& grid, std::size_t stage);

/// Realised cost of a stored trajectory under `control`.
double realised_cost(const TrajectoryBundle& traj, const PiecewiseConstantControl& control);
double realised_cost(const MeanFieldTrajectory& traj, const PiecewiseConstantControl& control,
                     double lambda);

// ---------------------------------------------------------------------------
// Finite-difference validation

struct GradientCheck {
  Eigen::VectorXd estimate;
  Eigen::VectorXd estimate_se;
  Eigen::VectorXd finite_difference;
  Eigen::VectorXd finite_difference_se;
  Eigen::VectorXd steps;
  std::vector<bool> resolved;     // |estimate| > 5 SE
  Eigen::VectorXd relative_error;  // |estimate - fd| / |fd|
  // Max relative error over resolved components; NaN if none is resolved.
  double max_relative_error = 0.0;
};

/// Gradient estimator at `control` against central differences of the cost
/// with common random numbers, steps h_k = h max(1, |a_k|).
GradientCheck fd_gradient_check(const ControlProblem& problem,
                                const PiecewiseConstantControl& control, double h,
                                std::size_t n_paths, const SeedSpec& seed,
                                const EstimatorOptions& options = {},
                                Execution exec = Execution::kParallel);

nlohmann::json to_json(const GradientCheck& check);

}  // namespace mfc

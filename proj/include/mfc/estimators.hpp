#pragma once

// Monte Carlo estimators of the cost J(a), its gradient and Hessian in the
// control coefficients, from likelihood-ratio (Girsanov) representations.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "mfc/control.hpp"
#include "mfc/core.hpp"
#include "mfc/dynamics.hpp"
#include "mfc/problem.hpp"

namespace mfc {

struct EstimateWithError {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Sample mean and standard error (sample std / sqrt(n)) of `values`.
EstimateWithError mean_with_error(std::span<const double> values);

/// Functionals of a stored trajectory (r forced to 0 when `zero_running_cost`).
PathFunctionals path_functionals(const TrajectoryBundle& traj,
                                 const PiecewiseConstantControl& control,
                                 bool zero_running_cost = false);

/// Finite-N leader-follower system started from a fixed state.
class HkControlProblem : public ControlProblem {
 public:
  HkControlProblem(ModelParams params, TimeGrid grid, SystemState init,
                   bool zero_running_cost = false);

  const TimeGrid& grid() const override { return grid_; }
  double sigma() const override { return params_.sigma; }
  double lambda() const override { return params_.lambda; }
  PathFunctionals sample_path(const PiecewiseConstantControl& control, const SeedSpec& seed,
                              std::uint64_t path) const override;

  const ModelParams& params() const { return params_; }
  const SystemState& init() const { return init_; }

 private:
  ModelParams params_;
  TimeGrid grid_;
  SystemState init_;
  bool zero_running_cost_;
};

/// Paths simulated under one control, reduced to what the estimators need.
struct PathBatch {
  std::vector<double> phi;             // per path
  Eigen::MatrixXd martingales;         // n_paths x K, row p = M^{e_k} of path p
  Eigen::MatrixXd phi_tail;            // n_paths x K, phi minus the cost accrued before I_k
  Eigen::VectorXd coefficients;        // a
  Eigen::VectorXd interval_lengths;    // discrete |I_k|
  double sigma = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return phi.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(coefficients.size()); }
  /// (lambda/2) sum_k a_k^2 |I_k|: deterministic for time-only controls.
  double control_cost() const;
  /// phi_p + control_cost() for every path.
  std::vector<double> path_costs() const;
};

/// Simulates n_paths paths (path ids 0..n-1) in parallel or serially; the
/// result does not depend on `exec`.
PathBatch sample_batch(const ControlProblem& problem, const PiecewiseConstantControl& control,
                       std::size_t n_paths, const SeedSpec& seed,
                       Execution exec = Execution::kParallel);

/// Builds a batch from precomputed functionals (tests, synthetic checks).
PathBatch make_batch(std::span<const PathFunctionals> paths, const PiecewiseConstantControl& control,
                     const TimeGrid& grid, double sigma, double lambda);

/// Which representation of the cost-of-control derivative terms to use.
enum class ControlTerm {
  // lambda sigma^2 polynomial in M^{u^a} multiplying the score, as in the
  // likelihood-ratio formulas; unbiased but noisy.
  kGirsanov,
  // Exact derivative of the deterministic term (lambda/2) sum a_k^2 |I_k|.
  kAnalytic,
};

enum class HessianForm {
  // Full second derivative of the likelihood ratio, including the
  // -delta_kl |I_k| / sigma^2 compensator of M^{e_k} M^{e_l}.
  kExact,
  // (phi + lambda sigma^2 (M^2/2 + 2M + 1)) M^{e_k} M^{e_l} as printed.
  kPrinted,
};

struct EstimatorOptions {
  // Subtract the batch mean of the cost weight, and the known mean of the
  // squared control martingale, before multiplying by the score (zero-mean
  // score, so the expectation is unchanged).
  bool baseline = true;
  // Weight M^{e_k} only by the running cost accrued from the start of I_k
  // (the earlier part is independent of the score). The printed Hessian
  // form always uses the whole of phi.
  bool causal = true;
  ControlTerm control_term = ControlTerm::kGirsanov;
  HessianForm hessian_form = HessianForm::kExact;
};

struct GradientEstimate {
  Eigen::VectorXd value;
  Eigen::VectorXd std_error;
};

struct HessianEstimate {
  Eigen::MatrixXd value;  // exactly symmetric
  Eigen::MatrixXd std_error;
};

EstimateWithError cost_estimate(const PathBatch& batch);
GradientEstimate gradient(const PathBatch& batch, const EstimatorOptions& options = {});
HessianEstimate hessian(const PathBatch& batch, const EstimatorOptions& options = {});

/// Mean over paths of phi_T + (lambda/2) sum_j u(t_j)^2 dt.
EstimateWithError cost_direct(const ControlProblem& problem,
                              const PiecewiseConstantControl& control, std::size_t n_paths,
                              const SeedSpec& seed, Execution exec = Execution::kParallel);

struct ReweightedEstimate {
  EstimateWithError estimate;
  double effective_sample_size = 0.0;
  // Effective sample size below 10% of the path count.
  bool degenerate = false;
};

/// J(a) from paths simulated with zero leader control, reweighted by the
/// likelihood ratio of the leader path under u^a.
ReweightedEstimate cost_reweighted(const PathBatch& base, std::span<const double> coefficients);

/// {a, grad, grad_se, hess, hess_se, n_paths, seed}
nlohmann::json derivatives_json(const PathBatch& batch, const GradientEstimate& grad,
                                const HessianEstimate& hess);

}  // namespace mfc

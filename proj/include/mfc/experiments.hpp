#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite: initial data, paired comparisons and per-replication Markov runs.

#include <cstdint>
#include <span>
#include <vector>

#include "mfc/cli.hpp"
#include "mfc/dynamics.hpp"
#include "mfc/estimators.hpp"
#include "mfc/meanfield.hpp"
#include "mfc/optimize.hpp"

namespace mfc {

/// Followers drawn from the two-cluster von Mises mixture (path id `draw`)
/// and the configured leader position.
SystemState initial_state(const ExperimentConfig& config, std::uint64_t draw = 0);

/// Cell averages of the von Mises mixture on `cells` cells.
GridDensity initial_density(std::size_t cells);

/// Seeds derived from the master seed for the separate roles of a run.
SeedSpec planning_seed(const ExperimentConfig& config);
SeedSpec realised_seed(const ExperimentConfig& config);
SeedSpec evaluation_seed(const ExperimentConfig& config);

struct PairedSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  double lower = 0.0;  // one-sided lower confidence bound (Student t)
  double level = 0.95;
};

/// Mean of `diffs` with a one-sided Student-t lower bound.
PairedSummary paired_summary(std::span<const double> diffs, double level = 0.95);

/// J(a) - J(b) on common random numbers.
PairedSummary paired_cost_difference(const ControlProblem& problem,
                                     const PiecewiseConstantControl& basis,
                                     const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                     std::size_t n_paths, const SeedSpec& seed,
                                     double level = 0.95);

struct MarkovReplication {
  std::uint64_t replication = 0;
  std::vector<double> committed;
  double cost = 0.0;
  double zero_cost = 0.0;
  // Fraction of followers (finite N) or density mass (mean field) within R
  // of the leader at T, under the Markov control and under u = 0.
  double within = 0.0;
  double zero_within = 0.0;
  std::vector<NewtonReport> stages;
};

/// Markov control of the finite-N system, replication `rep`, plus the zero
/// control run on the same realised noise. Trajectories returned on request.
MarkovReplication run_hk_markov(const ExperimentConfig& config, std::uint64_t rep,
                                TrajectoryBundle* controlled = nullptr,
                                TrajectoryBundle* uncontrolled = nullptr);

/// As run_hk_markov for the discretised mean-field system on config.cells.
MarkovReplication run_mf_markov(const ExperimentConfig& config, std::uint64_t rep,
                                MeanFieldTrajectory* controlled = nullptr,
                                MeanFieldTrajectory* uncontrolled = nullptr);

}  // namespace mfc

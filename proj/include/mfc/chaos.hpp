#pragma once

// Synchronous coupling of the finite-N system with the discretised
// mean-field system on a shared leader noise path.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "mfc/control.hpp"
#include "mfc/core.hpp"
#include "mfc/meanfield.hpp"

namespace mfc {

struct ChaosRecord {
  std::size_t n_followers = 0;
  std::uint64_t replication = 0;
  double sup_w2_sq = 0.0;  // max over grid nodes of W2^2(empirical, g_t)
  double sup_dy_sq = 0.0;  // max over grid nodes of |Y^N - Ybar|^2 (geodesic)
};

struct ChaosSetup {
  ModelParams params;  // n_followers is set per run
  TimeGrid grid;
  PiecewiseConstantControl control = PiecewiseConstantControl::uniform(1.0, 1);
  GridDensity g0 = GridDensity::uniform(128);
  double leader0 = 0.8;
  SeedSpec seed;
  // Quantile atoms of g_t: the smallest multiple of N that is >= this.
  std::size_t min_quantile_atoms = 256;
};

/// Mean-field path of replication `rep` (leader noise substream `rep`).
MeanFieldTrajectory chaos_reference(const ChaosSetup& setup, std::uint64_t rep);

/// Couples N followers drawn i.i.d. from g0 with the mean-field path of the
/// same replication.
ChaosRecord coupled_run(const ChaosSetup& setup, std::size_t n, std::uint64_t rep);

/// As above with explicit initial followers and a precomputed reference.
ChaosRecord coupled_run(const ChaosSetup& setup, std::span<const double> followers,
                        std::uint64_t rep, const MeanFieldTrajectory& reference);

struct ChaosRow {
  std::size_t n_followers = 0;
  std::size_t replications = 0;
  double mean_w2_sq = 0.0;
  double se_w2_sq = 0.0;
  double mean_dy_sq = 0.0;
  double se_dy_sq = 0.0;
};

struct ChaosStudy {
  std::vector<ChaosRecord> records;  // ordered by (N, rep)
  std::vector<ChaosRow> rows;        // one per N
};

/// Runs every N in `n_list` (ascending) for replications 0..reps-1.
ChaosStudy convergence_study(const ChaosSetup& setup, std::span<const std::size_t> n_list,
                             std::size_t reps, Execution exec = Execution::kParallel);

/// Per-N means and standard errors of a record set.
std::vector<ChaosRow> summarise(std::span<const ChaosRecord> records);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::size_t resamples = 0;
};

/// Least-squares slope of log(mean) against log(N) on >= 3 rows.
SlopeFit fit_slope(std::span<const ChaosRow> rows);

/// Slope of log E[sup W2^2] against log N with a percentile bootstrap
/// interval from resampling replications within each N.
SlopeFit fit_slope(std::span<const ChaosRecord> records, std::size_t resamples,
                   const SeedSpec& seed, double level = 0.95);

/// Columns: N, rep, sup_w2_sq, sup_dy_sq.
void write_study_csv(std::ostream& out, std::span<const ChaosRecord> records);

nlohmann::json to_json(const SlopeFit& fit, std::span<const ChaosRow> rows);

}  // namespace mfc

#pragma once

// Nonlinear Fokker-Planck equation for the follower density, coupled to the
// leader SDE, on a periodic finite-volume grid.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/core.hpp"
#include "mfc/problem.hpp"

namespace mfc {

/// Cell-centred density on n cells of the unit torus; sum g_i dx = 1.
class GridDensity {
 public:
  explicit GridDensity(std::vector<double> values);

  static GridDensity uniform(std::size_t n);
  /// Exact cell averages of a mixture, renormalised to unit mass.
  static GridDensity from_mixture(const VonMisesMixture& mixture, std::size_t n);
  /// Histogram of atoms (each cell gets count / (N dx)).
  static GridDensity histogram(std::span<const double> atoms, std::size_t n);

  std::size_t size() const { return values_.size(); }
  double dx() const { return 1.0 / static_cast<double>(values_.size()); }
  double centre(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dx(); }
  double mass() const;
  double min() const;
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Draws count i.i.d. points from the piecewise-constant density.
  std::vector<double> sample(SplitMix64& engine, std::size_t count) const;

 private:
  std::vector<double> values_;
};

/// Drift at the centre of `cell` with the empirical measure replaced by g.
/// Direct sum over all cells; the reference for FokkerPlanckSolver.
double mf_drift(std::size_t cell, double leader, const GridDensity& g, const ModelParams& params);

/// Largest explicit step keeping the scheme non-negative:
/// dx^2 / (2 dx (k + k_L) R + sigma^2). +inf when the denominator vanishes.
double cfl_max_dt(const ModelParams& params, double dx);

/// Squared geodesic distance from the leader averaged against g.
double mf_running_cost(double leader, const GridDensity& g);

/// Mass of g in cells whose centre lies within `radius` of the leader.
double mass_within(double leader, const GridDensity& g, double radius);

/// Explicit conservative finite-volume stepper with Chang-Cooper fluxes.
/// Holds the precomputed interaction stencil and scratch buffers.
class FokkerPlanckSolver {
 public:
  FokkerPlanckSolver(const ModelParams& params, std::size_t cells);

  /// Advances g by dt with the leader held at `leader`. Throws
  /// std::invalid_argument if dt exceeds the CFL bound and NumericalError on
  /// negativity below -1e-14.
  void step(std::span<double> g, double leader, double dt);

  /// Cell-centre drifts by circulant stencil. Uses internal scratch, so one
  /// solver must not be shared between threads.
  void drift(std::span<const double> g, double leader, std::span<double> out) const;

  double max_dt() const { return max_dt_; }

 private:
  ModelParams params_;
  std::size_t n_;
  double dx_;
  double max_dt_;
  std::vector<std::pair<std::ptrdiff_t, double>> stencil_;  // offset, a(|d|) d dx
  std::size_t reach_ = 0;  // largest |offset| in the stencil
  std::vector<double> centre_drift_;
  std::vector<double> flux_;
  mutable std::vector<double> padded_;
  mutable std::vector<double> sums_;
};

/// One finite-volume step; see FokkerPlanckSolver::step.
GridDensity fp_step(const GridDensity& g, double leader, const ModelParams& params, double dt);

/// Chang-Cooper weight on g_i (upwind side for positive drift) at face
/// i + 1/2; w = drift dx / D with D = sigma^2 / 2.
double chang_cooper_weight(double w);

struct MeanFieldTrajectory {
  std::vector<GridDensity> densities;     // steps + 1
  std::vector<double> leader;             // steps + 1
  std::vector<double> leader_increments;  // steps
  TimeGrid grid;
  std::uint64_t path_id = 0;
};

/// Lie splitting per step: leader Euler-Maruyama with u(t_j), then the
/// density step against the updated leader position.
MeanFieldTrajectory simulate_mf(const ModelParams& params, const TimeGrid& grid,
                                const PiecewiseConstantControl& control, const GridDensity& g0,
                                double leader0, const SeedSpec& seed, std::uint64_t path_id = 0);

/// Columns: path_id, step, t, Y, g_0..g_{n-1}.
void write_density_csv(std::ostream& out, std::span<const MeanFieldTrajectory> paths);

/// Mean-field control problem: phi integrates mf_running_cost; the
/// martingales use only the leader's noise.
class MeanFieldControlProblem : public ControlProblem {
 public:
  MeanFieldControlProblem(ModelParams params, TimeGrid grid, GridDensity g0, double leader0,
                          bool zero_running_cost = false);

  const TimeGrid& grid() const override { return grid_; }
  double sigma() const override { return params_.sigma; }
  double lambda() const override { return params_.lambda; }
  PathFunctionals sample_path(const PiecewiseConstantControl& control, const SeedSpec& seed,
                              std::uint64_t path) const override;

 private:
  ModelParams params_;
  TimeGrid grid_;
  GridDensity g0_;
  double leader0_;
  bool zero_running_cost_;
};

}  // namespace mfc

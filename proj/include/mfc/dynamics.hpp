#pragma once

// Noisy Hegselmann-Krause leader-follower system on the unit torus and its
// Euler-Maruyama integrator.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/core.hpp"

namespace mfc {

struct SystemState {
  std::vector<double> followers;
  double leader = 0.0;
};

struct TrajectoryBundle {
  std::vector<SystemState> states;         // grid.steps + 1 entries
  std::vector<double> leader_increments;   // grid.steps entries, Brownian units
  TimeGrid grid;
  ModelParams params;
  std::uint64_t path_id = 0;
};

/// Bounded-confidence weight a(r): 1 for r <= R. With width w > 0 the step is
/// replaced by a cosine taper on [R - w, R + w].
double hk_kernel(double r, double radius, double width = 0.0);

/// Follower drift at x against the empirical measure of `followers` and the
/// leader. Direct O(N) sum; the reference for the batched kernels below.
double hk_drift(double x, double leader, std::span<const double> followers,
                const ModelParams& params);

/// Mean squared geodesic distance between the leader and the followers.
double running_cost(double leader, std::span<const double> followers);

/// Fraction of followers within geodesic distance `radius` of the leader.
double fraction_within(double leader, std::span<const double> followers, double radius);

/// Scratch space for the windowed drift kernel. Keeps the follower sort order
/// between calls so consecutive steps re-sort in near-linear time.
class DriftWorkspace {
 public:
  void hk_drift_all(std::span<const double> followers, double leader, const ModelParams& params,
                    std::span<double> out);

 private:
  std::vector<std::size_t> order_;
  std::vector<double> sorted_;
  std::vector<double> extended_;
  std::vector<double> prefix_;
};

/// All follower drifts by direct double loop, O(N^2).
void hk_drift_all_reference(std::span<const double> followers, double leader,
                            const ModelParams& params, std::span<double> out);

/// Brownian sources of one Monte Carlo path: a leader substream plus one
/// substream per follower.
class PathNoise {
 public:
  PathNoise(const SeedSpec& seed, std::uint64_t path, std::size_t n_followers);
  /// Follower i draws from follower substream ids[i].
  PathNoise(const SeedSpec& seed, std::uint64_t path, std::span<const std::uint64_t> ids);

  double leader() { return leader_(); }
  void followers(std::span<double> out);
  std::size_t follower_count() const { return followers_.size(); }

 private:
  NormalSource leader_;
  std::vector<NormalSource> followers_;
};

/// One Euler-Maruyama step with leader control `u`. Returns the leader's
/// Brownian increment dB^Y (units sqrt(time)).
double euler_step(const ModelParams& params, double dt, double u, SystemState& state,
                  PathNoise& noise, DriftWorkspace& workspace, std::span<double> scratch);

/// Integrates one path over `grid`; followers and leader use independent
/// substreams of `seed` keyed by path_id.
TrajectoryBundle simulate(const ModelParams& params, const TimeGrid& grid,
                          const PiecewiseConstantControl& control, const SystemState& init,
                          const SeedSpec& seed, std::uint64_t path_id = 0);

/// As above with caller-supplied noise (used to permute follower substreams).
TrajectoryBundle simulate(const ModelParams& params, const TimeGrid& grid,
                          const PiecewiseConstantControl& control, const SystemState& init,
                          PathNoise& noise, std::uint64_t path_id = 0);

std::vector<TrajectoryBundle> simulate_paths(const ModelParams& params, const TimeGrid& grid,
                                             const PiecewiseConstantControl& control,
                                             const SystemState& init, const SeedSpec& seed,
                                             std::size_t n_paths, Execution exec);

/// Columns: path_id, step, t, Y, X_0..X_{N-1}.
void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryBundle> paths);
/// Columns: path_id, step, dBY.
void write_noise_csv(std::ostream& out, std::span<const TrajectoryBundle> paths);

}  // namespace mfc

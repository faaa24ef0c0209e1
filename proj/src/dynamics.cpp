#include "mfc/dynamics.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace mfc {

double hk_kernel(double r, double radius, double width) {
  if (width <= 0.0) return r <= radius ? 1.0 : 0.0;
  if (r <= radius - width) return 1.0;
  if (r >= radius + width) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (r - (radius - width)) / (2.0 * width)));
}

double hk_drift(double x, double leader, std::span<const double> followers,
                const ModelParams& params) {
  double follower_term = 0.0;
  if (!followers.empty()) {
    double sum = 0.0;
    for (double y : followers) {
      const double d = geodesic_disp(x, y);
      sum += hk_kernel(std::abs(d), params.radius, params.kernel_width) * d;
    }
    follower_term = params.k * sum / static_cast<double>(followers.size());
  }
  const double dy = geodesic_disp(x, leader);
  return follower_term +
         params.k_leader * hk_kernel(std::abs(dy), params.radius, params.kernel_width) * dy;
}

double running_cost(double leader, std::span<const double> followers) {
  if (followers.empty()) return 0.0;
  double sum = 0.0;
  for (double x : followers) {
    const double d = geodesic_disp(leader, x);
    sum += d * d;
  }
  return sum / static_cast<double>(followers.size());
}

double fraction_within(double leader, std::span<const double> followers, double radius) {
  if (followers.empty()) return 0.0;
  std::size_t count = 0;
  for (double x : followers) count += geodesic_dist(leader, x) <= radius ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(followers.size());
}

void hk_drift_all_reference(std::span<const double> followers, double leader,
                            const ModelParams& params, std::span<double> out) {
  for (std::size_t i = 0; i < followers.size(); ++i)
    out[i] = hk_drift(followers[i], leader, followers, params);
}

void DriftWorkspace::hk_drift_all(std::span<const double> followers, double leader,
                                  const ModelParams& params, std::span<double> out) {
  // The window covers the whole circle at R = 1/2, where rounding can drop an
  // antipodal pair from both copies; the direct sum handles it exactly.
  if (params.kernel_width > 0.0 || params.radius >= 0.5) {
    hk_drift_all_reference(followers, leader, params, out);
    return;
  }
  const std::size_t n = followers.size();
  if (n == 0) return;
  if (order_.size() != n) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }
  // Insertion sort: positions move little between steps.
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t idx = order_[i];
    const double v = followers[idx];
    std::size_t j = i;
    while (j > 0 && followers[order_[j - 1]] > v) {
      order_[j] = order_[j - 1];
      --j;
    }
    order_[j] = idx;
  }
  sorted_.resize(n);
  for (std::size_t p = 0; p < n; ++p) sorted_[p] = followers[order_[p]];

  // Unrolled circle: three copies shifted by -1, 0, +1.
  const std::size_t total = 3 * n;
  extended_.resize(total);
  prefix_.resize(total + 1);
  for (std::size_t p = 0; p < n; ++p) {
    extended_[p] = sorted_[p] - 1.0;
    extended_[n + p] = sorted_[p];
    extended_[2 * n + p] = sorted_[p] + 1.0;
  }
  prefix_[0] = 0.0;
  for (std::size_t q = 0; q < total; ++q) prefix_[q + 1] = prefix_[q] + extended_[q];

  const double radius = params.radius;
  const double scale = params.k / static_cast<double>(n);
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const double xc = sorted_[p];
    while (extended_[lo] - xc < -radius) ++lo;
    hi = std::max(hi, lo);
    while (hi < total) {
      const double d = extended_[hi] - xc;
      if (d > radius || d >= 0.5) break;
      ++hi;
    }
    const double count = static_cast<double>(hi - lo);
    const double sum = (prefix_[hi] - prefix_[lo]) - count * xc;
    const double dy = geodesic_disp(xc, leader);
    out[order_[p]] = scale * sum + params.k_leader * hk_kernel(std::abs(dy), radius) * dy;
  }
}

PathNoise::PathNoise(const SeedSpec& seed, std::uint64_t path, std::size_t n_followers)
    : leader_(substream_seed(seed, Stream::kLeaderNoise, path)) {
  followers_.reserve(n_followers);
  for (std::size_t i = 0; i < n_followers; ++i)
    followers_.emplace_back(substream_seed(seed, Stream::kFollowerNoise, path, i));
}

PathNoise::PathNoise(const SeedSpec& seed, std::uint64_t path,
                     std::span<const std::uint64_t> ids)
    : leader_(substream_seed(seed, Stream::kLeaderNoise, path)) {
  followers_.reserve(ids.size());
  for (std::uint64_t id : ids)
    followers_.emplace_back(substream_seed(seed, Stream::kFollowerNoise, path, id));
}

void PathNoise::followers(std::span<double> out) {
  for (std::size_t i = 0; i < followers_.size(); ++i) out[i] = followers_[i]();
}

double euler_step(const ModelParams& params, double dt, double u, SystemState& state,
                  PathNoise& noise, DriftWorkspace& workspace, std::span<double> scratch) {
  const std::size_t n = state.followers.size();
  const double sqrt_dt = std::sqrt(dt);
  if (n > 0) {
    std::span<double> drift = scratch.first(n);
    workspace.hk_drift_all(state.followers, state.leader, params, drift);
    std::span<double> xi = scratch.subspan(n, n);
    noise.followers(xi);
    for (std::size_t i = 0; i < n; ++i) {
      state.followers[i] =
          wrap(state.followers[i] + drift[i] * dt + params.sigma * sqrt_dt * xi[i]);
    }
  }
  const double dB = sqrt_dt * noise.leader();
  state.leader = wrap(state.leader + u * dt + params.sigma * dB);
  return dB;
}

namespace {

void check_init(const ModelParams& params, const SystemState& init) {
  params.validate();
  if (init.followers.size() != params.n_followers)
    throw std::invalid_argument("initial state does not match the follower count");
  auto valid = [](double x) { return x >= 0.0 && x < 1.0; };
  if (!valid(init.leader) || !std::all_of(init.followers.begin(), init.followers.end(), valid))
    throw std::invalid_argument("initial positions must lie in [0, 1)");
}

}  // namespace

TrajectoryBundle simulate(const ModelParams& params, const TimeGrid& grid,
                          const PiecewiseConstantControl& control, const SystemState& init,
                          PathNoise& noise, std::uint64_t path_id) {
  check_init(params, init);
  if (!(grid.dt > 0)) throw std::invalid_argument("time step must be > 0");
  if (noise.follower_count() != params.n_followers)
    throw std::invalid_argument("noise source does not match the follower count");
  const auto intervals = control.step_intervals(grid);
  const auto coeffs = control.coefficients();

  TrajectoryBundle out;
  out.grid = grid;
  out.params = params;
  out.path_id = path_id;
  out.states.reserve(grid.steps + 1);
  out.leader_increments.reserve(grid.steps);
  out.states.push_back(init);

  SystemState state = init;
  DriftWorkspace workspace;
  std::vector<double> scratch(2 * params.n_followers);
  for (std::size_t j = 0; j < grid.steps; ++j) {
    out.leader_increments.push_back(
        euler_step(params, grid.dt, coeffs[intervals[j]], state, noise, workspace, scratch));
    out.states.push_back(state);
  }
  return out;
}

TrajectoryBundle simulate(const ModelParams& params, const TimeGrid& grid,
                          const PiecewiseConstantControl& control, const SystemState& init,
                          const SeedSpec& seed, std::uint64_t path_id) {
  PathNoise noise(seed, path_id, params.n_followers);
  return simulate(params, grid, control, init, noise, path_id);
}

std::vector<TrajectoryBundle> simulate_paths(const ModelParams& params, const TimeGrid& grid,
                                             const PiecewiseConstantControl& control,
                                             const SystemState& init, const SeedSpec& seed,
                                             std::size_t n_paths, Execution exec) {
  std::vector<TrajectoryBundle> out(n_paths);
  for_each_index(n_paths, exec, [&](std::size_t p) {
    out[p] = simulate(params, grid, control, init, seed, p);
  });
  return out;
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryBundle> paths) {
  const std::size_t n = paths.empty() ? 0 : paths.front().params.n_followers;
  out << "path_id,step,t,Y";
  for (std::size_t i = 0; i < n; ++i) out << ",X_" << i;
  out << '\n';
  for (const auto& path : paths) {
    for (std::size_t j = 0; j < path.states.size(); ++j) {
      const auto& s = path.states[j];
      fmt::print(out, "{},{},{:.17g},{:.17g}", path.path_id, j, path.grid.node(j), s.leader);
      for (double x : s.followers) fmt::print(out, ",{:.17g}", x);
      out << '\n';
    }
  }
}

void write_noise_csv(std::ostream& out, std::span<const TrajectoryBundle> paths) {
  out << "path_id,step,dBY\n";
  for (const auto& path : paths) {
    for (std::size_t j = 0; j < path.leader_increments.size(); ++j)
      fmt::print(out, "{},{},{:.17g}\n", path.path_id, j, path.leader_increments[j]);
  }
}

}  // namespace mfc

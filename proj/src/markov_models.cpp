#include <cmath>
#include <stdexcept>

#include "mfc/optimize.hpp"

namespace mfc {

namespace {

SeedSpec stage_seed(const SeedSpec& planning, std::uint64_t replication, std::size_t stage) {
  return SeedSpec{substream_seed(planning, Stream::kAuxiliary, replication, stage)};
}

}  // namespace

TimeGrid stage_grid(const PiecewiseConstantControl& basis, const TimeGrid& grid, std::size_t stage) {
  const std::size_t first = breakpoint_step(basis, grid, stage);
  const double t = basis.breakpoints()[stage];
  if (std::abs(grid.node(first) - t) > 1e-9 * grid.dt)
    throw std::invalid_argument("control breakpoints must coincide with time grid nodes");
  if (first >= grid.steps) throw std::invalid_argument("stage starts at or after the horizon");
  return TimeGrid{grid.dt, grid.steps - first};
}

double realised_cost(const TrajectoryBundle& traj, const PiecewiseConstantControl& control) {
  const auto intervals = control.step_intervals(traj.grid);
  const auto coeffs = control.coefficients();
  double cost = 0.0;
  for (std::size_t j = 0; j < traj.grid.steps; ++j) {
    const auto& s = traj.states[j];
    const double u = coeffs[intervals[j]];
    cost += (running_cost(s.leader, s.followers) + 0.5 * traj.params.lambda * u * u) * traj.grid.dt;
  }
  return cost;
}

double realised_cost(const MeanFieldTrajectory& traj, const PiecewiseConstantControl& control,
                     double lambda) {
  const auto intervals = control.step_intervals(traj.grid);
  const auto coeffs = control.coefficients();
  double cost = 0.0;
  for (std::size_t j = 0; j < traj.grid.steps; ++j) {
    const double u = coeffs[intervals[j]];
    cost += (mf_running_cost(traj.leader[j], traj.densities[j]) + 0.5 * lambda * u * u) *
            traj.grid.dt;
  }
  return cost;
}

// ---------------------------------------------------------------------------

QuadraticMarkovModel::QuadraticMarkovModel(QuadraticOracle full) : full_(std::move(full)) {}

std::unique_ptr<DerivativeOracle> QuadraticMarkovModel::stage_oracle(std::size_t stage) {
  if (stage != committed_.size()) throw std::logic_error("stages must be solved in order");
  const auto m = static_cast<Eigen::Index>(full_.dimension());
  const auto s = static_cast<Eigen::Index>(stage);
  const auto r = m - s;
  const Eigen::Map<const Eigen::VectorXd> fixed(committed_.data(), s);
  const Eigen::MatrixXd& q = full_.q();
  const Eigen::VectorXd b = full_.b().tail(r) + q.block(s, 0, r, s) * fixed;
  const double c = 0.5 * fixed.dot(q.topLeftCorner(s, s) * fixed) + full_.b().head(s).dot(fixed) +
                   full_.c();
  return std::make_unique<QuadraticOracle>(q.bottomRightCorner(r, r), b, c);
}

void QuadraticMarkovModel::advance(std::size_t stage, double coefficient) {
  if (stage != committed_.size()) throw std::logic_error("stages must be advanced in order");
  committed_.push_back(coefficient);
}

// ---------------------------------------------------------------------------

HkMarkovModel::HkMarkovModel(ModelParams params, TimeGrid grid, PiecewiseConstantControl basis,
                             SystemState init, MarkovMonteCarlo mc, SeedSpec realised_seed,
                             std::uint64_t replication)
    : params_(params),
      grid_(grid),
      basis_(std::move(basis)),
      mc_(mc),
      state_(std::move(init)),
      noise_(realised_seed, replication, params.n_followers),
      scratch_(2 * params.n_followers),
      replication_(replication) {
  params_.validate();
  if (state_.followers.size() != params_.n_followers)
    throw std::invalid_argument("initial state does not match the follower count");
  basis_.step_intervals(grid_);
  realised_.grid = grid_;
  realised_.params = params_;
  realised_.path_id = replication;
  realised_.states.push_back(state_);
}

std::unique_ptr<DerivativeOracle> HkMarkovModel::stage_oracle(std::size_t stage) {
  const TimeGrid remaining = stage_grid(basis_, grid_, stage);
  auto problem = std::make_shared<HkControlProblem>(params_, remaining, state_);
  auto tail = basis_.tail(stage, std::vector<double>(basis_.intervals() - stage, 0.0));
  return std::make_unique<MonteCarloOracle>(std::move(problem), std::move(tail), mc_.n_paths,
                                            stage_seed(mc_.planning_seed, replication_, stage),
                                            mc_.estimator, mc_.exec);
}

void HkMarkovModel::advance(std::size_t stage, double coefficient) {
  const std::size_t first = breakpoint_step(basis_, grid_, stage);
  const std::size_t last =
      stage + 1 == basis_.intervals() ? grid_.steps : breakpoint_step(basis_, grid_, stage + 1);
  if (first != realised_.leader_increments.size())
    throw std::logic_error("stages must be advanced in order");
  for (std::size_t j = first; j < last; ++j) {
    running_ += running_cost(state_.leader, state_.followers) * grid_.dt;
    control_ += 0.5 * params_.lambda * coefficient * coefficient * grid_.dt;
    realised_.leader_increments.push_back(
        euler_step(params_, grid_.dt, coefficient, state_, noise_, workspace_, scratch_));
    realised_.states.push_back(state_);
  }
}

// ---------------------------------------------------------------------------

MeanFieldMarkovModel::MeanFieldMarkovModel(ModelParams params, TimeGrid grid,
                                           PiecewiseConstantControl basis, GridDensity g0,
                                           double leader0, MarkovMonteCarlo mc,
                                           SeedSpec realised_seed, std::uint64_t replication)
    : params_(params),
      grid_(grid),
      basis_(std::move(basis)),
      mc_(mc),
      solver_(params, g0.size()),
      leader_noise_(substream_seed(realised_seed, Stream::kLeaderNoise, replication)),
      g_(g0.values().begin(), g0.values().end()),
      y_(leader0),
      replication_(replication) {
  params_.validate();
  if (grid_.dt > solver_.max_dt() * (1.0 + 1e-12))
    throw std::invalid_argument("time step violates the CFL bound of the Fokker-Planck scheme");
  basis_.step_intervals(grid_);
  realised_.grid = grid_;
  realised_.path_id = replication;
  realised_.densities.push_back(std::move(g0));
  realised_.leader.push_back(leader0);
}

std::unique_ptr<DerivativeOracle> MeanFieldMarkovModel::stage_oracle(std::size_t stage) {
  const TimeGrid remaining = stage_grid(basis_, grid_, stage);
  auto problem = std::make_shared<MeanFieldControlProblem>(params_, remaining, GridDensity(g_), y_);
  auto tail = basis_.tail(stage, std::vector<double>(basis_.intervals() - stage, 0.0));
  return std::make_unique<MonteCarloOracle>(std::move(problem), std::move(tail), mc_.n_paths,
                                            stage_seed(mc_.planning_seed, replication_, stage),
                                            mc_.estimator, mc_.exec);
}

void MeanFieldMarkovModel::advance(std::size_t stage, double coefficient) {
  const std::size_t first = breakpoint_step(basis_, grid_, stage);
  const std::size_t last =
      stage + 1 == basis_.intervals() ? grid_.steps : breakpoint_step(basis_, grid_, stage + 1);
  if (first != realised_.leader_increments.size())
    throw std::logic_error("stages must be advanced in order");
  const double sqrt_dt = std::sqrt(grid_.dt);
  for (std::size_t j = first; j < last; ++j) {
    running_ += mf_running_cost(y_, GridDensity(g_)) * grid_.dt;
    control_ += 0.5 * params_.lambda * coefficient * coefficient * grid_.dt;
    const double dB = sqrt_dt * leader_noise_();
    y_ = wrap(y_ + coefficient * grid_.dt + params_.sigma * dB);
    solver_.step(g_, y_, grid_.dt);
    realised_.leader_increments.push_back(dB);
    realised_.leader.push_back(y_);
    realised_.densities.emplace_back(g_);
  }
}

}  // namespace mfc

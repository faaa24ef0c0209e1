#include "mfc/experiments.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <stdexcept>

namespace mfc {

SystemState initial_state(const ExperimentConfig& config, std::uint64_t draw) {
  SystemState s;
  s.followers = VonMisesMixture::opinion_clusters().sample(SeedSpec{config.seed},
                                                            config.params.n_followers, draw);
  s.leader = config.leader0;
  return s;
}

GridDensity initial_density(std::size_t cells) {
  return GridDensity::from_mixture(VonMisesMixture::opinion_clusters(), cells);
}

SeedSpec planning_seed(const ExperimentConfig& config) {
  return {substream_seed(SeedSpec{config.seed}, Stream::kAuxiliary, 1)};
}

SeedSpec realised_seed(const ExperimentConfig& config) {
  return {substream_seed(SeedSpec{config.seed}, Stream::kAuxiliary, 2)};
}

SeedSpec evaluation_seed(const ExperimentConfig& config) {
  return {substream_seed(SeedSpec{config.seed}, Stream::kAuxiliary, 3)};
}

PairedSummary paired_summary(std::span<const double> diffs, double level) {
  if (diffs.size() < 2) throw std::invalid_argument("paired summary needs >= 2 pairs");
  const auto e = mean_with_error(diffs);
  boost::math::students_t dist(static_cast<double>(diffs.size() - 1));
  PairedSummary out;
  out.mean = e.mean;
  out.std_error = e.std_error;
  out.n = diffs.size();
  out.level = level;
  out.lower = e.mean - boost::math::quantile(dist, level) * e.std_error;
  return out;
}

PairedSummary paired_cost_difference(const ControlProblem& problem,
                                     const PiecewiseConstantControl& basis,
                                     const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                     std::size_t n_paths, const SeedSpec& seed, double level) {
  auto control = [&](const Eigen::VectorXd& v) {
    return basis.with_coefficients(std::vector<double>(v.data(), v.data() + v.size()));
  };
  const auto ca = sample_batch(problem, control(a), n_paths, seed).path_costs();
  const auto cb = sample_batch(problem, control(b), n_paths, seed).path_costs();
  std::vector<double> diff(ca.size());
  for (std::size_t p = 0; p < ca.size(); ++p) diff[p] = ca[p] - cb[p];
  return paired_summary(diff, level);
}

MarkovReplication run_hk_markov(const ExperimentConfig& config, std::uint64_t rep,
                                TrajectoryBundle* controlled, TrajectoryBundle* uncontrolled) {
  const auto grid = config.grid();
  const auto basis = config.basis();
  const SystemState init = initial_state(config, rep);
  const MarkovMonteCarlo mc{config.mc_paths, planning_seed(config), config.estimator(),
                            Execution::kParallel};
  HkMarkovModel model(config.params, grid, basis, init, mc, realised_seed(config), rep);
  MarkovResult result = markov_solve(model, config.start(), config.newton());
  const auto zero = simulate(config.params, grid, basis, init, realised_seed(config), rep);

  MarkovReplication out;
  out.replication = rep;
  out.committed = result.committed;
  out.stages = std::move(result.stages);
  out.cost = model.realised_cost();
  out.zero_cost = realised_cost(zero, basis);
  const auto& last = model.realised().states.back();
  out.within = fraction_within(last.leader, last.followers, config.params.radius);
  const auto& zlast = zero.states.back();
  out.zero_within = fraction_within(zlast.leader, zlast.followers, config.params.radius);
  if (controlled) *controlled = model.realised();
  if (uncontrolled) *uncontrolled = zero;
  return out;
}

MarkovReplication run_mf_markov(const ExperimentConfig& config, std::uint64_t rep,
                                MeanFieldTrajectory* controlled,
                                MeanFieldTrajectory* uncontrolled) {
  const auto grid = config.grid();
  const auto basis = config.basis();
  const GridDensity g0 = initial_density(config.cells);
  const MarkovMonteCarlo mc{config.mc_paths, planning_seed(config), config.estimator(),
                            Execution::kParallel};
  MeanFieldMarkovModel model(config.params, grid, basis, g0, config.leader0, mc,
                             realised_seed(config), rep);
  MarkovResult result = markov_solve(model, config.start(), config.newton());
  const auto zero =
      simulate_mf(config.params, grid, basis, g0, config.leader0, realised_seed(config), rep);

  MarkovReplication out;
  out.replication = rep;
  out.committed = result.committed;
  out.stages = std::move(result.stages);
  out.cost = model.realised_cost();
  out.zero_cost = realised_cost(zero, basis, config.params.lambda);
  const auto& r = model.realised();
  out.within = mass_within(r.leader.back(), r.densities.back(), config.params.radius);
  out.zero_within = mass_within(zero.leader.back(), zero.densities.back(), config.params.radius);
  if (controlled) *controlled = r;
  if (uncontrolled) *uncontrolled = zero;
  return out;
}

}  // namespace mfc

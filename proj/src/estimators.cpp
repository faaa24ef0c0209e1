#include "mfc/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace mfc {

FunctionalAccumulator::FunctionalAccumulator(const PiecewiseConstantControl& control,
                                             const TimeGrid& grid, double sigma)
    : intervals_(control.step_intervals(grid)), dt_(grid.dt) {
  if (!(sigma > 0)) throw std::invalid_argument("leader noise must be invertible (sigma > 0)");
  inv_sigma_ = 1.0 / sigma;
  out_.martingales.assign(control.intervals(), 0.0);
  out_.interval_phi.assign(control.intervals(), 0.0);
}

PathFunctionals FunctionalAccumulator::finish(std::span<const double> coefficients) {
  out_.control_martingale = 0.0;
  for (std::size_t k = 0; k < out_.martingales.size(); ++k)
    out_.control_martingale += coefficients[k] * out_.martingales[k];
  return std::move(out_);
}

EstimateWithError mean_with_error(std::span<const double> values) {
  EstimateWithError out;
  out.n_paths = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    out.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

PathFunctionals path_functionals(const TrajectoryBundle& traj,
                                 const PiecewiseConstantControl& control,
                                 bool zero_running_cost) {
  if (traj.leader_increments.size() != traj.grid.steps || traj.states.size() != traj.grid.steps + 1)
    throw std::invalid_argument("trajectory does not match its time grid");
  FunctionalAccumulator acc(control, traj.grid, traj.params.sigma);
  for (std::size_t j = 0; j < traj.grid.steps; ++j) {
    const auto& s = traj.states[j];
    const double r = zero_running_cost ? 0.0 : running_cost(s.leader, s.followers);
    acc.add(j, r, traj.leader_increments[j]);
  }
  return acc.finish(control.coefficients());
}

HkControlProblem::HkControlProblem(ModelParams params, TimeGrid grid, SystemState init,
                                   bool zero_running_cost)
    : params_(params), grid_(grid), init_(std::move(init)), zero_running_cost_(zero_running_cost) {
  params_.validate();
  if (init_.followers.size() != params_.n_followers)
    throw std::invalid_argument("initial state does not match the follower count");
  if (!(params_.sigma > 0)) throw std::invalid_argument("leader noise must be invertible (sigma > 0)");
}

PathFunctionals HkControlProblem::sample_path(const PiecewiseConstantControl& control,
                                              const SeedSpec& seed, std::uint64_t path) const {
  FunctionalAccumulator acc(control, grid_, params_.sigma);
  const auto coeffs = control.coefficients();
  SystemState state = init_;
  PathNoise noise(seed, path, params_.n_followers);
  DriftWorkspace workspace;
  std::vector<double> scratch(2 * params_.n_followers);
  for (std::size_t j = 0; j < grid_.steps; ++j) {
    const double r = zero_running_cost_ ? 0.0 : running_cost(state.leader, state.followers);
    const double dB =
        euler_step(params_, grid_.dt, coeffs[acc.interval(j)], state, noise, workspace, scratch);
    acc.add(j, r, dB);
  }
  return acc.finish(coeffs);
}

double PathBatch::control_cost() const {
  return 0.5 * lambda * (coefficients.array().square() * interval_lengths.array()).sum();
}

std::vector<double> PathBatch::path_costs() const {
  const double c = control_cost();
  std::vector<double> out(phi.size());
  for (std::size_t p = 0; p < phi.size(); ++p) out[p] = phi[p] + c;
  return out;
}

PathBatch make_batch(std::span<const PathFunctionals> paths, const PiecewiseConstantControl& control,
                     const TimeGrid& grid, double sigma, double lambda) {
  const std::size_t k = control.intervals();
  PathBatch batch;
  batch.sigma = sigma;
  batch.lambda = lambda;
  batch.coefficients = Eigen::Map<const Eigen::VectorXd>(control.coefficients().data(),
                                                          static_cast<Eigen::Index>(k));
  const auto lengths = discrete_interval_lengths(control, grid);
  batch.interval_lengths =
      Eigen::Map<const Eigen::VectorXd>(lengths.data(), static_cast<Eigen::Index>(k));
  batch.phi.resize(paths.size());
  const auto rows = static_cast<Eigen::Index>(paths.size());
  batch.martingales.resize(rows, static_cast<Eigen::Index>(k));
  batch.phi_tail.resize(rows, static_cast<Eigen::Index>(k));
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& f = paths[p];
    if (f.martingales.size() != k || f.interval_phi.size() != k)
      throw std::invalid_argument("path functionals do not match the control basis");
    batch.phi[p] = f.phi;
    const auto row = static_cast<Eigen::Index>(p);
    double before = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      batch.martingales(row, col) = f.martingales[j];
      batch.phi_tail(row, col) = f.phi - before;
      before += f.interval_phi[j];
    }
  }
  return batch;
}

PathBatch sample_batch(const ControlProblem& problem, const PiecewiseConstantControl& control,
                       std::size_t n_paths, const SeedSpec& seed, Execution exec) {
  if (n_paths < 2) throw std::invalid_argument("need at least 2 Monte Carlo paths");
  std::vector<PathFunctionals> paths(n_paths);
  for_each_index(n_paths, exec,
                 [&](std::size_t p) { paths[p] = problem.sample_path(control, seed, p); });
  PathBatch batch = make_batch(paths, control, problem.grid(), problem.sigma(), problem.lambda());
  batch.seed = seed.master;
  return batch;
}

EstimateWithError cost_estimate(const PathBatch& batch) {
  const auto costs = batch.path_costs();
  return mean_with_error(costs);
}

namespace {

// Running-cost weight of score component j on path p: the whole of phi, or
// only what accrues from the start of I_j on. The dropped part is known
// before the increments of M^{e_j} begin, so it is uncorrelated with them.
double cost_weight(const PathBatch& batch, const EstimatorOptions& options, Eigen::Index p,
                   Eigen::Index j) {
  return options.causal ? batch.phi_tail(p, j) : batch.phi[static_cast<std::size_t>(p)];
}

// Batch mean of each cost weight (zero without the baseline).
Eigen::VectorXd cost_baseline(const PathBatch& batch, const EstimatorOptions& options) {
  const auto k = static_cast<Eigen::Index>(batch.dimension());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  if (!options.baseline) return out;
  const auto n = static_cast<Eigen::Index>(batch.size());
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index j = 0; j < k; ++j) out(j) += cost_weight(batch, options, p, j);
  }
  return out / static_cast<double>(n);
}

}  // namespace

GradientEstimate gradient(const PathBatch& batch, const EstimatorOptions& options) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto k = static_cast<Eigen::Index>(batch.dimension());
  if (batch.martingales.cols() != k) throw std::invalid_argument("basis length mismatch");
  const Eigen::VectorXd base = cost_baseline(batch, options);
  const double ls2 = batch.lambda * batch.sigma * batch.sigma;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd analytic = batch.lambda * batch.coefficients.cwiseProduct(batch.interval_lengths);
  // E[(M^u)^2] = sum_l a_l^2 |I_l| / sigma^2 is known, and a constant times
  // M^{e_j} has mean zero, so the baseline also centres the squared term.
  const double mu_sq_mean =
      options.baseline ? (batch.coefficients.array().square() * batch.interval_lengths.array()).sum() /
                             (batch.sigma * batch.sigma)
                       : 0.0;
  for (Eigen::Index p = 0; p < n; ++p) {
    const auto m = batch.martingales.row(p);
    const double mu = m.dot(batch.coefficients);
    const double control = options.control_term == ControlTerm::kGirsanov
                               ? ls2 * (0.5 * (mu * mu - mu_sq_mean) + mu)
                               : 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double v = (cost_weight(batch, options, p, j) - base(j) + control) * m(j);
      if (options.control_term == ControlTerm::kAnalytic) v += analytic(j);
      sum(j) += v;
      sumsq(j) += v * v;
    }
  }
  GradientEstimate out;
  const double nd = static_cast<double>(n);
  out.value = sum / nd;
  out.std_error.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double var = std::max(0.0, (sumsq(j) - nd * out.value(j) * out.value(j)) / (nd - 1.0));
    out.std_error(j) = std::sqrt(var / nd);
  }
  return out;
}

HessianEstimate hessian(const PathBatch& batch, const EstimatorOptions& options) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto k = static_cast<Eigen::Index>(batch.dimension());
  if (batch.martingales.cols() != k) throw std::invalid_argument("basis length mismatch");
  const bool printed = options.hessian_form == HessianForm::kPrinted;
  const Eigen::VectorXd base =
      printed ? Eigen::VectorXd::Zero(k) : cost_baseline(batch, options);
  const double ls2 = batch.lambda * batch.sigma * batch.sigma;
  const double inv_s2 = 1.0 / (batch.sigma * batch.sigma);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index p = 0; p < n; ++p) {
    const auto m = batch.martingales.row(p);
    double control = 0.0;
    if (printed) {
      const double mu = m.dot(batch.coefficients);
      control = ls2 * (0.5 * mu * mu + 2.0 * mu + 1.0);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      // M^{e_i} M^{e_j} (j >= i) has no increments before I_i.
      const double weight =
          printed ? batch.phi[static_cast<std::size_t>(p)] + control
                  : cost_weight(batch, options, p, i) - base(i);
      for (Eigen::Index j = i; j < k; ++j) {
        double score = m(i) * m(j);
        if (!printed && i == j) score -= batch.interval_lengths(i) * inv_s2;
        const double v = weight * score;
        sum(i, j) += v;
        sumsq(i, j) += v * v;
      }
    }
  }
  HessianEstimate out;
  const double nd = static_cast<double>(n);
  out.value = Eigen::MatrixXd::Zero(k, k);
  out.std_error = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      const double mean = sum(i, j) / nd;
      const double var = std::max(0.0, (sumsq(i, j) - nd * mean * mean) / (nd - 1.0));
      double value = mean;
      if (!printed && i == j) value += batch.lambda * batch.interval_lengths(i);
      out.value(i, j) = out.value(j, i) = value;
      out.std_error(i, j) = out.std_error(j, i) = std::sqrt(var / nd);
    }
  }
  return out;
}

EstimateWithError cost_direct(const ControlProblem& problem,
                              const PiecewiseConstantControl& control, std::size_t n_paths,
                              const SeedSpec& seed, Execution exec) {
  return cost_estimate(sample_batch(problem, control, n_paths, seed, exec));
}

ReweightedEstimate cost_reweighted(const PathBatch& base, std::span<const double> coefficients) {
  const auto k = static_cast<Eigen::Index>(base.dimension());
  if (static_cast<Eigen::Index>(coefficients.size()) != k)
    throw std::invalid_argument("basis length mismatch");
  if (!base.coefficients.isZero(0.0))
    throw std::invalid_argument("reweighting needs base paths simulated under zero control");
  const Eigen::Map<const Eigen::VectorXd> a(coefficients.data(), k);
  const double inv_s2 = 1.0 / (base.sigma * base.sigma);
  const double quad = 0.5 * inv_s2 * (a.array().square() * base.interval_lengths.array()).sum();
  const double control_cost =
      0.5 * base.lambda * (a.array().square() * base.interval_lengths.array()).sum();

  const std::size_t n = base.size();
  std::vector<double> weighted(n);
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double log_z =
        base.martingales.row(static_cast<Eigen::Index>(p)).dot(a) - quad;
    const double z = std::exp(log_z);
    weighted[p] = z * (base.phi[p] + control_cost);
    sum_w += z;
    sum_w2 += z * z;
  }
  ReweightedEstimate out;
  out.estimate = mean_with_error(weighted);
  out.effective_sample_size = sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
  out.degenerate = out.effective_sample_size < 0.1 * static_cast<double>(n);
  return out;
}

nlohmann::json derivatives_json(const PathBatch& batch, const GradientEstimate& grad,
                                const HessianEstimate& hess) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      rows.emplace_back();
      for (Eigen::Index j = 0; j < m.cols(); ++j) rows.back().push_back(m(i, j));
    }
    return rows;
  };
  return {{"a", vec(batch.coefficients)},  {"grad", vec(grad.value)},
          {"grad_se", vec(grad.std_error)}, {"hess", mat(hess.value)},
          {"hess_se", mat(hess.std_error)}, {"n_paths", batch.size()},
          {"seed", batch.seed}};
}

}  // namespace mfc

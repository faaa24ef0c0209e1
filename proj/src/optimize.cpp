#include "mfc/optimize.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mfc {

namespace {

constexpr std::size_t kCachedBatches = 3;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void require_finite(const DerivativeSample& s) {
  if (!std::isfinite(s.value) || !s.grad.allFinite() || !s.hess.allFinite())
    throw NumericalError("derivative oracle returned non-finite values");
}

}  // namespace

// ---------------------------------------------------------------------------
// Oracles

MonteCarloOracle::MonteCarloOracle(const ControlProblem& problem, PiecewiseConstantControl basis,
                                   std::size_t n_paths, SeedSpec seed, EstimatorOptions options,
                                   Execution exec)
    : problem_(problem),
      basis_(std::move(basis)),
      n_paths_(n_paths),
      seed_(seed),
      options_(options),
      exec_(exec) {}

MonteCarloOracle::MonteCarloOracle(std::shared_ptr<const ControlProblem> problem,
                                   PiecewiseConstantControl basis, std::size_t n_paths,
                                   SeedSpec seed, EstimatorOptions options, Execution exec)
    : owned_(std::move(problem)),
      problem_(*owned_),
      basis_(std::move(basis)),
      n_paths_(n_paths),
      seed_(seed),
      options_(options),
      exec_(exec) {}

const PathBatch& MonteCarloOracle::batch(const Eigen::VectorXd& a) {
  if (static_cast<std::size_t>(a.size()) != basis_.intervals())
    throw std::invalid_argument("coefficient vector does not match the control basis");
  for (const auto& b : cache_) {
    if (b.coefficients == a) return b;
  }
  if (cache_.size() == kCachedBatches) cache_.erase(cache_.begin());
  cache_.push_back(sample_batch(problem_, basis_.with_coefficients(to_std(a)), n_paths_, seed_, exec_));
  ++simulated_;
  return cache_.back();
}

DerivativeSample MonteCarloOracle::evaluate(const Eigen::VectorXd& a) {
  const PathBatch& b = batch(a);
  const auto cost = cost_estimate(b);
  const auto g = gradient(b, options_);
  const auto h = hessian(b, options_);
  return {a, cost.mean, cost.std_error, g.value, g.std_error, h.value, h.std_error};
}

CostComparison MonteCarloOracle::compare(const Eigen::VectorXd& base, const Eigen::VectorXd& trial) {
  const std::vector<double> before = batch(base).path_costs();
  const std::vector<double> after = batch(trial).path_costs();
  std::vector<double> diff(before.size());
  double sum = 0.0;
  for (std::size_t p = 0; p < diff.size(); ++p) {
    diff[p] = after[p] - before[p];
    sum += after[p];
  }
  const auto d = mean_with_error(diff);
  return {sum / static_cast<double>(after.size()), d.mean, d.std_error};
}

QuadraticOracle::QuadraticOracle(Eigen::MatrixXd q, Eigen::VectorXd b, double c)
    : q_(std::move(q)), b_(std::move(b)), c_(c) {
  if (q_.rows() != b_.size() || q_.cols() != b_.size())
    throw std::invalid_argument("quadratic oracle: Q must be square and match b");
  q_ = 0.5 * (q_ + q_.transpose()).eval();
}

QuadraticOracle QuadraticOracle::pure_control(const PiecewiseConstantControl& basis,
                                              const TimeGrid& grid, double lambda) {
  const auto len = discrete_interval_lengths(basis, grid);
  Eigen::VectorXd d(static_cast<Eigen::Index>(len.size()));
  for (std::size_t k = 0; k < len.size(); ++k) d(static_cast<Eigen::Index>(k)) = lambda * len[k];
  return {d.asDiagonal(), Eigen::VectorXd::Zero(d.size()), 0.0};
}

double QuadraticOracle::value(const Eigen::VectorXd& a) const {
  return 0.5 * a.dot(q_ * a) + b_.dot(a) + c_;
}

DerivativeSample QuadraticOracle::evaluate(const Eigen::VectorXd& a) {
  const auto k = b_.size();
  return {a,
          value(a),
          0.0,
          q_ * a + b_,
          Eigen::VectorXd::Zero(k),
          q_,
          Eigen::MatrixXd::Zero(k, k)};
}

CostComparison QuadraticOracle::compare(const Eigen::VectorXd& base, const Eigen::VectorXd& trial) {
  const double t = value(trial);
  return {t, t - value(base), 0.0};
}

// ---------------------------------------------------------------------------
// Newton

const char* to_string(NewtonStatus status) {
  switch (status) {
    case NewtonStatus::kConverged:
      return "converged";
    case NewtonStatus::kMaxIterations:
      return "max_iterations";
    case NewtonStatus::kNoDescent:
      return "no_descent";
  }
  return "unknown";
}

NewtonReport newton_solve(DerivativeOracle& oracle, const Eigen::VectorXd& a0,
                          const NewtonOptions& options) {
  const auto dim = static_cast<Eigen::Index>(oracle.dimension());
  if (a0.size() != dim) throw std::invalid_argument("starting point does not match the oracle");
  if (!a0.allFinite()) throw std::invalid_argument("starting point must be finite");

  DerivativeSample current = oracle.evaluate(a0);
  require_finite(current);
  NewtonReport report;
  report.tol = options.tol > 0 ? options.tol : 1e-4 * (1.0 + std::abs(current.value));
  report.iterates.push_back(
      {a0, current.value, current.value_se, current.grad.norm(), 0.0, 1.0, Eigen::VectorXd::Zero(dim)});

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    const Eigen::MatrixXd h = 0.5 * (current.hess + current.hess.transpose());
    double scale = h.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(scale > 0)) scale = 1.0;

    bool factorised = false;
    bool accepted = false;
    double tau = 0.0;
    double factor = 1.0;
    Eigen::VectorXd trial;
    Eigen::MatrixXd shifted;
    CostComparison cmp;
    for (std::size_t s = 0; s <= options.shift_steps && !accepted; ++s) {
      tau = s == 0 ? 0.0 : options.first_shift * scale * std::pow(10.0, static_cast<double>(s - 1));
      shifted = h + tau * eye;
      Eigen::LLT<Eigen::MatrixXd> llt(shifted);
      if (llt.info() != Eigen::Success) continue;
      factorised = true;
      const Eigen::VectorXd step = -llt.solve(current.grad);
      factor = 1.0;
      for (std::size_t halving = 0; halving <= options.max_halvings; ++halving) {
        trial = current.a + factor * step;
        cmp = oracle.compare(current.a, trial);
        const double slack =
            options.noise_factor * cmp.difference_se + 1e-12 * (1.0 + std::abs(current.value));
        if (cmp.difference <= slack) {
          accepted = true;
          break;
        }
        factor *= 0.5;
      }
    }
    if (!factorised)
      throw NumericalError(
          fmt::format("Hessian stays indefinite after Levenberg shift {:.3g}", tau));
    if (!accepted) {
      report.status = NewtonStatus::kNoDescent;
      return report;
    }

    const Eigen::MatrixXd inverse = shifted.llt().solve(eye);
    const Eigen::VectorXd step_se =
        factor * (inverse.array().square().matrix() * current.grad_se.array().square().matrix())
                     .cwiseSqrt();
    DerivativeSample next = oracle.evaluate(trial);
    require_finite(next);
    report.iterates.push_back(
        {trial, next.value, next.value_se, next.grad.norm(), tau, factor, step_se});
    const double change = std::abs(next.value - current.value);
    current = std::move(next);
    if (change < report.tol) {
      report.status = NewtonStatus::kConverged;
      return report;
    }
  }
  report.status = NewtonStatus::kMaxIterations;
  return report;
}

void write_iteration_csv(std::ostream& out, const NewtonReport& report) {
  const auto m = report.iterates.empty() ? 0 : report.iterates.front().a.size();
  out << "iter";
  for (Eigen::Index k = 0; k < m; ++k) out << ",a_" << k + 1;
  out << ",J,J_se,grad_norm,damping\n";
  for (std::size_t i = 0; i < report.iterates.size(); ++i) {
    const auto& it = report.iterates[i];
    out << i;
    for (Eigen::Index k = 0; k < m; ++k) fmt::print(out, ",{:.17g}", it.a(k));
    fmt::print(out, ",{:.17g},{:.17g},{:.17g},{:.17g}\n", it.value, it.value_se, it.grad_norm,
               it.damping);
  }
}

// ---------------------------------------------------------------------------
// Receding horizon

MarkovResult markov_solve(MarkovModel& model, const Eigen::VectorXd& a0,
                          const NewtonOptions& options) {
  const std::size_t m = model.intervals();
  if (static_cast<std::size_t>(a0.size()) != m)
    throw std::invalid_argument("warm start does not match the number of intervals");
  MarkovResult result;
  Eigen::VectorXd warm = a0;
  for (std::size_t stage = 0; stage + 1 < m; ++stage) {
    auto oracle = model.stage_oracle(stage);
    NewtonReport report = newton_solve(*oracle, warm, options);
    const Eigen::VectorXd& solution = report.final_a();
    result.committed.push_back(solution(0));
    model.advance(stage, solution(0));
    warm = solution.tail(solution.size() - 1);
    result.stages.push_back(std::move(report));
  }
  result.committed.push_back(warm(0));
  model.advance(m - 1, warm(0));
  return result;
}

// ---------------------------------------------------------------------------
// Finite differences

GradientCheck fd_gradient_check(const ControlProblem& problem,
                                const PiecewiseConstantControl& control, double h,
                                std::size_t n_paths, const SeedSpec& seed,
                                const EstimatorOptions& options, Execution exec) {
  if (!(h > 0)) throw std::invalid_argument("finite-difference step must be > 0");
  const std::size_t m = control.intervals();
  const auto centre = sample_batch(problem, control, n_paths, seed, exec);
  const auto g = gradient(centre, options);

  GradientCheck out;
  out.estimate = g.value;
  out.estimate_se = g.std_error;
  out.finite_difference.resize(static_cast<Eigen::Index>(m));
  out.finite_difference_se.resize(static_cast<Eigen::Index>(m));
  out.steps.resize(static_cast<Eigen::Index>(m));
  out.relative_error.resize(static_cast<Eigen::Index>(m));
  out.resolved.assign(m, false);
  out.max_relative_error = std::numeric_limits<double>::quiet_NaN();

  const auto a = control.coefficients();
  for (std::size_t k = 0; k < m; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double step = h * std::max(1.0, std::abs(a[k]));
    std::vector<double> plus(a.begin(), a.end());
    std::vector<double> minus(a.begin(), a.end());
    plus[k] += step;
    minus[k] -= step;
    const auto up = sample_batch(problem, control.with_coefficients(plus), n_paths, seed, exec);
    const auto down = sample_batch(problem, control.with_coefficients(minus), n_paths, seed, exec);
    const auto cu = up.path_costs();
    const auto cd = down.path_costs();
    std::vector<double> quotient(cu.size());
    for (std::size_t p = 0; p < cu.size(); ++p) quotient[p] = (cu[p] - cd[p]) / (2.0 * step);
    const auto fd = mean_with_error(quotient);
    out.steps(i) = step;
    out.finite_difference(i) = fd.mean;
    out.finite_difference_se(i) = fd.std_error;
    out.relative_error(i) = std::abs(g.value(i) - fd.mean) / std::abs(fd.mean);
    out.resolved[k] = std::abs(g.value(i)) > 5.0 * g.std_error(i);
    if (out.resolved[k]) {
      const double e = out.relative_error(i);
      out.max_relative_error = std::isnan(out.max_relative_error) ? e : std::max(out.max_relative_error, e);
    }
  }
  return out;
}

nlohmann::json to_json(const GradientCheck& check) {
  nlohmann::json resolved = nlohmann::json::array();
  for (bool r : check.resolved) resolved.push_back(r);
  nlohmann::json out = {{"estimate", to_std(check.estimate)},
                        {"estimate_se", to_std(check.estimate_se)},
                        {"finite_difference", to_std(check.finite_difference)},
                        {"finite_difference_se", to_std(check.finite_difference_se)},
                        {"steps", to_std(check.steps)},
                        {"resolved", resolved},
                        {"relative_error", to_std(check.relative_error)}};
  if (std::isnan(check.max_relative_error))
    out["max_relative_error"] = nullptr;
  else
    out["max_relative_error"] = check.max_relative_error;
  return out;
}

}  // namespace mfc

#include "mfc/chaos.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "mfc/dynamics.hpp"
#include "mfc/estimators.hpp"
#include "mfc/transport.hpp"

namespace mfc {

namespace {

std::size_t quantile_atoms(std::size_t n, std::size_t floor) {
  return n * std::max<std::size_t>(1, (floor + n - 1) / n);
}

double ols(std::span<const double> x, std::span<const double> y, double* intercept) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0)) throw std::invalid_argument("slope fit needs distinct N values");
  const double slope = sxy / sxx;
  if (intercept) *intercept = my - slope * mx;
  return slope;
}

}  // namespace

MeanFieldTrajectory chaos_reference(const ChaosSetup& setup, std::uint64_t rep) {
  return simulate_mf(setup.params, setup.grid, setup.control, setup.g0, setup.leader0, setup.seed,
                     rep);
}

ChaosRecord coupled_run(const ChaosSetup& setup, std::span<const double> followers,
                        std::uint64_t rep, const MeanFieldTrajectory& reference) {
  const std::size_t n = followers.size();
  if (n == 0) throw std::invalid_argument("coupled run needs >= 1 follower");
  if (reference.grid.steps != setup.grid.steps || reference.path_id != rep)
    throw std::invalid_argument("mean-field reference does not match the coupled run");
  ModelParams params = setup.params;
  params.n_followers = n;
  SystemState init{std::vector<double>(followers.begin(), followers.end()), setup.leader0};
  const auto traj = simulate(params, setup.grid, setup.control, init, setup.seed, rep);

  const std::size_t m = quantile_atoms(n, setup.min_quantile_atoms);
  ChaosRecord out;
  out.n_followers = n;
  out.replication = rep;
  for (std::size_t j = 0; j <= setup.grid.steps; ++j) {
    const EmpiricalMeasure mu(traj.states[j].followers);
    const double w2 = w2_circle_density(mu, reference.densities[j], m);
    const double dy = geodesic_disp(traj.states[j].leader, reference.leader[j]);
    out.sup_w2_sq = std::max(out.sup_w2_sq, w2 * w2);
    out.sup_dy_sq = std::max(out.sup_dy_sq, dy * dy);
  }
  return out;
}

ChaosRecord coupled_run(const ChaosSetup& setup, std::size_t n, std::uint64_t rep) {
  SplitMix64 engine(substream_seed(setup.seed, Stream::kInitialConditions, rep, n));
  const auto followers = setup.g0.sample(engine, n);
  return coupled_run(setup, followers, rep, chaos_reference(setup, rep));
}

ChaosStudy convergence_study(const ChaosSetup& setup, std::span<const std::size_t> n_list,
                             std::size_t reps, Execution exec) {
  if (n_list.empty()) throw std::invalid_argument("chaos study needs a non-empty N list");
  if (!std::is_sorted(n_list.begin(), n_list.end()) ||
      std::adjacent_find(n_list.begin(), n_list.end()) != n_list.end())
    throw std::invalid_argument("N list must be strictly ascending");
  if (n_list.front() == 0) throw std::invalid_argument("N list entries must be >= 1");
  if (reps < 5) throw std::invalid_argument("chaos study needs >= 5 replications");

  const std::size_t cols = n_list.size();
  std::vector<ChaosRecord> grid(reps * cols);
  for_each_index(reps, exec, [&](std::size_t rep) {
    const auto reference = chaos_reference(setup, rep);
    for (std::size_t c = 0; c < cols; ++c) {
      SplitMix64 engine(substream_seed(setup.seed, Stream::kInitialConditions, rep, n_list[c]));
      const auto followers = setup.g0.sample(engine, n_list[c]);
      grid[rep * cols + c] = coupled_run(setup, followers, rep, reference);
    }
  });

  ChaosStudy study;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t rep = 0; rep < reps; ++rep) study.records.push_back(grid[rep * cols + c]);
  }
  study.rows = summarise(study.records);
  return study;
}

std::vector<ChaosRow> summarise(std::span<const ChaosRecord> records) {
  std::map<std::size_t, std::vector<const ChaosRecord*>> groups;
  for (const auto& r : records) groups[r.n_followers].push_back(&r);
  std::vector<ChaosRow> rows;
  for (const auto& [n, group] : groups) {
    std::vector<double> w2;
    std::vector<double> dy;
    for (const auto* r : group) {
      w2.push_back(r->sup_w2_sq);
      dy.push_back(r->sup_dy_sq);
    }
    const auto ew = mean_with_error(w2);
    const auto ed = mean_with_error(dy);
    rows.push_back({n, group.size(), ew.mean, ew.std_error, ed.mean, ed.std_error});
  }
  return rows;
}

SlopeFit fit_slope(std::span<const ChaosRow> rows) {
  if (rows.size() < 3) throw std::invalid_argument("slope fit needs >= 3 rows");
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : rows) {
    if (!(r.mean_w2_sq > 0)) throw std::invalid_argument("slope fit needs positive means");
    x.push_back(std::log(static_cast<double>(r.n_followers)));
    y.push_back(std::log(r.mean_w2_sq));
  }
  SlopeFit fit;
  fit.slope = ols(x, y, &fit.intercept);
  fit.ci_low = fit.ci_high = fit.slope;
  return fit;
}

SlopeFit fit_slope(std::span<const ChaosRecord> records, std::size_t resamples,
                   const SeedSpec& seed, double level) {
  if (!(level > 0 && level < 1)) throw std::invalid_argument("confidence level must be in (0, 1)");
  const auto rows = summarise(records);
  SlopeFit fit = fit_slope(rows);
  fit.level = level;
  fit.resamples = resamples;
  if (resamples == 0) return fit;

  std::map<std::size_t, std::vector<double>> groups;
  for (const auto& r : records) groups[r.n_followers].push_back(r.sup_w2_sq);
  std::vector<double> x;
  for (const auto& [n, values] : groups) x.push_back(std::log(static_cast<double>(n)));

  SplitMix64 engine(substream_seed(seed, Stream::kAuxiliary, 0x5107e));
  std::vector<double> slopes;
  slopes.reserve(resamples);
  std::vector<double> y(x.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    bool valid = true;
    std::size_t g = 0;
    for (const auto& [n, values] : groups) {
      double sum = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const auto pick = static_cast<std::size_t>(engine.uniform() * static_cast<double>(values.size()));
        sum += values[std::min(pick, values.size() - 1)];
      }
      if (!(sum > 0)) valid = false;
      y[g++] = std::log(sum / static_cast<double>(values.size()));
    }
    if (valid) slopes.push_back(ols(x, y, nullptr));
  }
  if (slopes.empty()) throw std::invalid_argument("bootstrap produced no valid resample");
  std::sort(slopes.begin(), slopes.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(slopes.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, slopes.size() - 1);
    return slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);
  };
  fit.ci_low = quantile(0.5 * (1.0 - level));
  fit.ci_high = quantile(0.5 * (1.0 + level));
  return fit;
}

void write_study_csv(std::ostream& out, std::span<const ChaosRecord> records) {
  out << "N,rep,sup_w2_sq,sup_dy_sq\n";
  for (const auto& r : records)
    fmt::print(out, "{},{},{:.17g},{:.17g}\n", r.n_followers, r.replication, r.sup_w2_sq,
               r.sup_dy_sq);
}

nlohmann::json to_json(const SlopeFit& fit, std::span<const ChaosRow> rows) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : rows) {
    table.push_back({{"N", r.n_followers},
                     {"reps", r.replications},
                     {"mean_sup_w2_sq", r.mean_w2_sq},
                     {"se_sup_w2_sq", r.se_w2_sq},
                     {"mean_sup_dy_sq", r.mean_dy_sq},
                     {"se_sup_dy_sq", r.se_dy_sq}});
  }
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"ci", {fit.ci_low, fit.ci_high}},
          {"level", fit.level},
          {"bootstrap_resamples", fit.resamples},
          {"rows", table}};
}

}  // namespace mfc

#include "mfc/meanfield.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "mfc/dynamics.hpp"

namespace mfc {

namespace {
constexpr double kNegativityTolerance = 1e-14;
}

GridDensity::GridDensity(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("grid density needs >= 1 cell");
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::invalid_argument("grid density values must be finite");
  }
}

GridDensity GridDensity::uniform(std::size_t n) { return GridDensity(std::vector<double>(n, 1.0)); }

GridDensity GridDensity::from_mixture(const VonMisesMixture& mixture, std::size_t n) {
  if (n == 0) throw std::invalid_argument("grid density needs >= 1 cell");
  const double dx = 1.0 / static_cast<double>(n);
  std::vector<double> v(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) * dx;
    v[i] = mixture.mass(lo, std::min(1.0, lo + dx));
    total += v[i];
  }
  for (double& x : v) x /= total * dx;
  return GridDensity(std::move(v));
}

GridDensity GridDensity::histogram(std::span<const double> atoms, std::size_t n) {
  if (atoms.empty()) throw std::invalid_argument("histogram needs >= 1 atom");
  std::vector<double> v(n, 0.0);
  const double weight = static_cast<double>(n) / static_cast<double>(atoms.size());
  for (double x : atoms) {
    auto cell = static_cast<std::size_t>(wrap(x) * static_cast<double>(n));
    v[std::min(cell, n - 1)] += weight;
  }
  return GridDensity(std::move(v));
}

double GridDensity::mass() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) * dx();
}

double GridDensity::min() const { return *std::min_element(values_.begin(), values_.end()); }

std::vector<double> GridDensity::sample(SplitMix64& engine, std::size_t count) const {
  std::vector<double> cumulative(values_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    acc += std::max(values_[i], 0.0) * dx();
    cumulative[i] = acc;
  }
  std::vector<double> out(count);
  for (auto& x : out) {
    const double u = engine.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto cell = std::min<std::size_t>(it - cumulative.begin(), values_.size() - 1);
    x = wrap((static_cast<double>(cell) + engine.uniform()) * dx());
  }
  return out;
}

double mf_drift(std::size_t cell, double leader, const GridDensity& g, const ModelParams& params) {
  const double x = g.centre(cell);
  double sum = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double d = geodesic_disp(x, g.centre(j));
    sum += hk_kernel(std::abs(d), params.radius, params.kernel_width) * d * g[j];
  }
  const double dy = geodesic_disp(x, leader);
  return params.k * sum * g.dx() +
         params.k_leader * hk_kernel(std::abs(dy), params.radius, params.kernel_width) * dy;
}

double cfl_max_dt(const ModelParams& params, double dx) {
  if (!(dx > 0)) throw std::invalid_argument("cell width must be > 0");
  const double denom =
      2.0 * dx * (params.k + params.k_leader) * params.radius + params.sigma * params.sigma;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return dx * dx / denom;
}

double mf_running_cost(double leader, const GridDensity& g) {
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = geodesic_disp(leader, g.centre(i));
    sum += d * d * g[i];
  }
  return sum * g.dx();
}

double mass_within(double leader, const GridDensity& g, double radius) {
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (geodesic_dist(leader, g.centre(i)) <= radius) sum += g[i];
  }
  return sum * g.dx();
}

double chang_cooper_weight(double w) {
  if (std::abs(w) < 1e-4) return 0.5 + w / 12.0 - w * w * w / 720.0;
  return 1.0 - 1.0 / w + 1.0 / std::expm1(w);
}

FokkerPlanckSolver::FokkerPlanckSolver(const ModelParams& params, std::size_t cells)
    : params_(params),
      n_(cells),
      dx_(1.0 / static_cast<double>(cells)),
      max_dt_(cfl_max_dt(params, 1.0 / static_cast<double>(cells))),
      centre_drift_(cells),
      flux_(cells) {
  if (cells < 2) throw std::invalid_argument("Fokker-Planck grid needs >= 2 cells");
  const auto half = static_cast<std::ptrdiff_t>(cells / 2);
  const auto count = static_cast<std::ptrdiff_t>(cells);
  for (std::ptrdiff_t o = -half; o < count - half; ++o) {
    const double d = geodesic_disp(0.0, static_cast<double>(o) * dx_);
    const double w = hk_kernel(std::abs(d), params.radius, params.kernel_width) * d;
    if (w != 0.0) {
      stencil_.emplace_back(o, w * dx_);
      reach_ = std::max(reach_, static_cast<std::size_t>(o < 0 ? -o : o));
    }
  }
  padded_.assign(n_ + 2 * reach_, 0.0);
  sums_.assign(n_, 0.0);
}

void FokkerPlanckSolver::drift(std::span<const double> g, double leader,
                               std::span<double> out) const {
  // Periodic copy of g padded by the stencil reach on both sides.
  const std::size_t pad = reach_;
  auto& ext = padded_;
  for (std::size_t p = 0; p < pad; ++p) {
    ext[p] = g[n_ - pad + p];
    ext[pad + n_ + p] = g[p];
  }
  std::copy(g.begin(), g.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  // Offset-major order so the inner loop vectorises; each cell still sums
  // its stencil terms in ascending offset order.
  auto& sum = sums_;
  std::fill(sum.begin(), sum.end(), 0.0);
  for (const auto& [o, w] : stencil_) {
    const double* shifted = ext.data() + static_cast<std::ptrdiff_t>(pad) + o;
    for (std::size_t i = 0; i < n_; ++i) sum[i] += w * shifted[i];
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const double dy = geodesic_disp((static_cast<double>(i) + 0.5) * dx_, leader);
    out[i] = params_.k * sum[i] +
             params_.k_leader * hk_kernel(std::abs(dy), params_.radius, params_.kernel_width) * dy;
  }
}

void FokkerPlanckSolver::step(std::span<double> g, double leader, double dt) {
  if (g.size() != n_) throw std::invalid_argument("density size does not match the solver grid");
  if (!(dt > 0) || dt > max_dt_ * (1.0 + 1e-12))
    throw std::invalid_argument("time step violates the CFL bound of the Fokker-Planck scheme");
  drift(g, leader, centre_drift_);
  const double diffusion = 0.5 * params_.sigma * params_.sigma;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t r = (i + 1 == n_) ? 0 : i + 1;
    const double b = 0.5 * (centre_drift_[i] + centre_drift_[r]);
    if (diffusion > 0.0) {
      const double delta = chang_cooper_weight(b * dx_ / diffusion);
      flux_[i] = b * (delta * g[i] + (1.0 - delta) * g[r]) - diffusion * (g[r] - g[i]) / dx_;
    } else {
      flux_[i] = b * (b > 0.0 ? g[i] : g[r]);
    }
  }
  const double ratio = dt / dx_;
  double lowest = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t l = (i == 0) ? n_ - 1 : i - 1;
    g[i] -= ratio * (flux_[i] - flux_[l]);
    lowest = std::min(lowest, g[i]);
  }
  if (lowest < 0.0) {
    if (lowest < -kNegativityTolerance)
      throw NumericalError("Fokker-Planck step produced negative density");
    double before = 0.0;
    double after = 0.0;
    for (double& v : g) {
      before += v;
      v = std::max(v, 0.0);
      after += v;
    }
    for (double& v : g) v *= before / after;
  }
}

GridDensity fp_step(const GridDensity& g, double leader, const ModelParams& params, double dt) {
  FokkerPlanckSolver solver(params, g.size());
  std::vector<double> v(g.values().begin(), g.values().end());
  solver.step(v, leader, dt);
  return GridDensity(std::move(v));
}

MeanFieldTrajectory simulate_mf(const ModelParams& params, const TimeGrid& grid,
                                const PiecewiseConstantControl& control, const GridDensity& g0,
                                double leader0, const SeedSpec& seed, std::uint64_t path_id) {
  params.validate();
  FokkerPlanckSolver solver(params, g0.size());
  if (grid.dt > solver.max_dt() * (1.0 + 1e-12))
    throw std::invalid_argument("time step violates the CFL bound of the Fokker-Planck scheme");
  const auto intervals = control.step_intervals(grid);
  const auto coeffs = control.coefficients();
  NormalSource leader_noise(substream_seed(seed, Stream::kLeaderNoise, path_id));

  MeanFieldTrajectory out;
  out.grid = grid;
  out.path_id = path_id;
  out.densities.reserve(grid.steps + 1);
  out.densities.push_back(g0);
  out.leader.push_back(leader0);
  std::vector<double> g(g0.values().begin(), g0.values().end());
  double y = leader0;
  const double sqrt_dt = std::sqrt(grid.dt);
  for (std::size_t j = 0; j < grid.steps; ++j) {
    const double dB = sqrt_dt * leader_noise();
    y = wrap(y + coeffs[intervals[j]] * grid.dt + params.sigma * dB);
    solver.step(g, y, grid.dt);
    out.leader_increments.push_back(dB);
    out.leader.push_back(y);
    out.densities.emplace_back(g);
  }
  return out;
}

void write_density_csv(std::ostream& out, std::span<const MeanFieldTrajectory> paths) {
  const std::size_t n = paths.empty() ? 0 : paths.front().densities.front().size();
  out << "path_id,step,t,Y";
  for (std::size_t i = 0; i < n; ++i) out << ",g_" << i;
  out << '\n';
  for (const auto& path : paths) {
    for (std::size_t j = 0; j < path.densities.size(); ++j) {
      fmt::print(out, "{},{},{:.17g},{:.17g}", path.path_id, j, path.grid.node(j), path.leader[j]);
      for (double v : path.densities[j].values()) fmt::print(out, ",{:.17g}", v);
      out << '\n';
    }
  }
}

MeanFieldControlProblem::MeanFieldControlProblem(ModelParams params, TimeGrid grid,
                                                 GridDensity g0, double leader0,
                                                 bool zero_running_cost)
    : params_(params),
      grid_(grid),
      g0_(std::move(g0)),
      leader0_(leader0),
      zero_running_cost_(zero_running_cost) {
  params_.validate();
  if (!(params_.sigma > 0)) throw std::invalid_argument("leader noise must be invertible (sigma > 0)");
  if (grid_.dt > cfl_max_dt(params_, g0_.dx()) * (1.0 + 1e-12))
    throw std::invalid_argument("time step violates the CFL bound of the Fokker-Planck scheme");
}

PathFunctionals MeanFieldControlProblem::sample_path(const PiecewiseConstantControl& control,
                                                     const SeedSpec& seed,
                                                     std::uint64_t path) const {
  FunctionalAccumulator acc(control, grid_, params_.sigma);
  FokkerPlanckSolver solver(params_, g0_.size());
  NormalSource leader_noise(substream_seed(seed, Stream::kLeaderNoise, path));
  const auto coeffs = control.coefficients();
  std::vector<double> g(g0_.values().begin(), g0_.values().end());
  double y = leader0_;
  const double sqrt_dt = std::sqrt(grid_.dt);
  for (std::size_t j = 0; j < grid_.steps; ++j) {
    double r = 0.0;
    if (!zero_running_cost_) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = geodesic_disp(y, (static_cast<double>(i) + 0.5) * g0_.dx());
        r += d * d * g[i];
      }
      r *= g0_.dx();
    }
    const double dB = sqrt_dt * leader_noise();
    acc.add(j, r, dB);
    y = wrap(y + coeffs[acc.interval(j)] * grid_.dt + params_.sigma * dB);
    solver.step(g, y, grid_.dt);
  }
  return acc.finish(coeffs);
}

}  // namespace mfc

#include "mfc/core.hpp"

#include <omp.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/random/normal_distribution.hpp>
#include <numbers>
#include <sstream>

namespace mfc {

std::vector<std::string> ModelParams::violations() const {
  std::vector<std::string> out;
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(k) || !finite(k_leader) || !finite(sigma) || !finite(radius) ||
      !finite(lambda) || !finite(horizon) || !finite(kernel_width)) {
    out.emplace_back("all model parameters must be finite");
    return out;
  }
  if (k < 0) out.emplace_back("k must be >= 0");
  if (k_leader < 0) out.emplace_back("k_leader must be >= 0");
  if (sigma < 0) out.emplace_back("sigma must be >= 0");
  if (!(radius > 0 && radius <= 0.5)) out.emplace_back("radius must lie in (0, 0.5]");
  if (!(lambda > 0)) out.emplace_back("lambda must be a positive constant");
  if (!(horizon > 0)) out.emplace_back("horizon must be > 0");
  if (kernel_width < 0 || kernel_width >= radius)
    out.emplace_back("kernel_width must lie in [0, radius)");
  if (radius + kernel_width > 0.5) out.emplace_back("radius + kernel_width must be <= 0.5");
  return out;
}

void ModelParams::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid model parameters:";
  for (const auto& s : v) msg << ' ' << s << ';';
  throw std::invalid_argument(msg.str());
}

TimeGrid TimeGrid::with_step(double horizon, double dt) {
  if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be > 0");
  if (!(horizon > 0)) throw std::invalid_argument("horizon must be > 0");
  const double ratio = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps == 0 || std::abs(static_cast<double>(steps) * dt - horizon) > 1e-12 * horizon)
    throw std::invalid_argument("time step does not divide the horizon");
  // dt * steps must reproduce the horizon; re-derive dt from the count.
  return TimeGrid{horizon / static_cast<double>(steps), steps};
}

double wrap(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("wrap: non-finite position");
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;
  return r;
}

std::uint64_t substream_seed(const SeedSpec& seed, Stream label, std::uint64_t a,
                             std::uint64_t b) {
  std::uint64_t h = mix64(seed.master ^ 0x6A09E667F3BCC908ULL);
  h = mix64(h ^ (static_cast<std::uint64_t>(label) * 0x9E3779B97F4A7C15ULL));
  h = mix64(h ^ (a + 0xBB67AE8584CAA73BULL));
  h = mix64(h ^ (b + 0x3C6EF372FE94F82BULL));
  return h;
}

double NormalSource::operator()() {
  boost::random::normal_distribution<double> standard;
  return standard(engine_);
}

VonMisesMixture::VonMisesMixture(std::vector<VonMisesComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs a component");
  for (const auto& c : components_) {
    if (!(c.kappa >= 0) || !std::isfinite(c.mean))
      throw std::invalid_argument("invalid von Mises component");
    normalisers_.push_back(std::cyl_bessel_i(0.0, c.kappa));
  }
}

VonMisesMixture VonMisesMixture::opinion_clusters() {
  return VonMisesMixture({{0.65, 4.0}, {0.25, 8.0}});
}

double VonMisesMixture::density(double x) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double sum = 0.0;
  for (std::size_t j = 0; j < components_.size(); ++j) {
    const auto& c = components_[j];
    sum += std::exp(c.kappa * std::cos(two_pi * (x - c.mean))) / normalisers_[j];
  }
  return sum / static_cast<double>(components_.size());
}

double VonMisesMixture::mass(double a, double b) const {
  if (b <= a) return 0.0;
  const auto panels = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) * 64)));
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    total += boost::math::quadrature::gauss<double, 20>::integrate(
        [this](double x) { return density(x); }, lo, lo + h);
  }
  return total;
}

double sample_von_mises(const VonMisesComponent& c, SplitMix64& engine) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (;;) {
    const double x = engine.uniform();
    const double accept = std::exp(c.kappa * (std::cos(two_pi * (x - c.mean)) - 1.0));
    if (engine.uniform() < accept) return x;
  }
}

std::vector<double> VonMisesMixture::sample(const SeedSpec& seed, std::size_t count,
                                            std::uint64_t path) const {
  SplitMix64 engine(substream_seed(seed, Stream::kInitialConditions, path));
  std::vector<double> out(count);
  const double n_comp = static_cast<double>(components_.size());
  for (auto& x : out) {
    auto j = static_cast<std::size_t>(engine.uniform() * n_comp);
    j = std::min(j, components_.size() - 1);
    x = sample_von_mises(components_[j], engine);
  }
  return out;
}

std::vector<double> sample_von_mises_mixture(const SeedSpec& seed, std::size_t count) {
  if (count == 0) throw std::invalid_argument("sample count must be >= 1");
  return VonMisesMixture::opinion_clusters().sample(seed, count);
}

void set_worker_count(int threads) {
  if (threads > 0) {
    omp_set_num_threads(threads);
  } else {
    omp_set_num_threads(omp_get_num_procs());
  }
}

}  // namespace mfc

#include "mfc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mfc/core.hpp"
#include "mfc/meanfield.hpp"

namespace mfc {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("empirical measure needs >= 1 atom");
}

std::vector<double> EmpiricalMeasure::sorted() const {
  std::vector<double> s = atoms_;
  std::sort(s.begin(), s.end());
  return s;
}

std::vector<double> quantile_resample(const EmpiricalMeasure& mu, std::size_t m) {
  if (m == 0) throw std::invalid_argument("resample size must be >= 1");
  const auto s = mu.sorted();
  const double n = static_cast<double>(s.size());
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    auto idx = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
    idx = std::clamp<std::size_t>(idx, 1, s.size()) - 1;
    out[i] = s[idx];
  }
  return out;
}

namespace {

// Equal-size sorted atom lists for two measures.
std::pair<std::vector<double>, std::vector<double>> matched(const EmpiricalMeasure& mu,
                                                            const EmpiricalMeasure& nu) {
  if (mu.size() == nu.size()) return {mu.sorted(), nu.sorted()};
  const std::size_t l = std::lcm(mu.size(), nu.size());
  const std::size_t m = std::min(l, kMaxResampleAtoms);
  return {quantile_resample(mu, m), quantile_resample(nu, m)};
}

}  // namespace

double w2_line(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const auto [x, y] = matched(mu, nu);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(sum / static_cast<double>(x.size()));
}

double w2_circle_sorted_sq(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n; ++s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + s;
      if (j >= n) j -= n;
      const double d = geodesic_disp(x[i], y[j]);
      sum += d * d;
    }
    best = std::min(best, sum);
  }
  return best / static_cast<double>(n);
}

double w2_circle(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  auto [x, y] = matched(mu, nu);
  for (auto* v : {&x, &y}) {
    for (double& a : *v) a = wrap(a);
    std::sort(v->begin(), v->end());
  }
  return std::sqrt(w2_circle_sorted_sq(x, y));
}

std::vector<double> density_quantiles(const GridDensity& g, std::size_t m) {
  if (m == 0) throw std::invalid_argument("quantile count must be >= 1");
  const auto values = g.values();
  const double dx = g.dx();
  std::vector<double> out(m);
  std::size_t cell = 0;
  double below = 0.0;  // mass of cells [0, cell)
  for (std::size_t i = 0; i < m; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    while (cell + 1 < values.size() && below + values[cell] * dx < q) {
      below += values[cell] * dx;
      ++cell;
    }
    double x;
    if (values[cell] > 0.0) {
      x = (static_cast<double>(cell) + std::clamp((q - below) / (values[cell] * dx), 0.0, 1.0)) * dx;
    } else {
      x = (static_cast<double>(cell) + 0.5) * dx;
    }
    out[i] = std::min(x, std::nextafter(1.0, 0.0));
  }
  return out;
}

double w2_circle_density(const EmpiricalMeasure& mu, const GridDensity& g, std::size_t m) {
  if (std::abs(g.mass() - 1.0) > 1e-8) throw std::invalid_argument("grid density is not normalised");
  if (m < mu.size()) throw std::invalid_argument("quantile count must cover the atom count");
  const auto y = density_quantiles(g, m);
  auto x = quantile_resample(mu, m);
  for (double& a : x) a = wrap(a);
  std::sort(x.begin(), x.end());
  return std::sqrt(w2_circle_sorted_sq(x, y));
}

}  // namespace mfc

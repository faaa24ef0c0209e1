#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mfc/meanfield.hpp"
#include "mfc/transport.hpp"

using namespace mfc;

namespace {

// Exhaustive minimum over bijections of the mean cost.
template <class Cost>
double brute_force_w2(std::vector<double> x, const std::vector<double>& y, Cost cost) {
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += cost(x[i], y[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(x.size()));
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("line distance") {
    CHECK(w2_line(EmpiricalMeasure({0.2, 0.4}), EmpiricalMeasure({0.2, 0.4})) == 0.0);
    CHECK(w2_line(EmpiricalMeasure({0.0}), EmpiricalMeasure({0.5})) == doctest::Approx(0.5));
    const std::vector<double> x{0.1, 0.5, 0.9}, y{0.2, 0.4, 0.8};
    const double oracle =
        brute_force_w2(x, y, [](double a, double b) { return (a - b) * (a - b); });
    CHECK(w2_line(EmpiricalMeasure(x), EmpiricalMeasure(y)) == doctest::Approx(oracle).epsilon(1e-14));
    // Unequal sizes: a 1-atom and a 2-atom measure through the common refinement.
    CHECK(w2_line(EmpiricalMeasure({0.0}), EmpiricalMeasure({0.0, 1.0})) ==
          doctest::Approx(std::sqrt(0.5)));
  }

  TEST_CASE("circle distance") {
    CHECK(w2_circle(EmpiricalMeasure({0.0}), EmpiricalMeasure({0.9})) == doctest::Approx(0.1));
    const EmpiricalMeasure mu({0.1, 0.7, 0.95});
    CHECK(w2_circle(mu, mu) == 0.0);

    SplitMix64 rng(2024);
    auto geo = [](double a, double b) {
      const double d = geodesic_disp(a, b);
      return d * d;
    };
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(5), y(5);
      for (auto& v : x) v = rng.uniform();
      for (auto& v : y) v = rng.uniform();
      const double oracle = brute_force_w2(x, y, geo);
      CHECK(std::abs(w2_circle(EmpiricalMeasure(x), EmpiricalMeasure(y)) - oracle) < 1e-13);
    }
  }

  TEST_CASE("distance to a grid density") {
    const auto mix = VonMisesMixture::opinion_clusters();
    const auto g = GridDensity::from_mixture(mix, 128);
    // Atoms at the density's own quantiles.
    const auto q = density_quantiles(g, 256);
    CHECK(w2_circle_density(EmpiricalMeasure(q), g, 256) < 1e-12);

    // Equispaced atoms against the uniform density.
    for (std::size_t n : {16, 64, 256}) {
      std::vector<double> atoms(n);
      for (std::size_t i = 0; i < n; ++i) atoms[i] = static_cast<double>(i) / n;
      const double d = w2_circle_density(EmpiricalMeasure(atoms), GridDensity::uniform(n), n);
      CHECK(d < 1.0 / n);
      CHECK(d == doctest::Approx(0.5 / n).epsilon(1e-9));
    }

    // Narrow bump at 0.5 against a single atom at 0.
    const std::size_t n = 64;
    std::vector<double> v(n, 0.0);
    v[n / 2 - 1] = v[n / 2] = 0.5 * n;
    const GridDensity bump(v);
    const double d = w2_circle_density(EmpiricalMeasure({0.0}), bump, 64);
    CHECK(std::abs(d - 0.5) < 2.0 / n);

    CHECK_THROWS_AS(w2_circle_density(EmpiricalMeasure({0.1, 0.2}), g, 1), std::invalid_argument);
  }

  TEST_CASE("quantile resample") {
    const EmpiricalMeasure mu({0.3, 0.1, 0.2});
    CHECK(quantile_resample(mu, 3) == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(quantile_resample(mu, 6) == std::vector<double>{0.1, 0.1, 0.2, 0.2, 0.3, 0.3});
    CHECK_THROWS_AS(EmpiricalMeasure({}), std::invalid_argument);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "mfc/core.hpp"

using namespace mfc;

TEST_SUITE("core") {
  TEST_CASE("geodesic displacement") {
    CHECK(geodesic_disp(0.2, 0.2) == 0.0);
    CHECK(geodesic_disp(0.9, 0.1) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(geodesic_disp(0.1, 0.9) == doctest::Approx(-0.2).epsilon(1e-14));
    // Antipodal points map to the closed end of [-0.5, 0.5).
    CHECK(geodesic_disp(0.0, 0.5) == -0.5);
    CHECK(geodesic_disp(0.25, 0.75) == -0.5);
    for (double x = 0.0; x < 1.0; x += 0.0371) {
      for (double y = 0.0; y < 1.0; y += 0.0437) {
        const double r = geodesic_disp(x, y);
        CHECK(r >= -0.5);
        CHECK(r < 0.5);
        CHECK(wrap(x + r) == doctest::Approx(y).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("wrap") {
    CHECK(wrap(1.25) == 0.25);
    CHECK(wrap(-0.1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(wrap(0.0) == 0.0);
    CHECK(wrap(1.0) == 0.0);
    CHECK(wrap(-1e-300) < 1.0);
    CHECK(wrap(-1e-300) >= 0.0);
    CHECK_THROWS_AS(wrap(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(wrap(INFINITY), std::invalid_argument);
  }

  TEST_CASE("time grid") {
    const auto g = TimeGrid::with_step(1.0, 1e-3);
    CHECK(g.steps == 1000);
    CHECK(g.horizon() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(TimeGrid::with_step(1.0, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid::with_step(1.0, 0.0), std::invalid_argument);
  }

  TEST_CASE("model parameter validation") {
    ModelParams p;
    CHECK(p.violations().empty());
    p.lambda = 0.0;
    CHECK(p.violations().size() == 1);
    p = ModelParams{};
    p.radius = 0.6;
    CHECK_FALSE(p.violations().empty());
    p = ModelParams{};
    p.sigma = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }

  TEST_CASE("substreams are distinct and reproducible") {
    const SeedSpec s{7};
    std::set<std::uint64_t> seen;
    for (auto label : {Stream::kFollowerNoise, Stream::kLeaderNoise, Stream::kInitialConditions,
                       Stream::kAuxiliary}) {
      for (std::uint64_t a = 0; a < 50; ++a) {
        for (std::uint64_t b = 0; b < 5; ++b) seen.insert(substream_seed(s, label, a, b));
      }
    }
    CHECK(seen.size() == 4 * 50 * 5);
    CHECK(substream_seed(s, Stream::kLeaderNoise, 3) == substream_seed(s, Stream::kLeaderNoise, 3));
    CHECK(substream_seed(SeedSpec{8}, Stream::kLeaderNoise, 3) !=
          substream_seed(s, Stream::kLeaderNoise, 3));
  }

  TEST_CASE("normal source moments") {
    NormalSource z(123);
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = z();
      m1 += v;
      m2 += v * v;
      m4 += v * v * v * v;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) < 4.0 / std::sqrt(n));
    CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 - 3.0) < 4.0 * std::sqrt(96.0 / n));
  }

  TEST_CASE("von Mises mixture sampler") {
    const SeedSpec seed{20240601};
    const auto a = sample_von_mises_mixture(seed, 1000);
    const auto b = sample_von_mises_mixture(seed, 1000);
    CHECK(a == b);
    CHECK_THROWS_AS(sample_von_mises_mixture(seed, 0), std::invalid_argument);

    const std::size_t n = 100000;
    auto x = sample_von_mises_mixture(SeedSpec{99}, n);
    for (double v : x) {
      REQUIRE(v >= 0.0);
      REQUIRE(v < 1.0);
    }

    // Oracle CDF: composite Simpson on the density written out here.
    const double two_pi = 2.0 * std::numbers::pi;
    auto density = [&](double t) {
      return 0.5 * std::exp(4.0 * std::cos(two_pi * (t - 0.65))) / std::cyl_bessel_i(0.0, 4.0) +
             0.5 * std::exp(8.0 * std::cos(two_pi * (t - 0.25))) / std::cyl_bessel_i(0.0, 8.0);
    };
    const std::size_t cells = 1 << 14;
    std::vector<double> cdf(cells + 1, 0.0);
    const double h = 1.0 / cells;
    for (std::size_t i = 0; i < cells; ++i) {
      const double lo = i * h;
      cdf[i + 1] = cdf[i] + h / 6.0 * (density(lo) + 4.0 * density(lo + h / 2) + density(lo + h));
    }
    CHECK(cdf.back() == doctest::Approx(1.0).epsilon(1e-10));
    auto F = [&](double t) {
      const auto i = std::min<std::size_t>(static_cast<std::size_t>(t / h), cells - 1);
      const double w = (t - i * h) / h;
      return cdf[i] + w * (cdf[i + 1] - cdf[i]);
    };
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = F(x[i]);
      ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                     std::abs(f - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 0.01);

    // Library CDF against the oracle.
    const auto mix = VonMisesMixture::opinion_clusters();
    for (double t : {0.1, 0.25, 0.4, 0.65, 0.9}) CHECK(mix.cdf(t) == doctest::Approx(F(t)).epsilon(1e-8));

    // Circular mean of the cluster around 0.25.
    double c = 0.0, s = 0.0;
    for (double v : x) {
      if (geodesic_dist(v, 0.25) < 0.15) {
        c += std::cos(two_pi * v);
        s += std::sin(two_pi * v);
      }
    }
    const double mean = wrap(std::atan2(s, c) / two_pi);
    CHECK(geodesic_dist(mean, 0.25) < 0.005);
  }

  TEST_CASE("for_each_index rethrows") {
    CHECK_THROWS_AS(for_each_index(100, Execution::kParallel,
                                   [](std::size_t i) {
                                     if (i == 37) throw NumericalError("boom");
                                   }),
                    NumericalError);
  }
}

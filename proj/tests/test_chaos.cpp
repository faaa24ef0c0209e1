#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mfc/chaos.hpp"

using namespace mfc;

namespace {

// Coarse but CFL-stable setup for quick runs.
ChaosSetup quick_setup() {
  ChaosSetup s;
  s.grid = TimeGrid::with_step(1.0, 5e-3);
  s.g0 = GridDensity::from_mixture(VonMisesMixture::opinion_clusters(), 32);
  s.seed = SeedSpec{42};
  return s;
}

std::vector<ChaosRecord> synthetic(double exponent, double noise) {
  std::vector<ChaosRecord> out;
  SplitMix64 rng(3);
  for (std::size_t n : {16, 32, 64, 128, 256}) {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      const double v = 0.3 * std::pow(static_cast<double>(n), exponent) *
                       (1.0 + noise * (rng.uniform() - 0.5));
      out.push_back({n, rep, v, 0.0});
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("chaos") {
  TEST_CASE("frozen dynamics give the initial quantisation error") {
    ChaosSetup s;
    s.params.k = s.params.k_leader = 0.0;
    s.params.sigma = 0.0;
    s.grid = TimeGrid::with_step(1.0, 0.1);
    s.g0 = GridDensity::uniform(64);
    const std::size_t n = 16;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / n;
    const auto r = coupled_run(s, x, 0, chaos_reference(s, 0));
    // 256 quantile atoms, 16 per follower centred on it: mean of ((j + 1/2) / 256)^2
    // over j = -8..7.
    double oracle = 0.0;
    for (int j = -8; j < 8; ++j) oracle += std::pow((j + 0.5) / 256.0, 2);
    oracle /= 16.0;
    CHECK(r.sup_w2_sq == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(r.sup_dy_sq == 0.0);
  }

  TEST_CASE("leader coupling statistic vanishes at k_L = 0") {
    auto s = quick_setup();
    s.params.k_leader = 0.0;
    for (std::uint64_t rep = 0; rep < 3; ++rep) CHECK(coupled_run(s, 32, rep).sup_dy_sq == 0.0);
  }

  TEST_CASE("distance shrinks with N") {
    const auto s = quick_setup();
    const std::vector<std::size_t> ns{16, 256};
    const auto study = convergence_study(s, ns, 8);
    REQUIRE(study.rows.size() == 2);
    REQUIRE(study.records.size() == 16);
    std::vector<double> small, large;
    for (const auto& r : study.records) {
      CHECK(r.sup_w2_sq > 0.0);
      (r.n_followers == 16 ? small : large).push_back(r.sup_w2_sq);
    }
    std::nth_element(small.begin(), small.begin() + 4, small.end());
    std::nth_element(large.begin(), large.begin() + 4, large.end());
    CHECK(large[4] < small[4]);
    for (const auto& row : study.rows) {
      CHECK(row.replications == 8);
      CHECK(row.mean_w2_sq > 0.0);
      CHECK(row.se_w2_sq >= 0.0);
    }
    CHECK(study.records.front().n_followers == 16);
    CHECK(study.records.back().n_followers == 256);

    // Same result serially.
    const auto serial = convergence_study(s, ns, 8, Execution::kSerial);
    for (std::size_t i = 0; i < serial.records.size(); ++i)
      CHECK(serial.records[i].sup_w2_sq == study.records[i].sup_w2_sq);

    std::ostringstream out;
    write_study_csv(out, study.records);
    CHECK(out.str().rfind("N,rep,sup_w2_sq,sup_dy_sq\n", 0) == 0);
  }

  TEST_CASE("slope fits") {
    std::vector<ChaosRow> exact, half;
    for (std::size_t n : {16, 32, 64, 128, 256}) {
      exact.push_back({n, 20, 2.0 / static_cast<double>(n), 0.0, 0.0, 0.0});
      half.push_back({n, 20, 2.0 / std::sqrt(static_cast<double>(n)), 0.0, 0.0, 0.0});
    }
    CHECK(std::abs(fit_slope(exact).slope + 1.0) < 1e-12);
    CHECK(std::abs(fit_slope(exact).intercept - std::log(2.0)) < 1e-12);
    CHECK(std::abs(fit_slope(half).slope + 0.5) < 1e-12);

    const auto noisy = synthetic(-1.0, 0.4);
    const auto fit = fit_slope(noisy, 1000, SeedSpec{1});
    CHECK(fit.ci_low < fit.slope);
    CHECK(fit.slope < fit.ci_high);
    CHECK(fit.ci_low < -1.0);
    CHECK(fit.ci_high > -1.0);
    CHECK(fit.ci_high - fit.ci_low < 0.2);
    CHECK(fit.resamples == 1000);
    const auto again = fit_slope(noisy, 1000, SeedSpec{1});
    CHECK(again.ci_low == fit.ci_low);

    const auto j = to_json(fit, summarise(noisy));
    CHECK(j.dump().find("slope") != std::string::npos);
  }

  TEST_CASE("invalid studies") {
    const auto s = quick_setup();
    const std::vector<std::size_t> empty, unsorted{32, 16}, ok{16, 32};
    CHECK_THROWS_AS(convergence_study(s, empty, 5), std::invalid_argument);
    CHECK_THROWS_AS(convergence_study(s, unsorted, 5), std::invalid_argument);
    CHECK_THROWS_AS(convergence_study(s, ok, 4), std::invalid_argument);
    std::vector<ChaosRow> two(2);
    CHECK_THROWS_AS(fit_slope(two), std::invalid_argument);
    CHECK_THROWS_AS(fit_slope(synthetic(-1.0, 0.1), 10, SeedSpec{1}, 1.5), std::invalid_argument);
  }
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfc/estimators.hpp"

using namespace mfc;

namespace {

// Leader only, r = 0: J(a) = (lambda/2) sum_k a_k^2 |I_k|.
HkControlProblem pure_control(double sigma, double dt) {
  ModelParams p;
  p.n_followers = 0;
  p.sigma = sigma;
  SystemState s;
  s.leader = 0.8;
  return HkControlProblem(p, TimeGrid::with_step(1.0, dt), s, true);
}

// One far-away follower with no interactions: r = d(Y, X)^2 is a smooth,
// genuinely path-dependent running cost.
HkControlProblem two_body(double sigma) {
  ModelParams p;
  p.n_followers = 1;
  p.k = 0.0;
  p.k_leader = 0.0;
  p.sigma = sigma;
  p.lambda = 0.5;
  SystemState s;
  s.followers = {0.5};
  s.leader = 0.45;
  return HkControlProblem(p, TimeGrid::with_step(1.0, 0.02), s);
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("path functionals of a stored trajectory") {
    ModelParams p;
    p.n_followers = 0;
    SystemState s;
    s.leader = 0.3;
    const auto grid = TimeGrid::with_step(1.0, 0.01);
    const auto one = PiecewiseConstantControl::uniform(1.0, 1);
    const auto traj = simulate(p, grid, one, s, SeedSpec{4});
    const auto f = path_functionals(traj, one);
    CHECK(f.phi == 0.0);
    double b = 0.0;
    for (double db : traj.leader_increments) b += db;
    CHECK(f.martingales[0] == doctest::Approx(20.0 * b).epsilon(1e-12));

    // The streaming sampler sees the same noise as the stored trajectory.
    ModelParams q;
    q.n_followers = 5;
    SystemState s5;
    s5.followers = {0.1, 0.2, 0.25, 0.6, 0.9};
    s5.leader = 0.3;
    const auto five = PiecewiseConstantControl::uniform(1.0, 5, 0.2);
    const auto t5 = simulate(q, grid, five, s5, SeedSpec{4}, 7);
    const HkControlProblem prob(q, grid, s5);
    const auto streamed = prob.sample_path(five, SeedSpec{4}, 7);
    const auto stored = path_functionals(t5, five);
    CHECK(streamed.phi == stored.phi);
    CHECK(streamed.martingales == stored.martingales);
    CHECK(streamed.control_martingale == doctest::Approx(0.2 * (stored.martingales[0] +
                                                               stored.martingales[1] +
                                                               stored.martingales[2] +
                                                               stored.martingales[3] +
                                                               stored.martingales[4])));
  }

  TEST_CASE("martingale mean and Ito isometry") {
    const auto prob = pure_control(0.05, 1e-3);
    const auto basis = PiecewiseConstantControl::uniform(1.0, 5);
    const auto batch = sample_batch(prob, basis, 10000, SeedSpec{11});
    for (Eigen::Index k = 0; k < 5; ++k) {
      std::vector<double> m(batch.size()), m2(batch.size());
      for (std::size_t p = 0; p < batch.size(); ++p) {
        m[p] = batch.martingales(static_cast<Eigen::Index>(p), k);
        m2[p] = m[p] * m[p];
      }
      const auto e1 = mean_with_error(m);
      const auto e2 = mean_with_error(m2);
      CHECK(std::abs(e1.mean) < 3 * e1.std_error);
      const double iso = 0.2 / (0.05 * 0.05);
      CHECK(std::abs(e2.mean - iso) < 0.05 * iso);
    }
  }

  TEST_CASE("closed-form cost, gradient and Hessian of the pure control problem") {
    const auto prob = pure_control(0.05, 1e-3);
    const std::vector<double> a{1.0, -0.5, 0.25, 2.0, 0.0};
    const auto ctl = PiecewiseConstantControl::uniform(1.0, 5).with_coefficients(a);
    double closed = 0.0;
    for (double v : a) closed += 0.5 * 0.01 * v * v * 0.2;
    const auto cost = cost_direct(prob, ctl, 100, SeedSpec{1});
    CHECK(cost.mean == doctest::Approx(closed).epsilon(1e-12));
    CHECK(cost.std_error < 1e-15);

    const auto zero = cost_direct(prob, PiecewiseConstantControl::uniform(1.0, 5), 100, SeedSpec{1});
    CHECK(zero.mean == 0.0);

    // sigma = 1 keeps the Girsanov control term well resolved.
    const auto unit = pure_control(1.0, 0.01);
    for (int variant = 0; variant < 2; ++variant) {
      const auto basis = PiecewiseConstantControl::uniform(1.0, 5);
      const auto c = variant == 0 ? basis : basis.with_coefficients({0.5, -0.5, 1.0, 0.25, -1.0});
      const auto batch = sample_batch(unit, c, 200000, SeedSpec{3});
      const auto g = gradient(batch);
      const auto h = hessian(batch);
      for (Eigen::Index k = 0; k < 5; ++k) {
        const double expected = 0.01 * c.coefficients()[static_cast<std::size_t>(k)] * 0.2;
        CHECK(std::abs(g.value(k) - expected) <= 3 * g.std_error(k));
        // At a = 0 both terms vanish path by path.
        if (variant == 0) CHECK(g.value(k) == 0.0);
        for (Eigen::Index l = 0; l < 5; ++l) {
          const double expected_h = k == l ? 0.01 * 0.2 : 0.0;
          CHECK(std::abs(h.value(k, l) - expected_h) <= 3 * h.std_error(k, l) + 1e-15);
          CHECK(h.value(k, l) == h.value(l, k));
        }
      }
      // The analytic control term is exact here.
      EstimatorOptions analytic;
      analytic.control_term = ControlTerm::kAnalytic;
      const auto ga = gradient(batch, analytic);
      for (Eigen::Index k = 0; k < 5; ++k) {
        CHECK(ga.value(k) ==
              doctest::Approx(0.01 * c.coefficients()[static_cast<std::size_t>(k)] * 0.2)
                  .epsilon(1e-12));
      }
    }
  }

  TEST_CASE("serial and parallel batches are identical") {
    const auto prob = two_body(0.3);
    const auto c = PiecewiseConstantControl::uniform(1.0, 2).with_coefficients({0.4, -0.2});
    const auto s = sample_batch(prob, c, 64, SeedSpec{9}, Execution::kSerial);
    const auto p = sample_batch(prob, c, 64, SeedSpec{9}, Execution::kParallel);
    CHECK(s.phi == p.phi);
    CHECK(s.martingales == p.martingales);
    CHECK_THROWS_AS(sample_batch(prob, c, 1, SeedSpec{9}), std::invalid_argument);
  }

  TEST_CASE("Hessian matches finite differences of the cost on a two-interval toy") {
    const auto prob = two_body(0.3);
    const std::vector<double> a{0.3, -0.2};
    const auto basis = PiecewiseConstantControl::uniform(1.0, 2);
    const std::size_t n = 100000;
    const SeedSpec seed{21};
    const auto batch = sample_batch(prob, basis.with_coefficients(a), n, seed);
    const auto h = hessian(batch);

    // Second differences of per-path costs on common random numbers.
    const double step = 0.1;
    auto costs = [&](double d0, double d1) {
      return sample_batch(prob, basis.with_coefficients({a[0] + d0, a[1] + d1}), n, seed)
          .path_costs();
    };
    const auto c00 = costs(0, 0);
    for (int k = 0; k < 2; ++k) {
      for (int l = k; l < 2; ++l) {
        std::vector<double> fd(n);
        if (k == l) {
          const auto up = costs(k == 0 ? step : 0, k == 1 ? step : 0);
          const auto dn = costs(k == 0 ? -step : 0, k == 1 ? -step : 0);
          for (std::size_t p = 0; p < n; ++p) fd[p] = (up[p] - 2 * c00[p] + dn[p]) / (step * step);
        } else {
          const auto pp = costs(step, step), pm = costs(step, -step);
          const auto mp = costs(-step, step), mm = costs(-step, -step);
          for (std::size_t p = 0; p < n; ++p)
            fd[p] = (pp[p] - pm[p] - mp[p] + mm[p]) / (4 * step * step);
        }
        const auto e = mean_with_error(fd);
        const double combined = std::sqrt(e.std_error * e.std_error + h.std_error(k, l) * h.std_error(k, l));
        CAPTURE(k);
        CAPTURE(l);
        CAPTURE(e.mean);
        CAPTURE(h.value(k, l));
        CHECK(std::abs(h.value(k, l) - e.mean) <= 3 * combined);
      }
    }
  }

  TEST_CASE("reweighted cost") {
    const auto prob = two_body(0.3);
    const auto basis = PiecewiseConstantControl::uniform(1.0, 2);
    const auto base = sample_batch(prob, basis, 20000, SeedSpec{5});
    const std::vector<double> zero{0.0, 0.0};
    const auto r0 = cost_reweighted(base, zero);
    const auto d0 = cost_estimate(base);
    CHECK(r0.estimate.mean == d0.mean);
    CHECK(r0.estimate.std_error == d0.std_error);
    CHECK(r0.effective_sample_size == doctest::Approx(20000.0));
    CHECK_FALSE(r0.degenerate);

    // r = 0, small a: (lambda/2) sum a_k^2 |I_k|.
    const auto pure = pure_control(1.0, 0.01);
    const auto pbase = sample_batch(pure, basis, 20000, SeedSpec{6});
    const std::vector<double> a{0.3, -0.2};
    const auto r = cost_reweighted(pbase, a);
    const double closed = 0.5 * 0.01 * (0.09 + 0.04) * 0.5;
    CHECK(std::abs(r.estimate.mean - closed) <= 3 * r.estimate.std_error);

    // Base paths must carry zero control.
    const auto shifted = sample_batch(pure, basis.with_coefficients(a), 10, SeedSpec{6});
    CHECK_THROWS_AS(cost_reweighted(shifted, a), std::invalid_argument);

    // Toy with r: reweighted against direct.
    const auto direct = cost_direct(prob, basis.with_coefficients(a), 20000, SeedSpec{7});
    const auto rw = cost_reweighted(base, a);
    const double se = std::hypot(direct.std_error, rw.estimate.std_error);
    CHECK(std::abs(direct.mean - rw.estimate.mean) <= 3 * se);
  }

  TEST_CASE("derivatives json") {
    const auto prob = pure_control(1.0, 0.1);
    const auto batch = sample_batch(prob, PiecewiseConstantControl::uniform(1.0, 2), 10, SeedSpec{2});
    const auto j = derivatives_json(batch, gradient(batch), hessian(batch));
    CHECK(j["a"].size() == 2);
    CHECK(j["hess"].size() == 2);
    CHECK(j["n_paths"] == 10);
  }

  TEST_CASE("invalid problems") {
    ModelParams p;
    p.n_followers = 0;
    p.sigma = 0.0;
    SystemState s;
    s.leader = 0.1;
    CHECK_THROWS_AS(HkControlProblem(p, TimeGrid::with_step(1.0, 0.1), s), std::invalid_argument);
  }
}

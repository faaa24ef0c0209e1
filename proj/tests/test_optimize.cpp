#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "mfc/optimize.hpp"

using namespace mfc;

namespace {

Eigen::MatrixXd spd3() {
  Eigen::MatrixXd q(3, 3);
  q << 4.0, 1.0, 0.5,  //
      1.0, 3.0, -0.2,  //
      0.5, -0.2, 2.0;
  return q;
}

// Returns NaN derivatives everywhere.
class BrokenOracle : public DerivativeOracle {
 public:
  std::size_t dimension() const override { return 2; }
  DerivativeSample evaluate(const Eigen::VectorXd& a) override {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {a, 0.0, 0.0, Eigen::VectorXd::Constant(2, nan), Eigen::VectorXd::Zero(2),
            Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2)};
  }
  CostComparison compare(const Eigen::VectorXd&, const Eigen::VectorXd&) override { return {}; }
};

HkControlProblem pure_control(double dt) {
  ModelParams p;
  p.n_followers = 0;
  p.sigma = 1.0;
  SystemState s;
  s.leader = 0.8;
  return HkControlProblem(p, TimeGrid::with_step(1.0, dt), s, true);
}

}  // namespace

TEST_SUITE("optimize") {
  TEST_CASE("exact quadratic: one Newton step reaches the minimiser") {
    const Eigen::VectorXd b(Eigen::Vector3d(1.0, -2.0, 0.5));
    QuadraticOracle oracle(spd3(), b, 3.0);
    const Eigen::VectorXd minimiser = -spd3().ldlt().solve(b);
    const auto report = newton_solve(oracle, Eigen::VectorXd::Zero(3));
    REQUIRE(report.iterates.size() >= 2);
    CHECK((report.iterates[1].a - minimiser).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(report.iterates[1].damping == 0.0);
    CHECK(report.iterates[1].step_scale == 1.0);
    CHECK(report.converged());
    // One further iterate confirms the cost no longer changes.
    CHECK(report.iterates.size() == 3);
    CHECK(std::string(to_string(report.status)) == "converged");
  }

  TEST_CASE("indefinite Hessian takes a Levenberg-shifted descent step") {
    Eigen::MatrixXd q(2, 2);
    q << 1.0, 0.0, 0.0, -1.0;
    QuadraticOracle oracle(q, Eigen::Vector2d(1.0, 1.0));
    NewtonOptions opts;
    opts.max_iter = 2;
    const auto report = newton_solve(oracle, Eigen::VectorXd::Zero(2), opts);
    REQUIRE(report.iterates.size() >= 2);
    CHECK(report.iterates[1].damping > 1.0);
    CHECK(report.iterates[1].value < report.iterates[0].value);
  }

  TEST_CASE("non-finite oracle values raise a numerical error") {
    BrokenOracle oracle;
    CHECK_THROWS_AS(newton_solve(oracle, Eigen::VectorXd::Zero(2)), NumericalError);
    QuadraticOracle ok(spd3(), Eigen::VectorXd::Zero(3));
    CHECK_THROWS_AS(newton_solve(ok, Eigen::VectorXd::Zero(2)), std::invalid_argument);
  }

  TEST_CASE("pure control: Newton drives a below the noise floor in three iterations") {
    const auto prob = pure_control(0.01);
    const auto basis = PiecewiseConstantControl::uniform(1.0, 5);
    MonteCarloOracle oracle(prob, basis, 10000, SeedSpec{17});
    NewtonOptions opts;
    opts.max_iter = 3;
    const auto report = newton_solve(oracle, Eigen::VectorXd::Ones(5), opts);
    bool reached = false;
    for (std::size_t j = 1; j < report.iterates.size(); ++j) {
      const auto& it = report.iterates[j];
      CAPTURE(j);
      CAPTURE(it.a.transpose());
      if ((it.a.cwiseAbs().array() < 3.0 * it.step_se.array()).all() ||
          it.a.cwiseAbs().maxCoeff() < 1e-12) {
        reached = true;
        break;
      }
    }
    CHECK(reached);
    CHECK(report.iterates.size() <= 4);
  }

  TEST_CASE("Markov control of a quadratic objective commits the offline minimiser") {
    const Eigen::VectorXd b(Eigen::Vector3d(0.3, -1.0, 2.0));
    QuadraticOracle offline(spd3(), b);
    const auto report = newton_solve(offline, Eigen::VectorXd::Zero(3));
    QuadraticMarkovModel model(QuadraticOracle(spd3(), b));
    const auto result = markov_solve(model, Eigen::VectorXd::Zero(3));
    REQUIRE(result.committed.size() == 3);
    CHECK(result.stages.size() == 2);
    for (Eigen::Index k = 0; k < 3; ++k)
      CHECK(std::abs(result.committed[static_cast<std::size_t>(k)] - report.final_a()(k)) < 1e-12);

    Eigen::MatrixXd q2(2, 2);
    q2 << 2.0, 0.5, 0.5, 1.0;
    QuadraticMarkovModel two(QuadraticOracle(q2, Eigen::Vector2d(1.0, 1.0)));
    const auto r2 = markov_solve(two, Eigen::VectorXd::Zero(2));
    CHECK(r2.committed.size() == 2);
    CHECK(r2.stages.size() == 1);
  }

  TEST_CASE("finite-N Markov model") {
    ModelParams p;
    p.n_followers = 7;
    SystemState init;
    init.followers = {0.1, 0.2, 0.3, 0.5, 0.6, 0.7, 0.9};
    init.leader = 0.8;
    const auto grid = TimeGrid::with_step(1.0, 0.01);
    const auto basis = PiecewiseConstantControl::uniform(1.0, 2);
    const MarkovMonteCarlo mc{200, SeedSpec{5}, {}, Execution::kParallel};

    // Zero control reproduces simulate() on the same realised noise.
    HkMarkovModel zero(p, grid, basis, init, mc, SeedSpec{8}, 3);
    zero.advance(0, 0.0);
    zero.advance(1, 0.0);
    const auto sim = simulate(p, grid, basis, init, SeedSpec{8}, 3);
    REQUIRE(zero.realised().states.size() == sim.states.size());
    for (std::size_t j = 0; j < sim.states.size(); ++j) {
      CHECK(zero.realised().states[j].leader == sim.states[j].leader);
      CHECK(zero.realised().states[j].followers == sim.states[j].followers);
    }
    CHECK(zero.realised_cost() == doctest::Approx(realised_cost(sim, basis)).epsilon(1e-12));
    CHECK_THROWS_AS(zero.advance(0, 0.0), std::logic_error);

    HkMarkovModel model(p, grid, basis, init, mc, SeedSpec{8}, 3);
    NewtonOptions opts;
    opts.max_iter = 3;
    const auto result = markov_solve(model, Eigen::VectorXd::Zero(2), opts);
    CHECK(result.committed.size() == 2);
    CHECK(result.stages.size() == 1);
    CHECK(model.realised().states.size() == grid.steps + 1);
  }

  TEST_CASE("stage grids") {
    const auto grid = TimeGrid::with_step(1.0, 0.01);
    const auto basis = PiecewiseConstantControl::uniform(1.0, 5);
    CHECK(stage_grid(basis, grid, 0).steps == 100);
    CHECK(stage_grid(basis, grid, 3).steps == 40);
    CHECK_THROWS_AS(stage_grid(basis, TimeGrid::with_step(1.0, 1.0 / 7.0), 1), std::invalid_argument);
  }

  TEST_CASE("finite-difference check on the pure control problem") {
    const auto prob = pure_control(0.1);
    const auto c = PiecewiseConstantControl::uniform(1.0, 1).with_coefficients({1.0});
    EstimatorOptions analytic;
    analytic.control_term = ControlTerm::kAnalytic;
    const auto exact = fd_gradient_check(prob, c, 1e-2, 1000, SeedSpec{2}, analytic);
    CHECK(exact.resolved[0]);
    CHECK(exact.max_relative_error < 1e-9);
    CHECK(exact.finite_difference(0) == doctest::Approx(0.01).epsilon(1e-9));

    const auto mc = fd_gradient_check(prob, c, 1e-2, 400000, SeedSpec{2});
    CAPTURE(mc.estimate(0));
    CAPTURE(mc.estimate_se(0));
    CHECK(std::abs(mc.estimate(0) - 0.01) <= 3 * mc.estimate_se(0));
    CHECK(mc.resolved[0]);
    const auto j = to_json(mc);
    CHECK(j.contains("max_relative_error"));
  }

  TEST_CASE("iteration csv") {
    QuadraticOracle oracle(spd3(), Eigen::Vector3d(1.0, 0.0, 0.0));
    const auto report = newton_solve(oracle, Eigen::VectorXd::Zero(3));
    std::ostringstream out;
    write_iteration_csv(out, report);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,a_1,a_2,a_3,J,J_se,grad_norm,damping");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == report.iterates.size());
  }
}

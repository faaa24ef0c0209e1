#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfc/control.hpp"
#include "mfc/core.hpp"

namespace mfc {

/// Per-path ingredients of the likelihood-ratio derivative formulas.
struct PathFunctionals {
  double phi = 0.0;                  // left-Riemann integral of the running cost
  std::vector<double> interval_phi;  // the part of phi accrued over each I_k
  std::vector<double> martingales;   // M^{e_k} = sigma^{-1} sum_{t_j in I_k} dB^Y_j
  double control_martingale = 0.0;   // M^{u^a} = sum_k a_k M^{e_k}
};

/// A controlled system whose Monte Carlo paths the estimators consume. Both
/// the finite-N particle system and the discretised mean-field system
/// implement it; only the leader noise enters the martingale integrals.
class ControlProblem {
 public:
  virtual ~ControlProblem() = default;

  virtual const TimeGrid& grid() const = 0;
  virtual double sigma() const = 0;
  virtual double lambda() const = 0;

  /// Simulates path `path` under `control` and returns its functionals.
  /// Must be safe to call concurrently.
  virtual PathFunctionals sample_path(const PiecewiseConstantControl& control,
                                      const SeedSpec& seed, std::uint64_t path) const = 0;
};

/// Accumulates phi and the martingales along a path, step by step.
class FunctionalAccumulator {
 public:
  FunctionalAccumulator(const PiecewiseConstantControl& control, const TimeGrid& grid,
                        double sigma);

  /// Records step j: running cost at t_j and the leader increment over it.
  void add(std::size_t step, double running_cost, double leader_increment) {
    const std::size_t k = intervals_[step];
    out_.phi += running_cost * dt_;
    out_.interval_phi[k] += running_cost * dt_;
    out_.martingales[k] += leader_increment * inv_sigma_;
  }
  std::size_t interval(std::size_t step) const { return intervals_[step]; }
  PathFunctionals finish(std::span<const double> coefficients);

 private:
  std::vector<std::size_t> intervals_;
  double dt_;
  double inv_sigma_;
  PathFunctionals out_;
};

}  // namespace mfc

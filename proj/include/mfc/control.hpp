#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfc/core.hpp"

namespace mfc {

/// Leader control u(t) = sum_k a_k 1{t in [t_k, t_{k+1})}, with the last
/// interval closed at the horizon.
class PiecewiseConstantControl {
 public:
  PiecewiseConstantControl(std::vector<double> breakpoints, std::vector<double> coefficients);

  /// `intervals` equal pieces on [0, horizon], all coefficients = value.
  static PiecewiseConstantControl uniform(double horizon, std::size_t intervals,
                                          double value = 0.0);

  double operator()(double t) const { return coefficients_[interval_of(t)]; }
  std::size_t interval_of(double t) const;

  std::size_t intervals() const { return coefficients_.size(); }
  std::span<const double> breakpoints() const { return breakpoints_; }
  std::span<const double> coefficients() const { return coefficients_; }
  double horizon() const { return breakpoints_.back(); }
  double interval_length(std::size_t k) const { return breakpoints_[k + 1] - breakpoints_[k]; }

  PiecewiseConstantControl with_coefficients(std::vector<double> coefficients) const;
  /// Intervals first..end, shifted so the first starts at 0.
  PiecewiseConstantControl tail(std::size_t first, std::vector<double> coefficients) const;

  /// Interval index of every step of `grid` (left endpoint rule). Throws if
  /// the control does not cover [0, grid.horizon()].
  std::vector<std::size_t> step_intervals(const TimeGrid& grid) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> coefficients_;
};

/// Per-interval quadrature lengths n_k * dt seen by a grid (equal to
/// |I_k| when the breakpoints sit on grid nodes).
std::vector<double> discrete_interval_lengths(const PiecewiseConstantControl& control,
                                              const TimeGrid& grid);

/// First grid step at or after breakpoint k.
std::size_t breakpoint_step(const PiecewiseConstantControl& control, const TimeGrid& grid,
                            std::size_t k);

}  // namespace mfc

#include "mfc/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfc {

PiecewiseConstantControl::PiecewiseConstantControl(std::vector<double> breakpoints,
                                                   std::vector<double> coefficients)
    : breakpoints_(std::move(breakpoints)), coefficients_(std::move(coefficients)) {
  if (breakpoints_.size() < 2) throw std::invalid_argument("control needs >= 2 breakpoints");
  if (coefficients_.size() + 1 != breakpoints_.size())
    throw std::invalid_argument("control needs one coefficient per interval");
  if (breakpoints_.front() != 0.0) throw std::invalid_argument("first breakpoint must be 0");
  for (std::size_t k = 0; k + 1 < breakpoints_.size(); ++k) {
    if (!(breakpoints_[k + 1] > breakpoints_[k]) || !std::isfinite(breakpoints_[k + 1]))
      throw std::invalid_argument("breakpoints must be finite and strictly increasing");
  }
  for (double a : coefficients_) {
    if (!std::isfinite(a)) throw std::invalid_argument("control coefficients must be finite");
  }
}

PiecewiseConstantControl PiecewiseConstantControl::uniform(double horizon, std::size_t intervals,
                                                           double value) {
  if (intervals == 0) throw std::invalid_argument("control needs >= 1 interval");
  std::vector<double> bp(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k)
    bp[k] = horizon * static_cast<double>(k) / static_cast<double>(intervals);
  bp.back() = horizon;
  return {std::move(bp), std::vector<double>(intervals, value)};
}

std::size_t PiecewiseConstantControl::interval_of(double t) const {
  const auto it = std::upper_bound(breakpoints_.begin() + 1, breakpoints_.end() - 1, t);
  return static_cast<std::size_t>(it - (breakpoints_.begin() + 1));
}

PiecewiseConstantControl PiecewiseConstantControl::with_coefficients(
    std::vector<double> coefficients) const {
  return {breakpoints_, std::move(coefficients)};
}

PiecewiseConstantControl PiecewiseConstantControl::tail(std::size_t first,
                                                        std::vector<double> coefficients) const {
  if (first >= intervals()) throw std::invalid_argument("tail: no intervals left");
  std::vector<double> bp;
  const double origin = breakpoints_[first];
  for (std::size_t k = first; k < breakpoints_.size(); ++k) bp.push_back(breakpoints_[k] - origin);
  bp.front() = 0.0;
  return {std::move(bp), std::move(coefficients)};
}

std::vector<std::size_t> PiecewiseConstantControl::step_intervals(const TimeGrid& grid) const {
  if (grid.horizon() > horizon() * (1.0 + 1e-12) + 1e-15)
    throw std::invalid_argument("control does not cover the simulation horizon");
  std::vector<std::size_t> out(grid.steps);
  // Nodes within 1e-9 dt of a breakpoint belong to the interval it opens.
  const double nudge = 1e-9 * grid.dt;
  for (std::size_t j = 0; j < grid.steps; ++j) out[j] = interval_of(grid.node(j) + nudge);
  return out;
}

std::vector<double> discrete_interval_lengths(const PiecewiseConstantControl& control,
                                              const TimeGrid& grid) {
  std::vector<double> len(control.intervals(), 0.0);
  for (std::size_t k : control.step_intervals(grid)) len[k] += grid.dt;
  return len;
}

std::size_t breakpoint_step(const PiecewiseConstantControl& control, const TimeGrid& grid,
                            std::size_t k) {
  const double t = control.breakpoints()[k];
  return static_cast<std::size_t>(std::ceil(t / grid.dt - 1e-9));
}

}  // namespace mfc

#pragma once

// Wasserstein-2 distances between equal-weight empirical measures on the
// line and on the unit circle.

#include <cstddef>
#include <span>
#include <vector>

namespace mfc {

class GridDensity;

/// Equal-weight atoms.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(std::vector<double> atoms);
  std::size_t size() const { return atoms_.size(); }
  std::span<const double> atoms() const { return atoms_; }
  /// Atoms in ascending order.
  std::vector<double> sorted() const;

 private:
  std::vector<double> atoms_;
};

/// Quantile atoms q((i - 1/2) / m), i = 1..m, of the measure (sorted output).
std::vector<double> quantile_resample(const EmpiricalMeasure& mu, std::size_t m);

/// Largest atom count used when reconciling unequal sizes.
inline constexpr std::size_t kMaxResampleAtoms = 4096;

/// Exact W2 on the real line (sorted coupling).
double w2_line(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Exact W2 on the unit circle with geodesic ground cost: the best of the
/// n cyclic shifts between the sorted atom sequences.
double w2_circle(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Sorted-input kernel for w2_circle; returns the squared distance.
double w2_circle_sorted_sq(std::span<const double> x, std::span<const double> y);

/// m equal-mass atoms of a grid density (cells carry constant density), at
/// the CDF midpoints (i - 1/2) / m.
std::vector<double> density_quantiles(const GridDensity& g, std::size_t m);

/// W2 on the circle between an empirical measure and a grid density, using
/// m >= mu.size() quantile atoms of g.
double w2_circle_density(const EmpiricalMeasure& mu, const GridDensity& g, std::size_t m);

}  // namespace mfc

#ifndef MFKL_GRID_DENSITY_HPP
#define MFKL_GRID_DENSITY_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mfkl/core.hpp"

namespace mfkl {

/// Uniform cell-centred grid on [lo, hi).
struct GridSpec {
  double lo = -8.0;
  double hi = 8.0;
  std::size_t n_cells = 2001;
  bool periodic = false;

  double dx() const { return (hi - lo) / static_cast<double>(n_cells); }
  double center(std::size_t j) const { return lo + (static_cast<double>(j) + 0.5) * dx(); }

  void validate() const {
    if (n_cells < 1) throw ConfigError("grid needs at least one cell");
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ConfigError("grid bounds must satisfy lo < hi");
  }
};

/// A one-dimensional probability density sampled at cell centres. The
/// midpoint-rule integral of `values` is one.
struct GridDensity {
  GridSpec grid;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double dx() const { return grid.dx(); }
  double x(std::size_t j) const { return grid.center(j); }

  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * dx();
  }

  /// Midpoint-rule expectation of f.
  double expect(const std::function<double(double)>& f) const {
    double s = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) s += f(x(j)) * values[j];
    return s * dx();
  }

  void normalize() {
    const double z = integral();
    if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("density has zero or non-finite mass");
    for (double& v : values) v /= z;
  }

  void validate() const {
    grid.validate();
    if (values.size() != grid.n_cells) throw ConfigError("density size does not match grid");
    for (double v : values)
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantError("density value negative or non-finite");
    if (std::abs(integral() - 1.0) > 1e-12) throw InvariantError("density does not integrate to one");
  }

  /// Builds a normalized density from unnormalized log-weights -U(x_j),
  /// shifting by the minimum of U to avoid overflow.
  static GridDensity from_potential(const GridSpec& grid, const std::vector<double>& potential) {
    double umin = potential.front();
    for (double u : potential) umin = std::min(umin, u);
    GridDensity out{grid, std::vector<double>(potential.size())};
    for (std::size_t j = 0; j < potential.size(); ++j) out.values[j] = std::exp(-(potential[j] - umin));
    out.normalize();
    return out;
  }
};

}  // namespace mfkl

#endif  // MFKL_GRID_DENSITY_HPP

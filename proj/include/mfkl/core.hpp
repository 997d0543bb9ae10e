#ifndef MFKL_CORE_HPP
#define MFKL_CORE_HPP

// Basic value types shared by every module: error hierarchy, a small dense
// row-major matrix, the state-space tag and the particle state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfkl {

/// Base class for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (exit code 2 in the CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during a computation (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A diagnostic needs a model capability or coefficient that is absent.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A requested tabulation exceeds the allowed memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A quantity that should be guaranteed by construction was violated.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver stopped before reaching its tolerance (exit code 4).
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Dense row-major matrix of doubles. Rows are particles, columns coordinates.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Topology { euclidean, torus };

/// Ambient space of a single particle: R^d or the unit torus T^d.
struct SpaceKind {
  Topology topology = Topology::euclidean;
  std::size_t d = 1;

  static SpaceKind euclidean(std::size_t d) { return {Topology::euclidean, d}; }
  static SpaceKind torus(std::size_t d) { return {Topology::torus, d}; }

  bool is_torus() const noexcept { return topology == Topology::torus; }

  void validate() const {
    if (d < 1) throw ConfigError("space dimension d must be >= 1");
  }

  friend bool operator==(const SpaceKind&, const SpaceKind&) = default;
};

/// Representative of x modulo 1 in [0, 1).
inline double wrap_unit(double x) {
  double y = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.0
  if (y >= 1.0) y = 0.0;
  return y;
}

/// Minimal-image representative of a torus displacement, in (-1/2, 1/2].
inline double minimal_image(double dx) {
  double y = dx - std::floor(dx + 0.5);
  if (y <= -0.5) y += 1.0;
  return y;
}

/// Sum whose result depends only on the multiset of terms: the terms are
/// sorted before accumulation, so any reordering of the input gives the same
/// bits. The input is reordered in place.
inline double multiset_sum(std::span<double> terms) {
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc;
}

/// Positions and velocities of N particles in d dimensions.
struct ParticleState {
  Matrix positions;
  Matrix velocities;
  SpaceKind space;

  ParticleState() = default;
  ParticleState(Matrix x, Matrix v, SpaceKind s)
      : positions(std::move(x)), velocities(std::move(v)), space(s) {}

  std::size_t n_particles() const noexcept { return positions.rows(); }
  std::size_t dim() const noexcept { return positions.cols(); }

  /// Throws ConfigError if shapes, finiteness or the torus range are violated.
  void validate() const {
    space.validate();
    if (positions.rows() < 1) throw ConfigError("particle state needs N >= 1");
    if (positions.rows() != velocities.rows() || positions.cols() != velocities.cols())
      throw ConfigError("positions and velocities must have identical shape");
    if (positions.cols() != space.d)
      throw ConfigError("state dimension does not match space dimension");
    if (!positions.all_finite() || !velocities.all_finite())
      throw ConfigError("particle state contains non-finite entries");
    if (space.is_torus()) {
      for (double x : positions.flat())
        if (!(x >= 0.0 && x < 1.0)) throw ConfigError("torus position outside [0,1)");
    }
  }

  friend bool operator==(const ParticleState&, const ParticleState&) = default;
};

/// Squared Euclidean norm.
inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double xi : x) s += xi * xi;
  return s;
}

}  // namespace mfkl

#endif  // MFKL_CORE_HPP

#ifndef MFKL_MODEL_HPP
#define MFKL_MODEL_HPP

// Mean-field energy abstraction and the N-particle potential U_N(x) = N F(pi_x).

#include <functional>
#include <optional>
#include <string>

#include "mfkl/core.hpp"
#include "mfkl/grid_density.hpp"

namespace mfkl {

/// Regularity and confinement coefficients declared by a model. They are
/// never derived automatically; diagnostics that need an absent coefficient
/// raise CapabilityError.
struct ModelCoefficients {
  // Lipschitz bounds of the intrinsic derivative in x and in the measure.
  std::optional<double> m1x;
  std::optional<double> m1m;
  // Regularity constants entering the discretisation error constant.
  std::optional<double> l1;
  std::optional<double> l2;
  std::optional<double> l3;
  // sup |DF| on the torus.
  std::optional<double> df_sup;
  // Euclidean confinement: |DF_1| <= m_bnd sqrt(d) + lambda_growth (|y| + E|x|),
  // -y.grad V <= -r_conf |y|^2 + k_conf d, |hess V| <= l_hess,
  // d r0_low + c0 |y|^2 <= V(y) <= d r1_up + c1 |y|^2.
  std::optional<double> m_bnd;
  std::optional<double> lambda_growth;
  std::optional<double> r_conf;
  std::optional<double> k_conf;
  std::optional<double> l_hess;
  std::optional<double> c0;
  std::optional<double> c1;
  std::optional<double> r0_low;
  std::optional<double> r1_up;

  void validate() const {
    auto nonneg = [](const std::optional<double>& v, const char* name) {
      if (v && !(*v >= 0.0 && std::isfinite(*v)))
        throw ConfigError(std::string("coefficient ") + name + " must be a finite nonnegative number");
    };
    nonneg(m1x, "m1x");
    nonneg(m1m, "m1m");
    nonneg(l1, "l1");
    nonneg(l2, "l2");
    nonneg(l3, "l3");
    nonneg(df_sup, "df_sup");
    nonneg(m_bnd, "m_bnd");
    nonneg(lambda_growth, "lambda_growth");
    nonneg(r_conf, "r_conf");
    nonneg(k_conf, "k_conf");
    nonneg(l_hess, "l_hess");
    nonneg(c0, "c0");
    nonneg(c1, "c1");
    nonneg(r0_low, "r0_low");
    nonneg(r1_up, "r1_up");
    if (c0 && c1 && *c0 > *c1) throw ConfigError("coefficients require c0 <= c1");
    if (r0_low && r1_up && *r0_low > *r1_up) throw ConfigError("coefficients require r0_low <= r1_up");
    if (l1 && m1x && m1m && std::abs(*l1 - (*m1x + *m1m)) > 1e-12 * std::max(1.0, *l1))
      throw ConfigError("coefficients require l1 = m1x + m1m");
  }
};

/// DF(pi_x, query) written into `out` (length d).
using ForceFn =
    std::function<void(const Matrix& positions, std::span<const double> query, std::span<double> out)>;
/// Optional batched version filling all N rows at once; must agree bitwise
/// with calling ForceFn on each row.
using BatchForceFn = std::function<void(const Matrix& positions, Matrix& out)>;
/// F(pi_x).
using EnergyFn = std::function<double(const Matrix& positions)>;
/// U_mu(x) = (delta F / delta m)(mu, x) for a one-dimensional density mu.
using LinearDerivativeFn = std::function<double(const GridDensity& mu, double x)>;
/// External potential V(x) for models of the form F = int V dmu + F_1.
using PotentialFn = std::function<double(std::span<const double> x)>;

struct MeanFieldModel {
  std::string name;
  SpaceKind space;
  ForceFn force;
  BatchForceFn batch_force;
  EnergyFn energy;
  LinearDerivativeFn linear_derivative;
  PotentialFn external_potential;
  ModelCoefficients coeffs;
};

/// grad U_N(x): row i is DF(pi_x, x_i). Writes into `out` (resized if needed).
inline void grad_UN_into(const MeanFieldModel& model, const Matrix& positions, Matrix& out) {
  const std::size_t n = positions.rows();
  const std::size_t d = positions.cols();
  if (out.rows() != n || out.cols() != d) out = Matrix(n, d);
  if (model.batch_force) {
    model.batch_force(positions, out);
  } else {
    for (std::size_t i = 0; i < n; ++i) model.force(positions, positions.row(i), out.row(i));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (double g : out.row(i))
      if (!std::isfinite(g))
        throw NumericalError("non-finite force on particle " + std::to_string(i) + " (model " + model.name + ")");
}

inline Matrix grad_UN(const MeanFieldModel& model, const Matrix& positions) {
  Matrix out(positions.rows(), positions.cols());
  grad_UN_into(model, positions, out);
  return out;
}

/// U_N(x) = N F(pi_x).
inline double potential_UN(const MeanFieldModel& model, const Matrix& positions) {
  if (!model.energy) throw CapabilityError("model '" + model.name + "' does not provide an energy");
  const double u = static_cast<double>(positions.rows()) * model.energy(positions);
  if (!std::isfinite(u)) throw NumericalError("non-finite potential U_N (model " + model.name + ")");
  return u;
}

}  // namespace mfkl

#endif  // MFKL_MODEL_HPP

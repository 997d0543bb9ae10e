#ifndef MFKL_ORACLE_HPP
#define MFKL_ORACLE_HPP

// Reference answers independent of the chain: the self-consistent density
// mu ∝ exp(-U_mu) on a 1-d grid, exact Gibbs tables for N <= 3 particles, and
// grid expectations.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mfkl/grid_density.hpp"
#include "mfkl/model.hpp"
#include "mfkl/rng.hpp"

namespace mfkl::oracle {

/// Default grid: [0,1) periodic on the torus; [-8s, 8s] on R with
/// s = 1/sqrt(r_conf) (the non-interacting Gaussian scale), s = 1 if r_conf
/// is not declared.
inline GridSpec default_grid(const MeanFieldModel& model, std::size_t n_cells = 2001) {
  if (model.space.is_torus()) return {0.0, 1.0, n_cells, true};
  double scale = 1.0;
  if (model.coeffs.r_conf && *model.coeffs.r_conf > 0.0) scale = 1.0 / std::sqrt(*model.coeffs.r_conf);
  return {-8.0 * scale, 8.0 * scale, n_cells, false};
}

struct FixedPointOptions {
  double beta = 0.5;  // damping of the Picard update
  double tol = 1e-12;
  std::size_t max_iter = 100000;
};

struct FixedPointResult {
  GridDensity density;
  std::size_t iterations = 0;
  double residual = 0.0;  // || mu - normalize(exp(-U_mu)) ||_L1
};

namespace detail {

inline double l1_distance(const GridDensity& a, const GridDensity& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a.values[j] - b.values[j]);
  return s * a.dx();
}

inline GridDensity gibbs_of(const MeanFieldModel& model, const GridDensity& mu) {
  std::vector<double> u(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    u[j] = model.linear_derivative(mu, mu.x(j));
    if (!std::isfinite(u[j])) throw NumericalError("non-finite U_mu at grid point " + std::to_string(j));
  }
  return GridDensity::from_potential(mu.grid, u);
}

}  // namespace detail

/// Damped Picard iteration mu <- (1 - beta) mu + beta normalize(exp(-U_mu)),
/// started from normalize(exp(-V)), stopped once the L1 change drops below tol.
inline FixedPointResult self_consistent_fixed_point(const MeanFieldModel& model, const GridSpec& grid,
                                                    const FixedPointOptions& opt = {}) {
  if (model.space.d != 1) throw ConfigError("self-consistency oracle is one-dimensional");
  if (!model.linear_derivative) throw CapabilityError("model '" + model.name + "' has no linear derivative");
  if (!(opt.beta > 0.0 && opt.beta <= 1.0)) throw ConfigError("damping beta must lie in (0,1]");
  if (!(opt.tol > 0.0)) throw ConfigError("tolerance must be positive");
  grid.validate();

  std::vector<double> v0(grid.n_cells, 0.0);
  if (model.external_potential)
    for (std::size_t j = 0; j < grid.n_cells; ++j) {
      const double x = grid.center(j);
      v0[j] = model.external_potential(std::span<const double>(&x, 1));
    }
  GridDensity mu = GridDensity::from_potential(grid, v0);

  double change = INFINITY;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    const GridDensity target = detail::gibbs_of(model, mu);
    GridDensity next = mu;
    for (std::size_t j = 0; j < mu.size(); ++j)
      next.values[j] = (1.0 - opt.beta) * mu.values[j] + opt.beta * target.values[j];
    next.normalize();
    change = detail::l1_distance(next, mu);
    mu = std::move(next);
    if (change < opt.tol) {
      FixedPointResult res{mu, it, detail::l1_distance(mu, detail::gibbs_of(model, mu))};
      return res;
    }
  }
  throw NonConvergenceError("self-consistency iteration did not converge in " + std::to_string(opt.max_iter) +
                                " iterations (last L1 change " + std::to_string(change) + ")",
                            change);
}

/// Exact stationary law of N <= 3 particles in d = 1, mu_inf^N ∝ exp(-U_N),
/// tabulated on grid^N.
struct GibbsTables {
  std::size_t n_particles = 0;
  GridSpec grid;
  std::vector<double> joint;         // row-major over (j_1, ..., j_N), density values
  GridDensity one_marginal;
  std::vector<double> two_marginal;  // n_cells^2 density values, empty for N = 1
};

inline GibbsTables small_n_gibbs(const MeanFieldModel& model, std::size_t n_particles, const GridSpec& grid,
                                 double max_cells = 1e8) {
  if (model.space.d != 1) throw ConfigError("small-N Gibbs tables are one-dimensional");
  if (n_particles < 1 || n_particles > 3) throw ConfigError("small-N Gibbs tables support N in {1,2,3}");
  if (!model.energy) throw CapabilityError("model '" + model.name + "' has no energy");
  grid.validate();
  const std::size_t n = grid.n_cells;
  const double cells = std::pow(static_cast<double>(n), static_cast<double>(n_particles));
  if (cells > max_cells)
    throw ResourceError("Gibbs table needs " + std::to_string(static_cast<long long>(cells)) + " cells, budget is " +
                        std::to_string(static_cast<long long>(max_cells)));
  const std::size_t total = static_cast<std::size_t>(cells);

  GibbsTables out;
  out.n_particles = n_particles;
  out.grid = grid;
  out.joint.resize(total);
  Matrix x(n_particles, 1);
  double umin = INFINITY;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (std::size_t p = n_particles; p-- > 0;) {
      x(p, 0) = grid.center(rem % n);
      rem /= n;
    }
    const double u = potential_UN(model, x);
    out.joint[idx] = u;
    umin = std::min(umin, u);
  }
  const double dx = grid.dx();
  const double vol = std::pow(dx, static_cast<double>(n_particles));
  double z = 0.0;
  for (double& u : out.joint) {
    u = std::exp(-(u - umin));
    z += u;
  }
  z *= vol;
  for (double& p : out.joint) p /= z;

  out.one_marginal.grid = grid;
  out.one_marginal.values.assign(n, 0.0);
  if (n_particles >= 2) out.two_marginal.assign(n * n, 0.0);
  const std::size_t stride1 = total / n;  // cells per value of j_1
  for (std::size_t idx = 0; idx < total; ++idx) {
    out.one_marginal.values[idx / stride1] += out.joint[idx];
    if (n_particles >= 2) out.two_marginal[idx / (stride1 / n)] += out.joint[idx];
  }
  for (double& v : out.one_marginal.values) v *= vol / dx;
  for (double& v : out.two_marginal) v *= vol / (dx * dx);
  out.one_marginal.normalize();  // absorb summation round-off
  return out;
}

/// Midpoint-rule integral sum_j f(x_j) rho_j dx.
inline double reference_expectation(const GridDensity& density, const std::function<double(double)>& f) {
  return density.expect(f);
}

/// Draws from the piecewise-constant density by inverse CDF.
inline std::vector<double> sample_from(const GridDensity& density, std::size_t count, RngStream& rng) {
  std::vector<double> cdf(density.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < density.size(); ++j) {
    acc += density.values[j] * density.dx();
    cdf[j] = acc;
  }
  std::vector<double> out(count);
  const double lo = density.grid.lo;
  const double dx = density.dx();
  for (auto& s : out) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    s = lo + (static_cast<double>(j) + rng.uniform()) * dx;
  }
  return out;
}

/// Stationary covariance (xx, xv, vv) of the chain for one coordinate in the
/// potential k x^2 / 2. The recursion z' = M z + B G with
///   Phi = [[a, h], [-(h k / 2)(1 + a), a]],  a = 1 - h^2 k / 2,
///   M = Phi diag(1, eta),  B = Phi (0, sqrt(1 - eta^2)),
/// gives S = M S M^T + B B^T, a 3 x 3 linear system in the symmetric entries.
struct HarmonicCovariance {
  double xx = 0.0;
  double xv = 0.0;
  double vv = 0.0;
};

inline HarmonicCovariance discrete_harmonic_covariance(double k, double h, double gamma) {
  if (!(k > 0.0) || !(h > 0.0) || !(gamma > 0.0) || !(gamma * h < 1.0))
    throw ConfigError("discrete harmonic oracle needs k > 0, h > 0, 0 < gamma h < 1");
  const double eta = 1.0 - gamma * h;
  const double a = 1.0 - 0.5 * h * h * k;
  const double p11 = a, p12 = h, p21 = -0.5 * h * k * (1.0 + a), p22 = a;
  if (!(std::abs(a) < 1.0)) throw DomainError("Verlet step is unstable for h^2 k >= 4");
  const double m11 = p11, m12 = p12 * eta, m21 = p21, m22 = p22 * eta;
  const double sig = std::sqrt(1.0 - eta * eta);
  const double b1 = p12 * sig, b2 = p22 * sig;
  // (I - K) s = bb with s = (xx, xv, vv)
  const double A[3][3] = {{1.0 - m11 * m11, -2.0 * m11 * m12, -m12 * m12},
                          {-m11 * m21, 1.0 - (m11 * m22 + m12 * m21), -m12 * m22},
                          {-m21 * m21, -2.0 * m21 * m22, 1.0 - m22 * m22}};
  const double rhs[3] = {b1 * b1, b1 * b2, b2 * b2};
  auto det3 = [](const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const double det = det3(A);
  if (!(std::abs(det) > 0.0)) throw NumericalError("discrete harmonic oracle: singular system");
  double sol[3];
  for (int c = 0; c < 3; ++c) {
    double Ac[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) Ac[i][j] = j == c ? rhs[i] : A[i][j];
    sol[c] = det3(Ac) / det;
  }
  return {sol[0], sol[1], sol[2]};
}

/// E|x_1|^2 under the stationary law of the chain for the quadratic model
/// (precision r on the mean mode, r + 2s on the N - 1 others).
inline double quadratic_discrete_second_moment(double r, double s, std::size_t n_particles, std::size_t d, double h,
                                               double gamma) {
  const double n = static_cast<double>(n_particles);
  const double mean_mode = discrete_harmonic_covariance(r, h, gamma).xx;
  const double rest = n_particles > 1 ? discrete_harmonic_covariance(r + 2.0 * s, h, gamma).xx : 0.0;
  return static_cast<double>(d) * (mean_mode / n + (1.0 - 1.0 / n) * rest);
}

/// Same quantity for the continuous-time stationary law exp(-U_N).
inline double quadratic_stationary_second_moment(double r, double s, std::size_t n_particles, std::size_t d) {
  const double n = static_cast<double>(n_particles);
  return static_cast<double>(d) * ((1.0 / r) / n + (1.0 - 1.0 / n) / (r + 2.0 * s));
}

}  // namespace mfkl::oracle

#endif  // MFKL_ORACLE_HPP

#ifndef MFKL_LYAPUNOV_HPP
#define MFKL_LYAPUNOV_HPP

// Lyapunov functions of the chain, Monte Carlo estimates of one-step drift
// P V(z), Gaussian moment utilities, and the C1 moment estimator.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfkl/chain.hpp"
#include "mfkl/parallel.hpp"
#include "mfkl/theory.hpp"

namespace mfkl::lyapunov {

enum class LyapunovKind { torus_v6, euclidean_phi3 };

/// torus_v6:       V(z) = sum_i |v_i|^6.
/// euclidean_phi3: V(z) = sum_i phi(z_i)^3, phi = V_ext(x) + |v|^2/2 + alpha x.v.
struct LyapunovSpec {
  LyapunovKind kind = LyapunovKind::torus_v6;
  double alpha = 0.0;
  PotentialFn potential;

  static LyapunovSpec torus_v6() { return {}; }

  /// `c0` is the lower quadratic confinement constant; phi stays positive
  /// only for alpha <= sqrt(c0/2).
  static LyapunovSpec euclidean_phi3(double alpha, PotentialFn potential, double c0) {
    if (!(alpha >= 0.0) || alpha > std::sqrt(c0 / 2.0) * (1.0 + 1e-12))
      throw ConfigError("euclidean_phi3 requires 0 <= alpha <= sqrt(c0/2)");
    if (!potential) throw ConfigError("euclidean_phi3 requires the external potential");
    return {LyapunovKind::euclidean_phi3, alpha, std::move(potential)};
  }
};

inline double lyapunov_value(const LyapunovSpec& spec, const ParticleState& state) {
  const std::size_t n = state.n_particles();
  double total = 0.0;
  if (spec.kind == LyapunovKind::torus_v6) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v2 = norm2(state.velocities.row(i));
      total += v2 * v2 * v2;
    }
    return total;
  }
  if (state.space.is_torus()) throw ConfigError("euclidean_phi3 is defined on R^d only");
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = state.positions.row(i);
    const auto v = state.velocities.row(i);
    double xv = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) xv += x[c] * v[c];
    const double phi = spec.potential(x) + 0.5 * norm2(v) + spec.alpha * xv;
    if (phi < 0.0)
      throw InvariantError("phi(z_" + std::to_string(i) + ") < 0: alpha too large for the confinement");
    total += phi * phi * phi;
  }
  return total;
}

struct DriftReport {
  double lyapunov = 0.0;       // V(z)
  double pv_estimate = 0.0;    // Monte Carlo estimate of P V(z)
  double pv_std_err = 0.0;
  double rhs_bound = 0.0;
  bool holds = false;          // pv_estimate - 3 pv_std_err <= rhs_bound
  double margin_sigmas = 0.0;  // (rhs_bound - pv_estimate) / pv_std_err
};

struct DriftOptions {
  std::size_t m_draws = 10000;
  /// Additive constant C of the Euclidean drift bound (1 - theta h) V + C N h d^3.
  /// It is not explicit; zero unless the caller supplies one.
  double euclidean_constant = 0.0;
  std::size_t threads = 1;
};

/// Samples of V(Phi(refresh(z))) over m_draws refresh Gaussians. Draw k uses
/// stream derive_seed(seed, k), so two states given the same seed share
/// their noise (common random numbers).
inline std::vector<double> kernel_drift_samples(const MeanFieldModel& model, const ParticleState& state,
                                                const ChainParams& params, const LyapunovSpec& spec,
                                                std::size_t m_draws, std::uint64_t seed, std::size_t threads) {
  params.validate();
  state.validate();
  const Matrix lead = grad_UN(model, state.positions);
  std::vector<double> values(m_draws);
  const double eta = params.eta();
  parallel_for(m_draws, threads, [&](std::size_t k) {
    RngStream rng(derive_seed(seed, k));
    ParticleState z = state;
    std::vector<double> noise(z.velocities.size());
    rng.fill_gaussian(noise);
    refresh_velocities_inplace(z, eta, noise);
    Matrix grad = lead;
    verlet_step_inplace(model, z, params.h, grad);
    values[k] = lyapunov_value(spec, z);
  });
  return values;
}

inline DriftReport estimate_kernel_drift(const MeanFieldModel& model, const ParticleState& state,
                                         const ChainParams& params, const LyapunovSpec& spec,
                                         const DriftOptions& options, std::uint64_t seed) {
  if (options.m_draws < 1000) throw ConfigError("drift estimate needs m_draws >= 1000");
  const double n = static_cast<double>(state.n_particles());
  const double d = static_cast<double>(state.dim());
  DriftReport rep;
  rep.lyapunov = lyapunov_value(spec, state);
  if (spec.kind == LyapunovKind::torus_v6) {
    if (!model.coeffs.df_sup) throw CapabilityError("torus drift bound disabled: coefficient df_sup is absent");
    const auto tl = theory::torus_lyapunov(params.gamma, *model.coeffs.df_sup, d);
    rep.rhs_bound = (1.0 - params.gamma * params.h) * rep.lyapunov + n * params.h * tl.torus_additive;
  } else {
    const auto lc = theory::lyapunov_constants(model.space, params.gamma, model.coeffs, n);
    const double theta = std::get<theory::EuclideanLyapunov>(lc).theta;
    rep.rhs_bound = (1.0 - theta * params.h) * rep.lyapunov + options.euclidean_constant * n * params.h * d * d * d;
  }

  const auto values = kernel_drift_samples(model, state, params, spec, options.m_draws, seed, options.threads);
  const double m = static_cast<double>(values.size());
  rep.pv_estimate = pairwise_sum(values) / m;
  std::vector<double> sq(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) sq[k] = (values[k] - rep.pv_estimate) * (values[k] - rep.pv_estimate);
  rep.pv_std_err = std::sqrt(pairwise_sum(sq) / (m - 1.0) / m);
  rep.holds = rep.pv_estimate - 3.0 * rep.pv_std_err <= rep.rhs_bound;
  rep.margin_sigmas = rep.pv_std_err > 0.0 ? (rep.rhs_bound - rep.pv_estimate) / rep.pv_std_err
                                           : (rep.holds ? INFINITY : -INFINITY);
  return rep;
}

/// Affine regression of P V(z) on V(z) over a family of states. The
/// Euclidean drift inequality implies slope <= 1 - theta h.
struct DriftSlopeResult {
  double slope = 0.0;
  double slope_std_err = 0.0;
  double intercept = 0.0;
  double slope_bound = 0.0;  // 1 - theta h
  bool holds = false;        // slope <= slope_bound + 2 slope_std_err
};

inline DriftSlopeResult drift_slope_test(const MeanFieldModel& model, const std::vector<ParticleState>& states,
                                         const ChainParams& params, const LyapunovSpec& spec,
                                         const DriftOptions& options, std::uint64_t seed) {
  if (states.size() < 3) throw ConfigError("slope test needs at least three states");
  if (spec.kind != LyapunovKind::euclidean_phi3) throw ConfigError("slope test applies to euclidean_phi3");
  const auto lc = theory::lyapunov_constants(model.space, params.gamma, model.coeffs,
                                             static_cast<double>(states.front().n_particles()));
  const double theta = std::get<theory::EuclideanLyapunov>(lc).theta;

  std::vector<double> xs(states.size()), ys(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    xs[k] = lyapunov_value(spec, states[k]);
    const auto v = kernel_drift_samples(model, states[k], params, spec, options.m_draws, seed, options.threads);
    ys[k] = pairwise_sum(v) / static_cast<double>(v.size());
  }
  const double n = static_cast<double>(xs.size());
  const double mx = pairwise_sum(xs) / n;
  const double my = pairwise_sum(ys) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("slope test needs states with distinct Lyapunov values");
  DriftSlopeResult out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - out.intercept - out.slope * xs[k];
    sse += e * e;
  }
  out.slope_std_err = std::sqrt(sse / (n - 2.0) / sxx);
  out.slope_bound = 1.0 - theta * params.h;
  out.holds = out.slope <= out.slope_bound + 2.0 * out.slope_std_err;
  return out;
}

// Gaussian moment utilities for G ~ N(0, I_d).

/// E|G|^6 = d (d + 2) (d + 4).
inline double sixth_moment_exact(std::size_t d) {
  const double x = static_cast<double>(d);
  return x * (x + 2.0) * (x + 4.0);
}

/// Jensen bound E|G|^6 <= 15 d^3.
inline double sixth_moment_bound(std::size_t d) {
  const double x = static_cast<double>(d);
  return 15.0 * x * x * x;
}

/// E|eta w + sqrt(1 - eta^2) G|^6 <= (1 + eps) eta^6 |w|^6 + 87 (1 - eta^2)^3 d^3 / eps^2,
/// valid for eps in (0, 1/10].
inline double refresh_bound(double eta, double w_norm, double eps, std::size_t d) {
  if (!(eps > 0.0 && eps <= 0.1)) throw DomainError("refresh_bound requires eps in (0, 1/10]");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("refresh_bound requires eta in [0,1]");
  const double x = static_cast<double>(d);
  const double one_m = 1.0 - eta * eta;
  return (1.0 + eps) * std::pow(eta, 6) * std::pow(w_norm, 6) + 87.0 * one_m * one_m * one_m * x * x * x / (eps * eps);
}

/// E[(a + b.G + c|G|^2)^3] <= a^3 + 15 d^3 c^3 + 3 a^2 c d + 9 a c^2 d^2 + 9 c d |b|^2 + 3 a |b|^2.
inline double quad_form_cube_bound(double a, double b_norm, double c, std::size_t d) {
  if (a < 0.0 || c < 0.0) throw DomainError("quad_form_cube_bound requires a, c >= 0");
  const double x = static_cast<double>(d);
  const double b2 = b_norm * b_norm;
  return a * a * a + 15.0 * x * x * x * c * c * c + 3.0 * a * a * c * x + 9.0 * a * c * c * x * x + 9.0 * c * x * b2 +
         3.0 * a * b2;
}

/// Particle averages (1/N) sum_i |v_i|^{2k} and |grad_i U_N|^{2k}, k = 1..3.
struct C1Record {
  std::array<double, 3> velocity{};
  std::array<double, 3> gradient{};
};

inline C1Record c1_record(const ParticleState& state, const Matrix& gradient) {
  C1Record rec;
  const double n = static_cast<double>(state.n_particles());
  for (std::size_t i = 0; i < state.n_particles(); ++i) {
    const double v2 = norm2(state.velocities.row(i));
    const double g2 = norm2(gradient.row(i));
    rec.velocity[0] += v2;
    rec.velocity[1] += v2 * v2;
    rec.velocity[2] += v2 * v2 * v2;
    rec.gradient[0] += g2;
    rec.gradient[1] += g2 * g2;
    rec.gradient[2] += g2 * g2 * g2;
  }
  for (auto& v : rec.velocity) v /= n;
  for (auto& g : rec.gradient) g /= n;
  return rec;
}

/// Observer emitting the six moments of a C1Record, in the order
/// velocity[0..2], gradient[0..2].
inline Observer c1_observer(std::size_t stride) {
  return {"c1_moments", stride, [](const ObserverContext& ctx) {
            const auto r = c1_record(ctx.state, ctx.gradient);
            return std::vector<double>{r.velocity[0], r.velocity[1], r.velocity[2],
                                       r.gradient[0], r.gradient[1], r.gradient[2]};
          }};
}

inline C1Record c1_from_values(const std::vector<double>& v) {
  if (v.size() != 6) throw ConfigError("C1 observer record must hold six values");
  C1Record r;
  for (std::size_t k = 0; k < 3; ++k) {
    r.velocity[k] = v[k];
    r.gradient[k] = v[3 + k];
  }
  return r;
}

/// Averages consecutive records over windows of `window` steps, skipping the
/// step-0 record. Input is c1_observer(1) output. A trailing partial window
/// is dropped. Window averages damp the heavy single-step sixth moments so
/// the running maximum settles.
inline std::vector<C1Record> window_average_c1(const std::vector<ObserverRecord>& records, std::size_t window) {
  if (window == 0) throw ConfigError("C1 window must be positive");
  std::vector<C1Record> out;
  C1Record acc;
  std::size_t count = 0;
  for (const auto& rec : records) {
    if (rec.step == 0) continue;
    const C1Record r = c1_from_values(rec.values);
    for (std::size_t k = 0; k < 3; ++k) {
      acc.velocity[k] += r.velocity[k];
      acc.gradient[k] += r.gradient[k];
    }
    if (++count == window) {
      for (std::size_t k = 0; k < 3; ++k) {
        acc.velocity[k] /= static_cast<double>(window);
        acc.gradient[k] /= static_cast<double>(window);
      }
      out.push_back(acc);
      acc = C1Record{};
      count = 0;
    }
  }
  return out;
}

/// Value of (1/d^3) sum_k L_k^2 (E|v|^{2k} + E|grad U|^{2k}) for one record.
inline double c1_term(const C1Record& rec, const ModelCoefficients& coeffs, std::size_t d) {
  if (!coeffs.l1 || !coeffs.l2 || !coeffs.l3) throw CapabilityError("C1 estimate disabled: l1, l2, l3 required");
  const std::array<double, 3> l{*coeffs.l1, *coeffs.l2, *coeffs.l3};
  const double d3 = std::pow(static_cast<double>(d), 3);
  double acc = 0.0;
  for (std::size_t k = 0; k < 3; ++k) acc += l[k] * l[k] * (rec.velocity[k] + rec.gradient[k]);
  return acc / d3;
}

/// Running maximum of c1_term over the recorded steps (0 for no records).
inline double estimate_c1(const std::vector<C1Record>& records, const ModelCoefficients& coeffs, std::size_t d) {
  double best = 0.0;
  if (records.empty()) {
    // still report missing coefficients
    (void)c1_term(C1Record{}, coeffs, d);
  }
  for (const auto& r : records) best = std::max(best, c1_term(r, coeffs, d));
  return best;
}

}  // namespace mfkl::lyapunov

#endif  // MFKL_LYAPUNOV_HPP

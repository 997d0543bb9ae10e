#ifndef MFKL_CHAIN_HPP
#define MFKL_CHAIN_HPP

// Unadjusted kinetic Langevin chain: one transition is a partial velocity
// refresh v <- eta v + sqrt(1 - eta^2) G with eta = 1 - gamma h, followed by
// one velocity-Verlet step of the Hamiltonian |v|^2/2 + U_N(x).

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mfkl/model.hpp"
#include "mfkl/rng.hpp"

namespace mfkl {

struct ChainParams {
  double h = 0.05;
  double gamma = 1.0;
  std::size_t n_steps = 0;
  std::uint64_t master_seed = 0;

  /// Damping of the velocity refresh. Always recomputed from h and gamma.
  double eta() const noexcept { return 1.0 - gamma * h; }

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step size h must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("friction gamma must be positive");
    if (!(gamma * h < 1.0)) throw ConfigError("need h < 1/gamma so that eta = 1 - gamma h lies in (0,1)");
  }

  /// Non-fatal notice when h sqrt(m1x + m1m) exceeds 1/10, the step-size
  /// condition of the entropy bound. Empty when coefficients are absent.
  std::optional<std::string> step_size_warning(const ModelCoefficients& coeffs) const {
    if (!coeffs.m1x || !coeffs.m1m) return std::nullopt;
    const double v = h * std::sqrt(*coeffs.m1x + *coeffs.m1m);
    if (v <= 0.1) return std::nullopt;
    std::ostringstream os;
    os << "h*sqrt(m1x+m1m) = " << v << " > 0.1: the entropy bound's step-size condition does not hold";
    return os.str();
  }
};

/// Independent noise stream per particle, indexed by a label carried with the
/// particle. Used to check exchangeability: relabelling particles together
/// with their streams permutes the trajectory.
struct ParticleStreams {
  std::vector<RngStream> streams;

  static ParticleStreams from_labels(std::uint64_t master_seed, std::span<const std::uint64_t> labels) {
    ParticleStreams out;
    out.streams.reserve(labels.size());
    for (auto l : labels) out.streams.emplace_back(derive_seed(master_seed, l));
    return out;
  }
};

/// Refresh noise for an N x d state, drawn particle-major, coordinate-minor.
inline void draw_refresh_noise(RngStream& rng, std::size_t n, std::size_t d, std::span<double> out) {
  (void)n;
  (void)d;
  rng.fill_gaussian(out);
}

inline void draw_refresh_noise(ParticleStreams& ps, std::size_t n, std::size_t d, std::span<double> out) {
  if (ps.streams.size() != n) throw ConfigError("one noise stream per particle is required");
  for (std::size_t i = 0; i < n; ++i) ps.streams[i].fill_gaussian(out.subspan(i * d, d));
}

template <class Noise>
concept NoiseSource = requires(Noise& src, std::span<double> out) { draw_refresh_noise(src, 1, 1, out); };

namespace detail {

inline void wrap_positions(ParticleState& state) {
  if (!state.space.is_torus()) return;
  for (double& x : state.positions.flat()) x = wrap_unit(x);
}

inline void check_finite_state(const ParticleState& s, const char* where) {
  if (!s.positions.all_finite() || !s.velocities.all_finite())
    throw NumericalError(std::string("non-finite state after ") + where);
}

}  // namespace detail

/// Velocity-Verlet step using a precomputed gradient. On entry `grad` holds
/// grad U_N(x); on exit it holds grad U_N(x_bar), ready for the next step.
/// Performs exactly one gradient evaluation.
inline void verlet_step_inplace(const MeanFieldModel& model, ParticleState& state, double h, Matrix& grad) {
  if (!(h > 0.0)) throw ConfigError("verlet step needs h > 0");
  Matrix& x = state.positions;
  Matrix& v = state.velocities;
  const double half_h2 = 0.5 * h * h;
  const double half_h = 0.5 * h;
  auto xf = x.flat();
  auto vf = v.flat();
  auto gf = grad.flat();
  for (std::size_t k = 0; k < xf.size(); ++k) {
    xf[k] = xf[k] + h * vf[k] - half_h2 * gf[k];
    vf[k] = vf[k] - half_h * gf[k];
  }
  detail::wrap_positions(state);
  try {
    grad_UN_into(model, x, grad);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("verlet step: ") + e.what());
  }
  for (std::size_t k = 0; k < vf.size(); ++k) vf[k] = vf[k] - half_h * gf[k];
  detail::check_finite_state(state, "verlet step");
}

/// One Verlet step with two gradient evaluations.
inline ParticleState verlet_step(const MeanFieldModel& model, const ParticleState& state, double h) {
  ParticleState out = state;
  Matrix grad = grad_UN(model, state.positions);
  verlet_step_inplace(model, out, h, grad);
  return out;
}

/// v_i <- eta v_i + sqrt(1 - eta^2) G_i with the Gaussians supplied in
/// particle-major order. Positions are untouched.
inline void refresh_velocities_inplace(ParticleState& state, double eta, std::span<const double> noise) {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("refresh damping eta must lie in (0,1)");
  auto vf = state.velocities.flat();
  if (noise.size() != vf.size()) throw ConfigError("refresh noise has the wrong size");
  const double sigma = std::sqrt(1.0 - eta * eta);
  for (std::size_t k = 0; k < vf.size(); ++k) vf[k] = eta * vf[k] + sigma * noise[k];
}

inline ParticleState refresh_velocities(const ParticleState& state, double eta, std::span<const double> noise) {
  ParticleState out = state;
  refresh_velocities_inplace(out, eta, noise);
  return out;
}

template <NoiseSource Noise>
ParticleState refresh_velocities(const ParticleState& state, double eta, Noise& noise_source) {
  std::vector<double> noise(state.velocities.size());
  draw_refresh_noise(noise_source, state.n_particles(), state.dim(), noise);
  return refresh_velocities(state, eta, noise);
}

/// One transition of the chain: refresh, then Verlet. Computes both gradients.
template <NoiseSource Noise>
ParticleState kernel_step(const MeanFieldModel& model, const ParticleState& state, const ChainParams& params,
                          Noise& noise_source) {
  params.validate();
  return verlet_step(model, refresh_velocities(state, params.eta(), noise_source), params.h);
}

/// Read-only view handed to observers. `gradient` is grad U_N at `state`.
struct ObserverContext {
  std::size_t step;
  const ParticleState& state;
  const Matrix& gradient;
};

struct Observer {
  std::string name;
  std::size_t stride = 1;
  std::function<std::vector<double>(const ObserverContext&)> record;
};

struct ObserverRecord {
  std::size_t step;
  std::vector<double> values;
};

struct RunResult {
  ParticleState final_state;
  /// records[k] holds the snapshots of observers[k], in step order.
  std::vector<std::vector<ObserverRecord>> records;
};

/// Runs params.n_steps transitions from `init`. Observers fire at step 0 and
/// at every multiple of their stride up to n_steps. The trailing Verlet
/// gradient is reused as the next leading gradient, which is bitwise
/// identical to recomputing it because the refresh does not move positions.
template <NoiseSource Noise>
RunResult run_chain(const MeanFieldModel& model, const ParticleState& init, const ChainParams& params,
                    const std::vector<Observer>& observers, Noise& noise_source) {
  params.validate();
  init.validate();
  if (init.space != model.space) throw ConfigError("initial state space does not match the model");
  for (const auto& o : observers)
    if (o.stride == 0) throw ConfigError("observer '" + o.name + "' needs a positive stride");

  RunResult result{init, std::vector<std::vector<ObserverRecord>>(observers.size())};
  ParticleState& state = result.final_state;
  Matrix grad = grad_UN(model, state.positions);
  std::vector<double> noise(state.velocities.size());
  const double eta = params.eta();

  auto notify = [&](std::size_t step) {
    for (std::size_t k = 0; k < observers.size(); ++k) {
      if (step % observers[k].stride != 0) continue;
      try {
        result.records[k].push_back({step, observers[k].record(ObserverContext{step, state, grad})});
      } catch (const std::exception& e) {
        throw Error("observer '" + observers[k].name + "' failed at step " + std::to_string(step) + ": " + e.what());
      }
    }
  };

  notify(0);
  for (std::size_t step = 1; step <= params.n_steps; ++step) {
    draw_refresh_noise(noise_source, state.n_particles(), state.dim(), noise);
    refresh_velocities_inplace(state, eta, noise);
    try {
      verlet_step_inplace(model, state, params.h, grad);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step));
    }
    notify(step);
  }
  return result;
}

struct PointMass {
  std::vector<double> x0;  // length d, or length 1 broadcast to every coordinate
};

struct GaussianLaw {
  double mean = 0.0;
  double sigma = 1.0;
  bool wrap = false;  // required on the torus
};

struct UniformTorus {};

using PositionLaw = std::variant<PointMass, GaussianLaw, UniformTorus>;

/// Draws N exchangeable particles: positions iid from `law` (all positions
/// first, particle-major), then iid standard Gaussian velocities.
inline ParticleState sample_initial(const PositionLaw& law, std::size_t n, SpaceKind space, RngStream& rng) {
  space.validate();
  if (n < 1) throw ConfigError("need at least one particle");
  const std::size_t d = space.d;
  Matrix x(n, d);
  if (const auto* pm = std::get_if<PointMass>(&law)) {
    if (pm->x0.size() != d && pm->x0.size() != 1) throw ConfigError("point-mass location must have length d or 1");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) x(i, c) = pm->x0.size() == 1 ? pm->x0[0] : pm->x0[c];
  } else if (const auto* g = std::get_if<GaussianLaw>(&law)) {
    if (!(g->sigma >= 0.0) || !std::isfinite(g->sigma) || !std::isfinite(g->mean))
      throw ConfigError("gaussian initial law needs finite mean and sigma >= 0");
    if (space.is_torus() && !g->wrap) throw ConfigError("gaussian initial law on the torus requires wrap = true");
    for (double& xv : x.flat()) xv = g->mean + g->sigma * rng.gaussian();
  } else {
    if (!space.is_torus()) throw ConfigError("uniform initial law is only defined on the torus");
    for (double& xv : x.flat()) xv = rng.uniform();
  }
  if (space.is_torus())
    for (double& xv : x.flat()) xv = wrap_unit(xv);
  Matrix v(n, d);
  rng.fill_gaussian(v.flat());
  ParticleState s{std::move(x), std::move(v), space};
  s.validate();
  return s;
}

}  // namespace mfkl

#endif  // MFKL_CHAIN_HPP

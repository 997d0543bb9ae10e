#ifndef MFKL_RISK_HPP
#define MFKL_RISK_HPP

// Empirical estimators: quadratic risk over independent replicas, particle
// moment tracking, binned divergences against grid densities, and geometric
// rate fitting.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mfkl/chain.hpp"
#include "mfkl/grid_density.hpp"
#include "mfkl/parallel.hpp"

namespace mfkl::risk {

using Observable = std::function<double(std::span<const double>)>;

struct RiskEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t reps = 0;
  // configuration echo
  std::string f_id;
  std::size_t n_steps = 0;
  std::size_t n_particles = 0;
  double h = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

/// Particle average (1/N) sum_i f(X_i).
inline double particle_average(const Observable& f, const Matrix& positions) {
  std::vector<double> vals(positions.rows());
  for (std::size_t i = 0; i < positions.rows(); ++i) vals[i] = f(positions.row(i));
  return pairwise_sum(vals) / static_cast<double>(vals.size());
}

/// Per-replica particle averages after params.n_steps steps. Replica k uses
/// the stream derive_seed(params.master_seed, k) for initialisation and noise.
inline std::vector<double> replica_estimates(const MeanFieldModel& model, const Observable& f,
                                             const ChainParams& params, std::size_t n_particles, std::size_t reps,
                                             const PositionLaw& init, std::size_t threads = 1) {
  std::vector<double> est(reps);
  parallel_for(reps, threads, [&](std::size_t k) {
    RngStream rng(derive_seed(params.master_seed, k));
    const ParticleState s0 = sample_initial(init, n_particles, model.space, rng);
    const RunResult run = run_chain(model, s0, params, {}, rng);
    est[k] = particle_average(f, run.final_state.positions);
  });
  return est;
}

/// Mean over replicas of ((1/N) sum_i f(X_i) - oracle_mean)^2 at step n.
inline RiskEstimate quadratic_risk(const MeanFieldModel& model, const Observable& f, const std::string& f_id,
                                   const ChainParams& params, std::size_t n_particles, std::size_t reps,
                                   double oracle_mean, const PositionLaw& init, std::size_t threads = 1) {
  if (reps < 8) throw ConfigError("quadratic risk needs at least 8 replicas");
  const auto est = replica_estimates(model, f, params, n_particles, reps, init, threads);
  std::vector<double> sq(reps);
  for (std::size_t k = 0; k < reps; ++k) sq[k] = (est[k] - oracle_mean) * (est[k] - oracle_mean);
  RiskEstimate out;
  const double r = static_cast<double>(reps);
  out.value = pairwise_sum(sq) / r;
  std::vector<double> dev(reps);
  for (std::size_t k = 0; k < reps; ++k) dev[k] = (sq[k] - out.value) * (sq[k] - out.value);
  out.std_err = std::sqrt(pairwise_sum(dev) / (r - 1.0) / r);
  out.reps = reps;
  out.f_id = f_id;
  out.n_steps = params.n_steps;
  out.n_particles = n_particles;
  out.h = params.h;
  out.gamma = params.gamma;
  out.seed = params.master_seed;
  return out;
}

/// Per-step particle moments (1/N) sum_i |x_i|^p and (1/N) sum_i |v_i|^p for
/// p in `orders`, with running maxima and running time averages. On the
/// torus |x_i| is the norm of the [0,1)^d representative.
class MomentTracker {
 public:
  explicit MomentTracker(std::vector<int> orders) : orders_(std::move(orders)) {
    for (int p : orders_)
      if (p != 2 && p != 4 && p != 6) throw ConfigError("moment orders must be among {2,4,6}");
    const std::size_t k = orders_.size();
    x_series_.resize(k);
    v_series_.resize(k);
    x_max_.assign(k, 0.0);
    v_max_.assign(k, 0.0);
    x_sum_.assign(k, 0.0);
    v_sum_.assign(k, 0.0);
  }

  /// Moments of one state in the layout [x orders..., v orders...].
  static std::vector<double> moments(const ParticleState& s, const std::vector<int>& orders) {
    std::vector<double> out(2 * orders.size(), 0.0);
    const double n = static_cast<double>(s.n_particles());
    for (std::size_t i = 0; i < s.n_particles(); ++i) {
      const double x2 = norm2(s.positions.row(i));
      const double v2 = norm2(s.velocities.row(i));
      for (std::size_t k = 0; k < orders.size(); ++k) {
        const double e = orders[k] / 2.0;
        out[k] += std::pow(x2, e);
        out[orders.size() + k] += std::pow(v2, e);
      }
    }
    for (double& o : out) o /= n;
    return out;
  }

  void push(const ParticleState& s) { push_values(moments(s, orders_)); }

  void push_values(const std::vector<double>& vals) {
    const std::size_t k = orders_.size();
    if (vals.size() != 2 * k) throw ConfigError("moment record has the wrong length");
    for (std::size_t j = 0; j < k; ++j) {
      x_series_[j].push_back(vals[j]);
      v_series_[j].push_back(vals[k + j]);
      x_max_[j] = std::max(x_max_[j], vals[j]);
      v_max_[j] = std::max(v_max_[j], vals[k + j]);
      x_sum_[j] += vals[j];
      v_sum_[j] += vals[k + j];
    }
    ++count_;
  }

  Observer observer(std::size_t stride) const {
    auto orders = orders_;
    return {"moments", stride, [orders](const ObserverContext& ctx) { return moments(ctx.state, orders); }};
  }

  const std::vector<int>& orders() const { return orders_; }
  std::size_t count() const { return count_; }
  const std::vector<double>& position_series(std::size_t k) const { return x_series_.at(k); }
  const std::vector<double>& velocity_series(std::size_t k) const { return v_series_.at(k); }
  double position_max(std::size_t k) const { return x_max_.at(k); }
  double velocity_max(std::size_t k) const { return v_max_.at(k); }
  double position_time_average(std::size_t k) const { return count_ ? x_sum_.at(k) / count_ : 0.0; }
  double velocity_time_average(std::size_t k) const { return count_ ? v_sum_.at(k) / count_ : 0.0; }

 private:
  std::vector<int> orders_;
  std::vector<std::vector<double>> x_series_, v_series_;
  std::vector<double> x_max_, v_max_, x_sum_, v_sum_;
  std::size_t count_ = 0;
};

enum class DivergenceKind { kl, tv };

struct DivergenceResult {
  double value = 0.0;
  bool infinite = false;     // KL with a sample bin of zero reference mass
  std::size_t clipped = 0;   // samples outside [lo, hi] moved to the edge bins
};

/// KL(p || q) or TV(p, q) between two probability vectors on common bins.
/// Bins with p = 0 contribute nothing to KL.
inline DivergenceResult divergence(const std::vector<double>& p, const std::vector<double>& q, DivergenceKind kind) {
  if (p.size() != q.size()) throw ConfigError("histograms must have the same number of bins");
  DivergenceResult r;
  if (kind == DivergenceKind::tv) {
    double s = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) s += std::abs(p[b] - q[b]);
    r.value = std::min(1.0, 0.5 * s);
    return r;
  }
  double s = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    if (p[b] <= 0.0) continue;
    if (q[b] <= 0.0) {
      r.infinite = true;
      r.value = std::numeric_limits<double>::infinity();
      return r;
    }
    s += p[b] * std::log(p[b] / q[b]);
  }
  r.value = std::max(0.0, s);
  return r;
}

/// Mass of the reference density in each of n_bins equal bins on [lo, hi],
/// integrating the piecewise-constant density exactly.
inline std::vector<double> reference_bin_masses(const GridDensity& ref, std::size_t n_bins) {
  std::vector<double> q(n_bins, 0.0);
  const double lo = ref.grid.lo;
  const double width = (ref.grid.hi - lo) / static_cast<double>(n_bins);
  const double dx = ref.dx();
  for (std::size_t j = 0; j < ref.size(); ++j) {
    const double a = lo + static_cast<double>(j) * dx;
    const double b = a + dx;
    std::size_t first = static_cast<std::size_t>(std::max(0.0, std::floor((a - lo) / width)));
    for (std::size_t bin = std::min(first, n_bins - 1); bin < n_bins; ++bin) {
      const double ba = lo + static_cast<double>(bin) * width;
      const double bb = ba + width;
      if (ba >= b) break;
      const double overlap = std::min(b, bb) - std::max(a, ba);
      if (overlap > 0.0) q[bin] += ref.values[j] * overlap;
    }
  }
  double total = 0.0;
  for (double v : q) total += v;
  for (double& v : q) v /= total;
  return q;
}

/// Empirical bin probabilities of `samples` on n_bins equal bins of
/// [lo, hi]; out-of-range samples are clipped into the edge bins.
inline std::vector<double> sample_histogram(std::span<const double> samples, double lo, double hi, std::size_t n_bins,
                                            std::size_t* clipped = nullptr) {
  std::vector<double> p(n_bins, 0.0);
  std::size_t clip = 0;
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (double s : samples) {
    double b = std::floor((s - lo) / width);
    if (s < lo || s > hi) ++clip;
    b = std::clamp(b, 0.0, static_cast<double>(n_bins - 1));
    p[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& v : p) v /= static_cast<double>(samples.size());
  if (clipped) *clipped = clip;
  return p;
}

inline DivergenceResult histogram_divergence(std::span<const double> samples, const GridDensity& reference,
                                             std::size_t n_bins, DivergenceKind kind) {
  if (n_bins < 10) throw ConfigError("histogram divergence needs at least 10 bins");
  if (samples.empty()) throw ConfigError("histogram divergence needs samples");
  std::size_t clipped = 0;
  const auto p = sample_histogram(samples, reference.grid.lo, reference.grid.hi, n_bins, &clipped);
  const auto q = reference_bin_masses(reference, n_bins);
  DivergenceResult r = divergence(p, q, kind);
  r.clipped = clipped;
  return r;
}

struct GeometricFit {
  double rate = 0.0;  // exp(slope) per index step
  double r_squared = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least squares of log(series[k]) on k.
inline GeometricFit fit_geometric_rate(const std::vector<double>& series) {
  if (series.size() < 10) throw DomainError("geometric fit needs at least 10 points");
  std::vector<double> y(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (!(series[k] > 0.0)) throw DomainError("geometric fit needs positive entries");
    y[k] = std::log(series[k]);
  }
  const double n = static_cast<double>(y.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    mx += static_cast<double>(k);
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double dx = static_cast<double>(k) - mx;
    sxx += dx * dx;
    sxy += dx * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  GeometricFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.rate = std::exp(fit.slope);
  double sse = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double e = y[k] - fit.intercept - fit.slope * static_cast<double>(k);
    sse += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace mfkl::risk

#endif  // MFKL_RISK_HPP

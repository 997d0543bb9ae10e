#ifndef MFKL_HARNESS_EXPERIMENTS_HPP
#define MFKL_HARNESS_EXPERIMENTS_HPP

// One runner per experiment kind. Each writes its tables into the output
// directory plus <kind>_summary.json holding the resolved config, the list of
// files, named pass/fail checks and the headline results. Nothing written
// here depends on the wall clock or the thread count.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mfkl/harness/config.hpp"
#include "mfkl/harness/io.hpp"
#include "mfkl/lyapunov.hpp"
#include "mfkl/oracle.hpp"
#include "mfkl/parallel.hpp"
#include "mfkl/risk.hpp"
#include "mfkl/theory.hpp"

namespace mfkl::harness {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentResult {
  std::string kind;
  std::filesystem::path dir;
  std::vector<std::string> files;  // relative to dir, summary last
  std::vector<Check> checks;
  Json results = Json::object();
  std::vector<std::string> warnings;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

// ---------------------------------------------------------------- observables

struct NamedObservable {
  std::string name;
  risk::Observable f;
  std::optional<double> sup;  // sup |f|, when bounded
};

/// x: first coordinate. x2: |x|^2. x2_clamped: min(|x|^2, 25).
/// cos2pi: mean over coordinates of cos(2 pi x_j). tanh: tanh of the first coordinate.
inline NamedObservable make_observable(const std::string& name) {
  if (name == "x") return {name, [](std::span<const double> x) { return x[0]; }, std::nullopt};
  if (name == "x2") return {name, [](std::span<const double> x) { return norm2(x); }, std::nullopt};
  if (name == "x2_clamped")
    return {name, [](std::span<const double> x) { return std::min(norm2(x), 25.0); }, 25.0};
  if (name == "cos2pi")
    return {name,
            [](std::span<const double> x) {
              double s = 0.0;
              for (double xi : x) s += std::cos(2.0 * std::numbers::pi * xi);
              return s / static_cast<double>(x.size());
            },
            1.0};
  if (name == "tanh") return {name, [](std::span<const double> x) { return std::tanh(x[0]); }, 1.0};
  throw ConfigError("unknown observable '" + name + "'");
}

// ---------------------------------------------------------------- helpers

namespace detail {

inline std::string fmt(double v) { return format_number(v); }

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_err = 0.0;  // nan with fewer than three points
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (xs.size() < 3) {
    f.slope_std_err = NAN;
    return f;
  }
  double sse = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - f.intercept - f.slope * xs[k];
    sse += e * e;
  }
  f.slope_std_err = std::sqrt(sse / (n - 2.0) / sxx);
  return f;
}

/// Mean and batch-means standard error of a time series.
inline std::pair<double, double> batch_means(const std::vector<double>& series, std::size_t batches) {
  const std::size_t len = series.size() / batches;
  if (len < 1) throw ConfigError("too few samples for the requested number of batches");
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b)
    means[b] = pairwise_sum(series.data() + b * len, len) / static_cast<double>(len);
  const double mean = pairwise_sum(means) / static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(batches - 1);
  return {mean, std::sqrt(var / static_cast<double>(batches))};
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline const QuadraticSpec* quadratic_spec(const ExperimentConfig& cfg) {
  return std::get_if<QuadraticSpec>(&cfg.model_spec);
}

/// Expectation of `obs` under the reference law for N particles.
inline double resolve_reference(const ExperimentConfig& cfg, const MeanFieldModel& model, const ReferenceSpec& ref,
                                 const NamedObservable& obs, std::size_t n_particles, std::string& how) {
  if (ref.mode == "value") {
    how = "given";
    return ref.value;
  }
  const auto* q = quadratic_spec(cfg);
  if (ref.mode == "gibbs" && q && obs.name == "x2") {
    how = "closed-form stationary second moment";
    return oracle::quadratic_stationary_second_moment(q->r, q->s, n_particles, cfg.space.d);
  }
  if (cfg.space.d != 1)
    throw ConfigError("reference '" + ref.mode + "' for observable '" + obs.name + "' needs d = 1");
  auto scalar = [&obs](double x) {
    const double xs[1] = {x};
    return obs.f(std::span<const double>(xs, 1));
  };
  if (ref.mode == "oracle") {
    how = "self-consistent fixed point";
    const auto fp = oracle::self_consistent_fixed_point(model, oracle::default_grid(model));
    return fp.density.expect(scalar);
  }
  if (n_particles > 3) throw ConfigError("reference 'gibbs' supports N <= 3 (or the quadratic model with x2)");
  how = "exact small-N Gibbs marginal";
  GridSpec g = oracle::default_grid(model, model.space.is_torus() ? 256 : 241);
  return oracle::small_n_gibbs(model, n_particles, g).one_marginal.expect(scalar);
}

inline Json check_json(const Check& c) { return Json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}}; }

inline void write_state_csv(const std::filesystem::path& path, const ParticleState& s) {
  CsvWriter w(path, {"particle", "coord", "x", "v"});
  for (std::size_t i = 0; i < s.n_particles(); ++i)
    for (std::size_t c = 0; c < s.dim(); ++c) w.row({i, c, s.positions(i, c), s.velocities(i, c)});
  w.close();
}

}  // namespace detail

/// Writes <kind>_summary.json and appends it to the file list.
inline void write_summary(const ExperimentConfig& cfg, ExperimentResult& res) {
  const std::string name = res.kind + "_summary.json";
  res.files.push_back(name);
  Json j;
  j["kind"] = res.kind;
  // the destination directory is not part of the experiment
  Json config = cfg.resolved;
  config.erase("output_dir");
  j["config"] = config;
  j["warnings"] = res.warnings;
  j["files"] = res.files;
  Json checks = Json::array();
  for (const auto& c : res.checks) checks.push_back(detail::check_json(c));
  j["checks"] = checks;
  j["pass"] = res.all_pass();
  j["results"] = res.results;
  write_json(res.dir / name, j);
}

/// Gate on a fitted log-log slope; NaN fails.
inline Check slope_gate_check(double slope, double lo, double hi) {
  return {"bias_slope_in_gate", slope >= lo && slope <= hi,
          "log-log slope " + detail::fmt(slope) + " in [" + detail::fmt(lo) + ", " + detail::fmt(hi) + "]"};
}

// ---------------------------------------------------------------- kinds

inline void run_sample(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res) {
  RngStream rng(cfg.chain.master_seed);
  const ParticleState init = sample_initial(cfg.init, cfg.n_particles, model.space, rng);
  Observer traj{"trajectory", cfg.sample.stride, [](const ObserverContext& ctx) {
                  std::vector<double> out;
                  out.reserve(2 * ctx.state.positions.size());
                  for (double x : ctx.state.positions.flat()) out.push_back(x);
                  for (double v : ctx.state.velocities.flat()) out.push_back(v);
                  return out;
                }};
  const RunResult run = run_chain(model, init, cfg.chain, {traj}, rng);

  const std::size_t n = cfg.n_particles, d = cfg.space.d;
  CsvWriter w(res.dir / "trajectories.csv", {"step", "particle", "coord", "x", "v"});
  for (const auto& rec : run.records[0])
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) w.row({rec.step, i, c, rec.values[i * d + c], rec.values[n * d + i * d + c]});
  w.close();
  detail::write_state_csv(res.dir / "initial_state.csv", init);
  detail::write_state_csv(res.dir / "final_state.csv", run.final_state);
  res.files = {"trajectories.csv", "initial_state.csv", "final_state.csv"};

  const bool finite = run.final_state.positions.all_finite() && run.final_state.velocities.all_finite();
  res.checks.push_back({"finite_final_state", finite, finite ? "all entries finite" : "non-finite entries"});
  double x2 = 0.0, v2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x2 += norm2(run.final_state.positions.row(i));
    v2 += norm2(run.final_state.velocities.row(i));
  }
  res.results["n_steps"] = cfg.chain.n_steps;
  res.results["records"] = run.records[0].size();
  res.results["final_mean_x2"] = json_number(x2 / static_cast<double>(n));
  res.results["final_mean_v2"] = json_number(v2 / static_cast<double>(n));
}

inline void run_oracle(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res) {
  const auto& o = cfg.oracle;
  GridSpec grid = oracle::default_grid(model, o.n_cells);
  if (o.lo) grid = {*o.lo, *o.hi, o.n_cells, false};
  const auto fp = oracle::self_consistent_fixed_point(model, grid, {o.beta, o.tol, o.max_iter});
  CsvWriter w(res.dir / "oracle.csv", {"x", "density"});
  for (std::size_t j = 0; j < fp.density.size(); ++j) w.row({fp.density.x(j), fp.density.values[j]});
  w.close();
  res.files = {"oracle.csv"};
  const double mean = fp.density.expect([](double x) { return x; });
  const double var = fp.density.expect([mean](double x) { return (x - mean) * (x - mean); });
  res.results["mean"] = json_number(mean);
  res.results["variance"] = json_number(var);
  res.results["second_moment"] = json_number(fp.density.expect([](double x) { return x * x; }));
  res.results["residual"] = json_number(fp.residual);
  res.results["iterations"] = fp.iterations;
  if (const auto* q = detail::quadratic_spec(cfg)) {
    const double closed = 1.0 / (q->r + 2.0 * q->s);
    res.results["closed_form_variance"] = json_number(closed);
    res.checks.push_back({"variance_matches_closed_form", std::abs(var - closed) <= 1e-3,
                          "|" + detail::fmt(var) + " - " + detail::fmt(closed) + "| <= 0.001"});
  }
  res.checks.push_back({"residual_below_1e-8", fp.residual < 1e-8, "residual " + detail::fmt(fp.residual)});
}

inline void run_constants(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res) {
  const auto& o = cfg.constants;
  const double n = static_cast<double>(cfg.n_particles);
  const double d = static_cast<double>(cfg.space.d);
  const double h = cfg.chain.h, gamma = cfg.chain.gamma;
  Json out = Json::object();

  // C1
  std::optional<double> c1;
  std::string c1_note;
  if (o.c1_hat) {
    c1 = *o.c1_hat;
    c1_note = "given";
  } else if (o.c1_estimate) {
    try {
      RngStream rng(cfg.chain.master_seed);
      ChainParams p = cfg.chain;
      p.n_steps = o.c1_estimate->n_steps;
      const ParticleState init = sample_initial(cfg.init, cfg.n_particles, model.space, rng);
      const RunResult run = run_chain(model, init, p, {lyapunov::c1_observer(1)}, rng);
      c1 = lyapunov::estimate_c1(lyapunov::window_average_c1(run.records[0], o.c1_estimate->window), model.coeffs,
                                 cfg.space.d);
      c1_note = "running maximum of " + std::to_string(o.c1_estimate->window) + "-step window averages over " +
                std::to_string(p.n_steps) + " steps";
    } catch (const CapabilityError& e) {
      c1_note = e.what();
    }
  } else {
    c1_note = "not provided; C2 and the entropy bound need c1_hat";
  }

  // delta_N and LSI
  std::optional<theory::LsiResult> lsi;
  if (o.lsi) {
    lsi = theory::lsi_constants(*o.lsi, n, d);
    Json l;
    l["lambda_tilde"] = json_number(lsi->lambda_tilde);
    l["delta_N"] = json_number(lsi->delta_n);
    l["rho_prime_star"] = lsi->rho_prime_star ? json_number(*lsi->rho_prime_star) : Json(nullptr);
    if (!lsi->rho_prime_star) l["rho_prime_star_reason"] = lsi->rho_prime_reason;
    l["rho_star"] = lsi->rho_star ? json_number(*lsi->rho_star) : Json(nullptr);
    if (!lsi->rho_star) l["rho_star_reason"] = lsi->rho_star_reason;
    l["r_entropy"] = json_number(lsi->r_entropy);
    l["eta_N"] = json_number(lsi->eta_n);
    out["lsi"] = l;
  }
  const double delta_n = o.delta_n ? *o.delta_n : (lsi ? lsi->delta_n : 0.0);

  const auto tc = theory::contraction_constants(gamma, o.rho, c1.value_or(0.0), delta_n);
  Json c;
  c["gamma"] = json_number(gamma);
  c["rho"] = json_number(o.rho);
  c["a"] = json_number(tc.a);
  c["kappa"] = json_number(tc.kappa);
  c["rate_per_step"] = json_number(1.0 / (1.0 + tc.kappa * h));
  c["delta_N"] = json_number(delta_n);
  c["c1_hat"] = c1 ? json_number(*c1) : Json(nullptr);
  c["c1_note"] = c1_note;
  c["C2"] = c1 ? json_number(tc.c2) : Json(nullptr);
  out["contraction"] = c;
  res.checks.push_back({"kappa_in_unit_interval", tc.kappa > 0.0 && tc.kappa < 1.0, "kappa " + detail::fmt(tc.kappa)});

  // Lyapunov
  try {
    const auto lc = theory::lyapunov_constants(cfg.space, gamma, model.coeffs, n);
    Json l;
    if (const auto* e = std::get_if<theory::EuclideanLyapunov>(&lc)) {
      l["kind"] = "euclidean";
      l["alpha"] = json_number(e->alpha);
      l["theta"] = json_number(e->theta);
      l["lambda0"] = json_number(e->lambda0);
    } else {
      l["kind"] = "torus";
      l["additive_constant"] = json_number(std::get<theory::TorusLyapunov>(lc).torus_additive);
    }
    out["lyapunov"] = l;
  } catch (const CapabilityError& e) {
    out["lyapunov"] = Json{{"disabled", e.what()}};
  }

  // entropy bound at n = chain.n_steps
  std::optional<double> h0 = o.h0, i0 = o.i0;
  std::string h0_note = "given";
  if (!h0 || !i0) {
    const auto* q = detail::quadratic_spec(cfg);
    const auto* g = std::get_if<GaussianLaw>(&cfg.init);
    if (q && g && !cfg.space.is_torus() && g->sigma > 0.0) {
      const auto div = theory::gaussian_init_divergence(q->r, q->s, n, d, g->mean, g->sigma);
      if (!h0) h0 = div.relative_entropy;
      if (!i0) i0 = div.fisher_information;
      h0_note = "closed form for a Gaussian initial law and the quadratic model";
    }
  }
  std::optional<double> hn;
  if (h0 && i0 && c1) {
    hn = theory::entropy_bound(static_cast<double>(cfg.chain.n_steps), n, d, h, *h0, *i0, tc);
    out["entropy_bound"] = Json{{"n", cfg.chain.n_steps}, {"H0", json_number(*h0)}, {"I0", json_number(*i0)},
                                {"initial_note", h0_note}, {"value", json_number(*hn)}};
  } else {
    out["entropy_bound"] = Json{{"disabled", !c1 ? "needs c1_hat" : "needs H0 and I0 (or a Gaussian init on the quadratic model)"}};
  }

  if (o.f_sup) {
    Json r;
    r["f_sup"] = json_number(*o.f_sup);
    if (hn) {
      r["tv2"] = json_number(theory::risk_bounds(*o.f_sup, n, *hn, theory::RiskMode::tv2, {o.tv, 1.0, 0.0}));
      if (lsi)
        r["entropy"] = json_number(
            theory::risk_bounds(*o.f_sup, n, *hn, theory::RiskMode::entropy, {0.0, lsi->r_entropy, lsi->eta_n}));
    } else {
      r["disabled"] = "needs the entropy bound";
    }
    out["risk_bounds"] = r;
  }

  if (auto w = cfg.chain.step_size_warning(model.coeffs)) res.warnings.push_back(*w);
  write_json(res.dir / "constants.json", out);
  res.files = {"constants.json"};
  res.results = out;
}

inline void run_risk(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res,
                     std::size_t threads) {
  const auto obs = make_observable(cfg.risk.observable);
  std::string how;
  const double ref = detail::resolve_reference(cfg, model, cfg.risk.reference, obs, cfg.n_particles, how);
  const auto r =
      risk::quadratic_risk(model, obs.f, obs.name, cfg.chain, cfg.n_particles, cfg.risk.reps, ref, cfg.init, threads);
  Json j;
  j["observable"] = obs.name;
  j["reference"] = json_number(ref);
  j["reference_source"] = how;
  j["N"] = r.n_particles;
  j["n_steps"] = r.n_steps;
  j["h"] = json_number(r.h);
  j["reps"] = r.reps;
  j["risk"] = json_number(r.value);
  j["std_err"] = json_number(r.std_err);
  write_json(res.dir / "risk.json", j);
  res.files = {"risk.json"};
  res.results = j;
  res.checks.push_back({"finite_risk", std::isfinite(r.value), "risk " + detail::fmt(r.value)});
}

inline void run_sweep_n(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res,
                        std::size_t threads) {
  const auto& o = cfg.sweep_n;
  const auto obs = make_observable(o.observable);
  CsvWriter w(res.dir / "sweep_N.csv", {"parameter", "estimate", "std_err", "gate_lo", "gate_hi", "pass"});
  Json rows = Json::array();
  std::vector<risk::RiskEstimate> est;
  for (std::size_t N : o.n_values) {
    std::string how;
    const double ref = detail::resolve_reference(cfg, model, o.reference, obs, N, how);
    est.push_back(risk::quadratic_risk(model, obs.f, obs.name, cfg.chain, N, o.reps, ref, cfg.init, threads));
    w.row({N, est.back().value, est.back().std_err, std::string(), std::string(), std::string()});
    rows.push_back(Json{{"N", N}, {"risk", json_number(est.back().value)}, {"std_err", json_number(est.back().std_err)},
                        {"reference", json_number(ref)}, {"reference_source", how}});
  }
  const auto lo = std::min_element(o.n_values.begin(), o.n_values.end()) - o.n_values.begin();
  const auto hi = std::max_element(o.n_values.begin(), o.n_values.end()) - o.n_values.begin();
  const double gap = est[lo].value - est[hi].value;
  const double se = std::hypot(est[lo].std_err, est[hi].std_err);
  const bool pass = gap > o.gap_sigmas * se;
  w.row({std::string("gap"), gap, se, o.gap_sigmas * se, INFINITY, pass});
  w.close();
  res.files = {"sweep_N.csv"};
  res.results["rows"] = rows;
  res.results["gap"] = json_number(gap);
  res.results["gap_std_err"] = json_number(se);
  std::ostringstream os;
  os << "risk(N=" << o.n_values[lo] << ") - risk(N=" << o.n_values[hi] << ") = " << detail::fmt(gap) << " vs "
     << detail::fmt(o.gap_sigmas) << " x SE " << detail::fmt(se);
  res.checks.push_back({"risk_decreases_in_N", pass, os.str()});
}

inline void run_sweep_h(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res,
                        std::size_t threads) {
  const auto& o = cfg.sweep_h;
  const auto obs = make_observable(o.observable);
  std::string how;
  const double ref = detail::resolve_reference(cfg, model, o.reference, obs, cfg.n_particles, how);
  const std::size_t nh = o.h_values.size();
  const auto* q = detail::quadratic_spec(cfg);
  const bool exact = o.slope_source == "exact_discrete";
  if (exact && !(q && o.observable == "x2"))
    throw ConfigError("config.sweep_h.slope_source: 'exact_discrete' needs the quadratic model with observable x2");

  std::vector<double> mean(nh), se(nh);
  parallel_for(nh, threads, [&](std::size_t k) {
    ChainParams p = cfg.chain;
    p.h = o.h_values[k];
    p.n_steps = o.n_steps;
    p.master_seed = derive_seed(cfg.chain.master_seed, k);
    RngStream rng(p.master_seed);
    const ParticleState init = sample_initial(cfg.init, cfg.n_particles, model.space, rng);
    std::vector<double> series;
    series.reserve(o.n_steps - o.burn_in);
    Observer avg{"average", 1, [&](const ObserverContext& ctx) {
                   if (ctx.step > o.burn_in) series.push_back(risk::particle_average(obs.f, ctx.state.positions));
                   return std::vector<double>{};
                 }};
    run_chain(model, init, p, {avg}, rng);
    std::tie(mean[k], se[k]) = detail::batch_means(series, o.batches);
  });

  CsvWriter w(res.dir / "sweep_h.csv", {"parameter", "estimate", "std_err", "gate_lo", "gate_hi", "pass"});
  std::vector<double> lx, ly;
  Json rows = Json::array();
  bool consistent = true;
  std::string inconsistent;
  for (std::size_t k = 0; k < nh; ++k) {
    const double h = o.h_values[k];
    const double bias = mean[k] - ref;
    w.row({h, bias, se[k], std::string(), std::string(), std::string()});
    Json row{{"h", json_number(h)}, {"estimate", json_number(mean[k])}, {"bias", json_number(bias)},
             {"std_err", json_number(se[k])}};
    double slope_bias = bias;
    if (exact) {
      const double e = oracle::quadratic_discrete_second_moment(q->r, q->s, cfg.n_particles, cfg.space.d, h,
                                                                cfg.chain.gamma);
      row["exact_discrete"] = json_number(e);
      row["exact_bias"] = json_number(e - ref);
      slope_bias = e - ref;
      if (std::abs(mean[k] - e) > 4.0 * se[k]) {
        consistent = false;
        inconsistent += " h=" + detail::fmt(h);
      }
    }
    rows.push_back(row);
    lx.push_back(std::log(h));
    ly.push_back(std::log(std::abs(slope_bias)));
  }
  const auto fit = detail::fit_line(lx, ly);
  const Check gate = slope_gate_check(fit.slope, o.gate_lo, o.gate_hi);
  const bool pass = gate.pass;
  w.row({std::string("slope"), fit.slope, fit.slope_std_err, o.gate_lo, o.gate_hi, pass});
  w.close();
  res.files = {"sweep_h.csv"};
  res.results["observable"] = obs.name;
  res.results["reference"] = json_number(ref);
  res.results["reference_source"] = how;
  res.results["slope_source"] = o.slope_source;
  res.results["rows"] = rows;
  res.results["slope"] = json_number(fit.slope);
  res.results["slope_std_err"] = json_number(fit.slope_std_err);
  res.checks.push_back(gate);
  if (exact)
    res.checks.push_back({"monte_carlo_matches_exact_discrete", consistent,
                          consistent ? "every h within 4 SE" : "off by more than 4 SE at" + inconsistent});
}

inline void run_converge(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res,
                         std::size_t threads) {
  const auto& o = cfg.converge;
  if (cfg.space.d != 1) throw ConfigError("config.space.d: converge compares histograms in d = 1");
  if (cfg.space.is_torus()) throw ConfigError("config.space.kind: converge is implemented for the real line");
  // locate the oracle, then rebuild it on the histogram window
  const auto coarse = oracle::self_consistent_fixed_point(model, oracle::default_grid(model));
  const double m = coarse.density.expect([](double x) { return x; });
  const double sd = std::sqrt(coarse.density.expect([m](double x) { return (x - m) * (x - m); }));
  const GridSpec window{m - o.range_sigmas * sd, m + o.range_sigmas * sd, o.n_bins * 40, false};
  const auto ref = oracle::self_consistent_fixed_point(model, window);

  const std::size_t n = cfg.n_particles;
  const std::size_t n_rec = cfg.chain.n_steps / o.stride + 1;
  std::vector<std::vector<double>> pooled(n_rec, std::vector<double>(o.reps * n));
  parallel_for(o.reps, threads, [&](std::size_t k) {
    RngStream rng(derive_seed(cfg.chain.master_seed, k));
    const ParticleState s0 = sample_initial(cfg.init, n, model.space, rng);
    Observer pos{"positions", o.stride, [&](const ObserverContext& ctx) {
                   auto& dst = pooled[ctx.step / o.stride];
                   for (std::size_t i = 0; i < n; ++i) dst[k * n + i] = ctx.state.positions(i, 0);
                   return std::vector<double>{};
                 }};
    run_chain(model, s0, cfg.chain, {pos}, rng);
  });

  std::vector<double> tv(n_rec), kl(n_rec);
  CsvWriter w(res.dir / "converge.csv", {"step", "tv", "kl"});
  for (std::size_t r = 0; r < n_rec; ++r) {
    tv[r] = risk::histogram_divergence(pooled[r], ref.density, o.n_bins, risk::DivergenceKind::tv).value;
    kl[r] = risk::histogram_divergence(pooled[r], ref.density, o.n_bins, risk::DivergenceKind::kl).value;
    w.row({r * o.stride, tv[r], kl[r]});
  }
  w.close();
  res.files = {"converge.csv"};

  // decaying segment: from the start until TV first reaches floor_factor x the
  // late-time floor (median of the second half)
  const double floor = detail::median(std::vector<double>(tv.begin() + static_cast<std::ptrdiff_t>(n_rec / 2), tv.end()));
  std::size_t end = 0;
  while (end < n_rec && tv[end] > o.floor_factor * floor) ++end;
  const auto tc = theory::contraction_constants(cfg.chain.gamma, o.rho, 0.0);
  const double bound = 1.0 / (1.0 + tc.kappa * cfg.chain.h);
  res.results["floor"] = json_number(floor);
  res.results["segment_end_step"] = end * o.stride;
  res.results["rate_bound"] = json_number(bound);
  res.results["kappa"] = json_number(tc.kappa);
  try {
    const auto fit = risk::fit_geometric_rate(std::vector<double>(tv.begin(), tv.begin() + static_cast<std::ptrdiff_t>(end)));
    const double rate = std::pow(fit.rate, 1.0 / static_cast<double>(o.stride));
    res.results["rate_per_step"] = json_number(rate);
    res.results["r_squared"] = json_number(fit.r_squared);
    const bool ok_rate = rate <= bound + o.rate_slack;
    const bool ok_r2 = fit.r_squared > o.r2_min;
    res.checks.push_back({"rate_at_most_bound", ok_rate,
                          "fitted rate " + detail::fmt(rate) + " vs (1+kappa h)^-1 + " + detail::fmt(o.rate_slack) +
                              " = " + detail::fmt(bound + o.rate_slack)});
    res.checks.push_back({"fit_r_squared", ok_r2, "r^2 " + detail::fmt(fit.r_squared) + " > " + detail::fmt(o.r2_min)});
  } catch (const DomainError& e) {
    res.checks.push_back({"rate_at_most_bound", false,
                          std::string("decaying segment has ") + std::to_string(end) + " records: " + e.what()});
  }
}

inline void run_lyapunov_check(const ExperimentConfig& cfg, const MeanFieldModel& model, ExperimentResult& res,
                               std::size_t threads) {
  const auto& o = cfg.lyapunov_check;
  const std::size_t n = cfg.n_particles, d = cfg.space.d;
  const std::uint64_t state_seed = derive_seed(cfg.chain.master_seed, 0);
  const lyapunov::DriftOptions opts{o.m_draws, o.euclidean_constant.value_or(0.0), threads};

  if (cfg.space.is_torus()) {
    std::vector<ParticleState> states;
    for (std::size_t k = 0; k < o.n_states; ++k) {
      RngStream rng(derive_seed(state_seed, k));
      Matrix x(n, d), v(n, d);
      for (double& e : x.flat()) e = rng.uniform();
      for (double& e : v.flat()) e = o.velocity_scale * rng.gaussian();
      states.emplace_back(std::move(x), std::move(v), cfg.space);
    }
    CsvWriter w(res.dir / "lyapunov_check.csv", {"h", "state", "V", "PV", "PV_std_err", "bound", "margin_sigmas", "holds"});
    Json per_h = Json::array();
    std::optional<double> largest;
    for (std::size_t j = 0; j < o.h_values.size(); ++j) {
      ChainParams p = cfg.chain;
      p.h = o.h_values[j];
      std::vector<std::size_t> failed;
      double worst = INFINITY;
      for (std::size_t k = 0; k < states.size(); ++k) {
        const auto rep = lyapunov::estimate_kernel_drift(model, states[k], p, lyapunov::LyapunovSpec::torus_v6(), opts,
                                                         derive_seed(derive_seed(cfg.chain.master_seed, 1 + j), k));
        w.row({p.h, k, rep.lyapunov, rep.pv_estimate, rep.pv_std_err, rep.rhs_bound, rep.margin_sigmas, rep.holds});
        worst = std::min(worst, rep.margin_sigmas);
        if (!rep.holds) failed.push_back(k);
      }
      std::string detail = failed.empty() ? "all " + std::to_string(states.size()) + " states hold" : "";
      for (std::size_t k : failed) detail += (detail.empty() ? "" : "; ") + std::string("state ") + std::to_string(k) +
                                             " fails at h=" + detail::fmt(p.h);
      res.checks.push_back({"torus_drift_h=" + detail::fmt(p.h), failed.empty(), detail});
      per_h.push_back(Json{{"h", json_number(p.h)}, {"failures", failed.size()}, {"min_margin_sigmas", json_number(worst)}});
      if (failed.empty()) largest = std::max(largest.value_or(0.0), p.h);
    }
    w.close();
    res.files = {"lyapunov_check.csv"};
    res.results["per_h"] = per_h;
    res.results["largest_passing_h"] = largest ? json_number(*largest) : Json(nullptr);
    return;
  }

  const auto lc = theory::lyapunov_constants(cfg.space, cfg.chain.gamma, model.coeffs, static_cast<double>(n));
  const auto& el = std::get<theory::EuclideanLyapunov>(lc);
  if (!model.external_potential) throw CapabilityError("Euclidean drift check needs the external potential");
  const auto spec = lyapunov::LyapunovSpec::euclidean_phi3(el.alpha, model.external_potential, *model.coeffs.c0);
  std::vector<ParticleState> states;
  const double lo = o.scale_range[0], hi = o.scale_range[1];
  for (std::size_t k = 0; k < o.n_states; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(o.n_states - 1);
    const double scale = lo * std::pow(hi / lo, t);
    RngStream rng(derive_seed(state_seed, k));
    Matrix x(n, d), v(n, d);
    for (double& e : x.flat()) e = scale * o.position_scale * rng.gaussian();
    for (double& e : v.flat()) e = scale * o.velocity_scale * rng.gaussian();
    states.emplace_back(std::move(x), std::move(v), cfg.space);
  }
  CsvWriter ws(res.dir / "lyapunov_slopes.csv", {"h", "slope", "slope_std_err", "bound", "holds"});
  std::optional<CsvWriter> wp;
  if (o.euclidean_constant)
    wp.emplace(res.dir / "lyapunov_check.csv",
               std::initializer_list<std::string>{"h", "state", "V", "PV", "PV_std_err", "bound", "margin_sigmas", "holds"});
  Json per_h = Json::array();
  std::optional<double> largest;
  for (std::size_t j = 0; j < o.h_values.size(); ++j) {
    ChainParams p = cfg.chain;
    p.h = o.h_values[j];
    const std::uint64_t seed = derive_seed(cfg.chain.master_seed, 1 + j);
    const auto sl = lyapunov::drift_slope_test(model, states, p, spec, opts, seed);
    ws.row({p.h, sl.slope, sl.slope_std_err, sl.slope_bound, sl.holds});
    bool ok = sl.holds;
    res.checks.push_back({"euclidean_slope_h=" + detail::fmt(p.h), sl.holds,
                          "slope " + detail::fmt(sl.slope) + " <= 1 - theta h + 2 SE = " +
                              detail::fmt(sl.slope_bound + 2.0 * sl.slope_std_err)});
    Json row{{"h", json_number(p.h)}, {"slope", json_number(sl.slope)}, {"slope_std_err", json_number(sl.slope_std_err)},
             {"bound", json_number(sl.slope_bound)}};
    if (wp) {
      std::string detail;
      for (std::size_t k = 0; k < states.size(); ++k) {
        const auto rep = lyapunov::estimate_kernel_drift(model, states[k], p, spec, opts, seed);
        wp->row({p.h, k, rep.lyapunov, rep.pv_estimate, rep.pv_std_err, rep.rhs_bound, rep.margin_sigmas, rep.holds});
        if (!rep.holds)
          detail += (detail.empty() ? "" : "; ") + std::string("state ") + std::to_string(k) + " fails at h=" +
                    detail::fmt(p.h);
      }
      ok = ok && detail.empty();
      res.checks.push_back({"euclidean_drift_h=" + detail::fmt(p.h), detail.empty(),
                            detail.empty() ? "all " + std::to_string(states.size()) + " states hold" : detail});
    }
    per_h.push_back(row);
    if (ok) largest = std::max(largest.value_or(0.0), p.h);
  }
  ws.close();
  res.files = {"lyapunov_slopes.csv"};
  if (wp) {
    wp->close();
    res.files.push_back("lyapunov_check.csv");
  }
  res.results["theta"] = json_number(el.theta);
  res.results["alpha"] = json_number(el.alpha);
  res.results["per_h"] = per_h;
  res.results["largest_passing_h"] = largest ? json_number(*largest) : Json(nullptr);
  if (!o.euclidean_constant) res.warnings.push_back("pointwise Euclidean drift not checked: euclidean_constant not given");
}

/// Runs the experiment, writing everything into `dir` (created if needed).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                       std::size_t threads) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ResourceError("cannot create output directory " + dir.string());
  const MeanFieldModel model = build_model(cfg);
  ExperimentResult res;
  res.kind = cfg.kind;
  res.dir = dir;
  if (auto w = cfg.chain.step_size_warning(model.coeffs); w && cfg.kind != "constants") res.warnings.push_back(*w);
  const std::string& k = cfg.kind;
  if (k == "sample") run_sample(cfg, model, res);
  else if (k == "oracle") run_oracle(cfg, model, res);
  else if (k == "constants") run_constants(cfg, model, res);
  else if (k == "risk") run_risk(cfg, model, res, threads);
  else if (k == "sweep_N") run_sweep_n(cfg, model, res, threads);
  else if (k == "sweep_h") run_sweep_h(cfg, model, res, threads);
  else if (k == "converge") run_converge(cfg, model, res, threads);
  else if (k == "lyapunov_check") run_lyapunov_check(cfg, model, res, threads);
  else throw ConfigError("config.kind: unknown experiment kind '" + k + "'");
  write_summary(cfg, res);
  return res;
}

}  // namespace mfkl::harness

#endif  // MFKL_HARNESS_EXPERIMENTS_HPP

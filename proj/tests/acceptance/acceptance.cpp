// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Tolerances are pinned here; seeds are fixed so the run is deterministic.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "../test_util.hpp"
#include "mfkl/mfkl.hpp"

using namespace mfkl;
using namespace mfkl::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kWork = fs::temp_directory_path() / "mfkl_acceptance";

fs::path fresh(const std::string& name) {
  const fs::path p = kWork / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string num(double v) { return format_number(v); }

std::string join_checks(const ExperimentResult& r, bool failures_only) {
  std::string out;
  for (const auto& c : r.checks) {
    if (failures_only && c.pass) continue;
    out += (out.empty() ? "" : "; ") + c.name + " (" + c.detail + ")";
  }
  return out;
}

Json chain(double h, std::size_t n_steps, std::uint64_t seed) {
  return {{"h", h}, {"gamma", 1.0}, {"n_steps", n_steps}, {"seed", seed}};
}

// ---------------------------------------------------------------- 1

Outcome constants_reproduction() {
  const auto start = std::chrono::steady_clock::now();
  const auto tc = theory::contraction_constants(1.0, 1.0, 1.0);
  const auto el = theory::euclidean_lyapunov(1.0, 1.0, 0.5, 0.5, 1.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double alpha_rel = std::abs(el.alpha / (1.0 / 7.0) - 1.0);
  const double theta_rel = std::abs(el.theta / (1.0 / 35.0) - 1.0);
  const bool ok = std::abs(tc.a - 1.0 / 55.0) <= 1e-12 && std::abs(tc.kappa - 1.0 / 171.0) <= 1e-12 &&
                  el.lambda0 >= 2.0 / 15713.0 && alpha_rel <= 0.03 && theta_rel <= 0.03 && secs < 1.0;
  return {ok, "a=" + num(tc.a) + " kappa=" + num(tc.kappa) + " lambda0(N=1)=" + num(el.lambda0) +
                  " >= 2/15713; alpha off 1/7 by " + num(alpha_rel) + ", theta off 1/35 by " + num(theta_rel) +
                  " (<= 0.03)"};
}

// ---------------------------------------------------------------- 2

Outcome torus_drift() {
  std::string detail;
  bool ok = true;
  std::size_t cases = 0;
  for (std::size_t d : {1u, 2u}) {
    Json j{{"kind", "lyapunov_check"},
           {"model", {{"variant", "torus_trig"}, {"a", 0.3}, {"b", 0.2}}},
           {"space", {{"kind", "torus"}, {"d", d}}},
           {"N", 4},
           {"chain", chain(0.05, 0, 20 + d)},
           {"lyapunov_check",
            {{"h_values", {0.01, 0.05, 0.1}}, {"n_states", 100}, {"m_draws", 10000}, {"velocity_scale", 2.0}}}};
    const auto res = run_experiment(parse_config(j, ""), fresh("torus_d" + std::to_string(d)), 1);
    cases += res.checks.size() * 100;
    if (!res.all_pass()) {
      ok = false;
      detail += " d=" + std::to_string(d) + ": " + join_checks(res, true);
    }
  }
  return {ok, ok ? std::to_string(cases) + " (state, h, d) cases within bound + 3 sigma" : "violations:" + detail};
}

// ---------------------------------------------------------------- 3

Outcome euclidean_slope() {
  Json j{{"kind", "lyapunov_check"},
         {"model", {{"variant", "quadratic"}, {"r", 1.0}, {"s", 5e-5}}},
         {"space", {{"kind", "euclidean"}, {"d", 1}}},
         {"N", 4},
         {"chain", chain(0.05, 0, 31)},
         {"lyapunov_check", {{"h_values", {0.05}}, {"n_states", 200}, {"m_draws", 10000}, {"scale_range", {0.5, 5.0}}}}};
  const auto res = run_experiment(parse_config(j, ""), fresh("euclidean"), 1);
  return {res.all_pass(), join_checks(res, false)};
}

// ---------------------------------------------------------------- 4

Outcome bias_order() {
  Json j{{"kind", "sweep_h"},
         {"model", {{"variant", "quadratic"}, {"r", 1.0}, {"s", 0.0}}},
         {"space", {{"kind", "euclidean"}, {"d", 1}}},
         {"N", 1},
         {"chain", chain(0.05, 0, 41)},
         {"sweep_h",
          {{"h_values", {0.025, 0.05, 0.1, 0.2}},
           {"n_steps", 1000000},
           {"burn_in", 1000},
           {"observable", "x2"},
           {"reference", 1.0},
           {"slope_source", "exact_discrete"},
           {"gate", {1.5, 2.5}}}}};
  const auto res = run_experiment(parse_config(j, ""), fresh("bias"), 1);
  return {res.all_pass(), join_checks(res, false)};
}

// ---------------------------------------------------------------- 5

Outcome oracle_variance() {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  const auto fp = oracle::self_consistent_fixed_point(m, oracle::default_grid(m));
  const double mean = fp.density.expect([](double x) { return x; });
  const double var = fp.density.expect([mean](double x) { return (x - mean) * (x - mean); });
  const auto m0 = make_builtin_model(QuadraticSpec{1.0, 0.0, 1});
  const auto fp0 = oracle::self_consistent_fixed_point(m0, oracle::default_grid(m0), {1.0, 1e-12, 100});
  const bool ok = std::abs(var - 2.0 / 3.0) <= 1e-3 && fp.residual < 1e-8 && fp0.iterations == 1;
  return {ok, "variance " + num(var) + " (2/3 +- 1e-3), residual " + num(fp.residual) + " (< 1e-8), s=0 iterations " +
                  std::to_string(fp0.iterations)};
}

// ---------------------------------------------------------------- 6

fs::path g_converge_dir;

Outcome convergence_floor() {
  Json j{{"kind", "converge"},
         {"model", {{"variant", "quadratic"}, {"r", 1.0}, {"s", 0.25}}},
         {"space", {{"kind", "euclidean"}, {"d", 1}}},
         {"N", 32},
         {"chain", chain(0.05, 600, 61)},
         {"init", {{"law", "point"}, {"x0", {0.0}}}},
         {"converge", {{"reps", 256}, {"n_bins", 50}, {"range_sigmas", 8.0}, {"rate_slack", 0.02}, {"r2_min", 0.9}}}};
  g_converge_dir = fresh("converge");
  const auto res = run_experiment(parse_config(j, ""), g_converge_dir, 1);
  return {res.all_pass(), join_checks(res, false)};
}

// ---------------------------------------------------------------- 7

Outcome propagation_of_chaos() {
  Json j{{"kind", "sweep_N"},
         {"model", {{"variant", "quadratic"}, {"r", 1.0}, {"s", 0.25}}},
         {"space", {{"kind", "euclidean"}, {"d", 1}}},
         {"N", 8},
         {"chain", chain(0.05, 4000, 71)},
         {"sweep_N", {{"N_values", {8, 64}}, {"reps", 64}, {"observable", "x2_clamped"}, {"gap_sigmas", 2.0}}}};
  const auto res = run_experiment(parse_config(j, ""), fresh("chaos"), 1);
  return {res.all_pass(), join_checks(res, false)};
}

// ---------------------------------------------------------------- 8

std::vector<MeanFieldModel> property_models() {
  return {make_builtin_model(QuadraticSpec{1.0, 0.25, 2}), make_builtin_model(GaussAttractRepelSpec{1.0, 0.05, 1.0, 2}),
          make_builtin_model(TorusTrigSpec{0.3, 0.2, 2}),
          make_builtin_model(FlatConvexRegressionSpec{{{1.0, 0.5}, {-0.3, 2.0}, {0.7, -1.0}}, {0.2, 0.9, 0.4}, 1.0})};
}

std::string reversibility() {
  RngStream rng(81);
  double worst = 0.0;
  for (const auto& m : property_models())
    for (int t = 0; t < 40; ++t) {
      const ParticleState s = test::random_state(1 + t % 7, m.space, rng);
      ParticleState fwd = verlet_step(m, s, 0.05);
      for (double& v : fwd.velocities.flat()) v = -v;
      const ParticleState back = verlet_step(m, fwd, 0.05);
      for (std::size_t k = 0; k < s.positions.size(); ++k) {
        double dx = back.positions.flat()[k] - s.positions.flat()[k];
        if (m.space.is_torus()) dx = minimal_image(dx);
        worst = std::max({worst, std::abs(dx), std::abs(back.velocities.flat()[k] + s.velocities.flat()[k])});
      }
    }
  return worst <= 1e-9 ? "" : "reversibility error " + num(worst) + " > 1e-9";
}

std::string finite_differences() {
  RngStream rng(82);
  const double step = 1e-5;
  double worst = 0.0;
  for (const auto& m : property_models())
    for (int t = 0; t < 10; ++t) {
      const std::size_t n = 2 + t % 4;
      const Matrix x = test::random_positions(n, m.space, rng);
      const Matrix g = grad_UN(m, x);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < m.space.d; ++c) {
          Matrix xp = x, xm = x;
          xp(i, c) += step;
          xm(i, c) -= step;
          const double fd = (potential_UN(m, xp) - potential_UN(m, xm)) / (2 * step);
          worst = std::max(worst, std::abs(fd - g(i, c)) / std::max(1.0, std::abs(g(i, c))));
        }
    }
  return worst <= 1e-5 ? "" : "finite-difference relative error " + num(worst) + " > 1e-5";
}

std::string permutation() {
  RngStream rng(83);
  for (const auto& m : property_models())
    for (int t = 0; t < 20; ++t) {
      const std::size_t n = 2 + t % 9;
      const Matrix x = test::random_positions(n, m.space, rng, 2.0);
      const auto perm = test::random_permutation(n, rng);
      const Matrix px = test::permute_rows(x, perm);
      if (!(grad_UN(m, px) == test::permute_rows(grad_UN(m, x), perm)))
        return "gradient of " + m.name + " not permutation-equivariant";
      if (potential_UN(m, px) != potential_UN(m, x)) return "energy of " + m.name + " not permutation-invariant";
    }
  return "";
}

std::string refresh_stationarity() {
  const std::size_t m = 400000;
  RngStream rng(84);
  const double eta = 0.95;
  ParticleState s{Matrix(m, 1), Matrix(m, 1), SpaceKind::euclidean(1)};
  rng.fill_gaussian(s.velocities.flat());
  const ParticleState out = refresh_velocities(s, eta, rng);
  const double exact[3] = {1.0, 3.0, 15.0};
  const double fourth_of[3] = {3.0, 105.0, 10395.0};  // E v^{4k}
  for (int k = 0; k < 3; ++k) {
    double acc = 0.0;
    for (double v : out.velocities.flat()) acc += std::pow(v, 2 * (k + 1));
    const double est = acc / static_cast<double>(m);
    const double se = std::sqrt((fourth_of[k] - exact[k] * exact[k]) / static_cast<double>(m));
    if (std::abs(est - exact[k]) > 3.0 * se)
      return "refresh moment of order " + std::to_string(2 * (k + 1)) + " is " + num(est) + ", outside 3 sigma";
  }
  return "";
}

std::string sixth_moments() {
  for (std::size_t d = 1; d <= 20; ++d) {
    const double x = static_cast<double>(d);
    if (lyapunov::sixth_moment_exact(d) != x * (x + 2) * (x + 4)) return "sixth_moment_exact wrong at d=" + std::to_string(d);
    if (lyapunov::sixth_moment_exact(d) > lyapunov::sixth_moment_bound(d)) return "d(d+2)(d+4) > 15 d^3 at d=" + std::to_string(d);
  }
  RngStream rng(85);
  const std::size_t m = 400000, d = 3;
  double acc = 0.0, acc2 = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    double r2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double g = rng.gaussian();
      r2 += g * g;
    }
    const double v = r2 * r2 * r2;
    acc += v;
    acc2 += v * v;
  }
  const double mean = acc / m;
  const double se = std::sqrt((acc2 / m - mean * mean) / m);
  if (std::abs(mean - lyapunov::sixth_moment_exact(d)) > 3.0 * se)
    return "Monte Carlo E|G|^6 in d=3 is " + num(mean) + ", outside 3 sigma of 105";
  return "";
}

std::string pinsker() {
  if (g_converge_dir.empty() || !fs::exists(g_converge_dir / "converge.csv")) return "no divergence series to check";
  std::ifstream in(g_converge_dir / "converge.csv");
  std::string line;
  std::getline(in, line);
  std::size_t pairs = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string step, tv, kl;
    std::getline(ss, step, ',');
    std::getline(ss, tv, ',');
    std::getline(ss, kl, ',');
    const double t = std::stod(tv), k = kl == "inf" ? INFINITY : std::stod(kl);
    if (t > std::sqrt(k / 2.0) + 1e-15) return "Pinsker violated at step " + step;
    ++pairs;
  }
  return pairs > 0 ? "" : "empty divergence series";
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(MFKL_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_reproducibility() {
  Json j{{"kind", "sample"},
         {"model", {{"variant", "gauss_attract_repel"}, {"L", 1.0}, {"s", 0.05}, {"r", 1.0}}},
         {"space", {{"kind", "euclidean"}, {"d", 2}}},
         {"N", 16},
         {"chain", chain(0.05, 300, 86)},
         {"sample", {{"stride", 10}}}};
  const fs::path cfg = kWork / "repro.json";
  write_json(cfg, j);
  const fs::path a = fresh("repro_a"), b = fresh("repro_b");
  if (run_cli("sample --config " + cfg.string() + " --out " + a.string()) != 0) return "CLI run failed";
  if (run_cli("sample --config " + cfg.string() + " --out " + b.string() + " --threads 3") != 0) return "CLI run failed";
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    if (slurp(a / name) != slurp(b / name)) return "output " + name.string() + " differs between identical runs";
    ++files;
  }
  return files >= 4 ? "" : "expected at least four output files";
}

Outcome property_suites() {
  const std::pair<const char*, std::function<std::string()>> parts[] = {
      {"reversibility", reversibility},       {"finite differences", finite_differences},
      {"permutation", permutation},           {"refresh stationarity", refresh_stationarity},
      {"sixth moments", sixth_moments},       {"Pinsker", pinsker},
      {"reproducibility", cli_reproducibility}};
  std::string failed, passed;
  for (const auto& [name, fn] : parts) {
    std::string why;
    try {
      why = fn();
    } catch (const std::exception& e) {
      why = e.what();
    }
    if (why.empty()) passed += (passed.empty() ? "" : ", ") + std::string(name);
    else failed += (failed.empty() ? "" : "; ") + std::string(name) + ": " + why;
  }
  return {failed.empty(), failed.empty() ? passed : failed};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"constants reproduction", constants_reproduction},
      {"torus Lyapunov drift", torus_drift},
      {"Euclidean Lyapunov slope", euclidean_slope},
      {"stationary bias order in h", bias_order},
      {"self-consistency oracle", oracle_variance},
      {"convergence-in-n floor", convergence_floor},
      {"propagation-of-chaos trend", propagation_of_chaos},
      {"property suites", property_suites}};
  int failures = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::ostringstream t;
    t.precision(3);
    t << secs;
    std::cout << (o.pass ? "PASS " : "FAIL ") << index << " " << name << ": " << o.detail << " [" << t.str() << " s]"
              << std::endl;
  }
  std::cout << (failures == 0 ? "ALL 8 CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}

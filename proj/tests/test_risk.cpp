#include <gtest/gtest.h>

#include <cmath>

#include "mfkl/builtin_models.hpp"
#include "mfkl/oracle.hpp"
#include "mfkl/risk.hpp"
#include "mfkl/theory.hpp"
#include "test_util.hpp"

using namespace mfkl;
using namespace mfkl::risk;

namespace {

GridDensity gaussian_density(double mean, double sigma, const GridSpec& g) {
  std::vector<double> u(g.n_cells);
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double z = (g.center(j) - mean) / sigma;
    u[j] = 0.5 * z * z;
  }
  return GridDensity::from_potential(g, u);
}

const Observable x2 = [](std::span<const double> x) { return x[0] * x[0]; };

}  // namespace

TEST(QuadraticRisk, ConstantObservableHasZeroRisk) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  const Observable c = [](std::span<const double>) { return 0.7; };
  const auto r = quadratic_risk(m, c, "const", ChainParams{0.05, 1.0, 50, 3}, 4, 8, 0.7, GaussianLaw{});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.std_err, 0.0);
  EXPECT_EQ(r.reps, 8u);
  EXPECT_EQ(r.n_particles, 4u);
  EXPECT_EQ(r.f_id, "const");
  EXPECT_THROW(quadratic_risk(m, c, "const", ChainParams{0.05, 1.0, 5, 3}, 4, 7, 0.7, GaussianLaw{}), ConfigError);
}

TEST(QuadraticRisk, ThreadCountDoesNotChangeResult) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  const ChainParams p{0.05, 1.0, 200, 9};
  const auto a = quadratic_risk(m, x2, "x2", p, 6, 16, 2.0 / 3.0, GaussianLaw{}, 1);
  const auto b = quadratic_risk(m, x2, "x2", p, 6, 16, 2.0 / 3.0, GaussianLaw{}, 4);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_err, b.std_err);
}

// Independent particles (s = 0) at stationarity: risk = Var(x^2) / N = 2 / N.
TEST(QuadraticRisk, DecreasesLikeOneOverN) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.0, 1});
  const ChainParams p{0.05, 1.0, 400, 17};
  const auto r4 = quadratic_risk(m, x2, "x2", p, 4, 400, 1.0, GaussianLaw{});
  const auto r32 = quadratic_risk(m, x2, "x2", p, 32, 400, 1.0, GaussianLaw{});
  EXPECT_NEAR(r4.value, 0.5, 4.0 * r4.std_err + 0.02);
  EXPECT_NEAR(r32.value, 2.0 / 32.0, 4.0 * r32.std_err + 0.005);
  EXPECT_LT(r32.value + 2.0 * std::hypot(r4.std_err, r32.std_err), r4.value);
}

// The estimate for a bounded observable stays below the risk bound
// evaluated with the exact initial relative entropy (H = 0 at stationarity).
TEST(QuadraticRisk, BelowTheoreticalBound) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.0, 1});
  const Observable f = [](std::span<const double> x) { return std::tanh(x[0]); };
  const std::size_t n = 8;
  const auto r = quadratic_risk(m, f, "tanh", ChainParams{0.05, 1.0, 100, 5}, n, 64, 0.0, GaussianLaw{});
  const double bound = theory::risk_bounds(1.0, n, 0.0, theory::RiskMode::tv2, {});
  EXPECT_LT(r.value, bound);
}

TEST(MomentTracker, KnownState) {
  ParticleState s{Matrix(2, 1), Matrix(2, 1), SpaceKind::euclidean(1)};
  s.positions(0, 0) = 1.0;
  s.positions(1, 0) = 2.0;
  s.velocities(0, 0) = -1.0;
  MomentTracker t({2, 4, 6});
  t.push(s);
  EXPECT_DOUBLE_EQ(t.position_series(0)[0], 2.5);
  EXPECT_DOUBLE_EQ(t.position_series(1)[0], 8.5);
  EXPECT_DOUBLE_EQ(t.position_series(2)[0], 32.5);
  EXPECT_DOUBLE_EQ(t.velocity_series(2)[0], 0.5);
  s.positions(1, 0) = 0.0;
  t.push(s);
  EXPECT_DOUBLE_EQ(t.position_max(0), 2.5);
  EXPECT_DOUBLE_EQ(t.position_time_average(0), 1.5);
  EXPECT_EQ(t.count(), 2u);
  EXPECT_THROW(MomentTracker({3}), ConfigError);
  EXPECT_THROW(t.push_values({1.0}), ConfigError);
}

TEST(MomentTracker, ObserverFeedsTracker) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  RngStream rng(2);
  MomentTracker t({2, 6});
  const auto run = run_chain(m, sample_initial(GaussianLaw{}, 16, m.space, rng), ChainParams{0.05, 1.0, 100, 2},
                             {t.observer(10)}, rng);
  for (const auto& rec : run.records[0]) t.push_values(rec.values);
  EXPECT_EQ(t.count(), 11u);
  EXPECT_EQ(t.position_series(0).back(), MomentTracker::moments(run.final_state, {2, 6})[0]);
}

TEST(Divergence, IdenticalAndDisjoint) {
  const std::vector<double> p{0.25, 0.25, 0.5, 0.0};
  const std::vector<double> q{0.0, 0.0, 0.0, 1.0};
  EXPECT_EQ(divergence(p, p, DivergenceKind::tv).value, 0.0);
  EXPECT_EQ(divergence(p, p, DivergenceKind::kl).value, 0.0);
  EXPECT_DOUBLE_EQ(divergence(p, q, DivergenceKind::tv).value, 1.0);
  const auto kl = divergence(p, q, DivergenceKind::kl);
  EXPECT_TRUE(kl.infinite);
  EXPECT_TRUE(std::isinf(kl.value));
  EXPECT_THROW(divergence(p, {1.0}, DivergenceKind::tv), ConfigError);
}

TEST(Divergence, HandValues) {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<double> q{0.25, 0.75};
  EXPECT_DOUBLE_EQ(divergence(p, q, DivergenceKind::tv).value, 0.25);
  EXPECT_NEAR(divergence(p, q, DivergenceKind::kl).value, 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
}

TEST(Divergence, PinskerAndTriangle) {
  RngStream rng(4);
  auto random_prob = [&](std::size_t n) {
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) s += (x = rng.uniform() + 0.01);
    for (double& x : v) x /= s;
    return v;
  };
  for (int t = 0; t < 200; ++t) {
    const auto p = random_prob(12), q = random_prob(12), r = random_prob(12);
    const double tv = divergence(p, q, DivergenceKind::tv).value;
    const double kl = divergence(p, q, DivergenceKind::kl).value;
    EXPECT_LE(tv, std::sqrt(kl / 2.0) + 1e-15);
    EXPECT_LE(tv, divergence(p, r, DivergenceKind::tv).value + divergence(r, q, DivergenceKind::tv).value + 1e-15);
  }
}

TEST(HistogramDivergence, SelfSampling) {
  const GridSpec g{-6.0, 6.0, 1201, false};
  const auto ref = gaussian_density(0.0, 1.0, g);
  RngStream rng(5);
  std::vector<double> xs(100000);
  for (double& x : xs) x = rng.gaussian();
  const auto tv = histogram_divergence(xs, ref, 50, DivergenceKind::tv);
  const auto kl = histogram_divergence(xs, ref, 50, DivergenceKind::kl);
  EXPECT_LE(tv.value, 0.03);
  EXPECT_LE(tv.value, std::sqrt(kl.value / 2.0));
  // shifted reference is far
  const auto far = histogram_divergence(xs, gaussian_density(2.0, 1.0, g), 50, DivergenceKind::tv);
  EXPECT_GT(far.value, 0.6);
  EXPECT_THROW(histogram_divergence(xs, ref, 9, DivergenceKind::tv), ConfigError);
  EXPECT_THROW(histogram_divergence(std::vector<double>{}, ref, 20, DivergenceKind::tv), ConfigError);
}

TEST(HistogramDivergence, ClippingAndBinMasses) {
  const GridSpec g{0.0, 1.0, 100, false};
  const auto flat = GridDensity::from_potential(g, std::vector<double>(100, 0.0));
  const auto q = reference_bin_masses(flat, 10);
  for (double v : q) EXPECT_NEAR(v, 0.1, 1e-12);
  // bins that do not align with grid cells split mass by overlap
  const auto q3 = reference_bin_masses(flat, 30);
  for (double v : q3) EXPECT_NEAR(v, 1.0 / 30.0, 1e-12);
  std::size_t clipped = 0;
  const std::vector<double> xs{-1.0, 0.05, 0.5, 2.0};
  const auto p = sample_histogram(xs, 0.0, 1.0, 10, &clipped);
  EXPECT_EQ(clipped, 2u);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[9], 0.25);
}

TEST(GeometricFit, ExactSeries) {
  std::vector<double> s(30);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = 3.0 * std::pow(0.9, static_cast<double>(k));
  const auto fit = fit_geometric_rate(s);
  EXPECT_NEAR(fit.rate, 0.9, 1e-12);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(std::exp(fit.intercept), 3.0, 1e-10);
}

TEST(GeometricFit, NoisySeries) {
  RngStream rng(6);
  std::vector<double> s(60);
  for (std::size_t k = 0; k < s.size(); ++k)
    s[k] = std::pow(0.85, static_cast<double>(k)) * (1.0 + 0.05 * (2.0 * rng.uniform() - 1.0));
  const auto fit = fit_geometric_rate(s);
  EXPECT_NEAR(fit.rate, 0.85, 0.01);
  EXPECT_GT(fit.r_squared, 0.99);
  EXPECT_THROW(fit_geometric_rate(std::vector<double>(5, 1.0)), DomainError);
  s[3] = 0.0;
  EXPECT_THROW(fit_geometric_rate(s), DomainError);
}

TEST(ParticleAverage, Basic) {
  Matrix x(4, 1);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
  EXPECT_DOUBLE_EQ(particle_average(x2, x), 3.5);
}

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>
#include <tuple>

#include "mfkl/builtin_models.hpp"
#include "mfkl/oracle.hpp"

using namespace mfkl;
using namespace mfkl::oracle;

namespace {

double variance(const GridDensity& g) {
  const double m = g.expect([](double x) { return x; });
  return g.expect([m](double x) { return (x - m) * (x - m); });
}

}  // namespace

TEST(FixedPoint, NoInteractionIsStandardGaussianInOneStep) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.0, 1});
  const auto res = self_consistent_fixed_point(m, default_grid(m), {1.0, 1e-12, 100});
  EXPECT_EQ(res.iterations, 1u);
  EXPECT_NEAR(variance(res.density), 1.0, 1e-6);
  EXPECT_LT(res.residual, 1e-12);
}

// Self-consistent variance 1 / (r + 2s): the mean is 0 by symmetry and
// U_mu(x) = (r/2 + s) x^2 + const.
TEST(FixedPoint, QuadraticInteractionVariance) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  const auto res = self_consistent_fixed_point(m, default_grid(m));
  EXPECT_NEAR(variance(res.density), 2.0 / 3.0, 1e-3);
  EXPECT_NEAR(variance(res.density), 2.0 / 3.0, 1e-6);
  EXPECT_LT(res.residual, 1e-8);
  EXPECT_NEAR(res.density.integral(), 1.0, 1e-12);
  // even density
  const auto& v = res.density.values;
  for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(v[j], v[v.size() - 1 - j], 1e-8);
}

TEST(FixedPoint, GridRefinement) {
  const auto m = make_builtin_model(GaussAttractRepelSpec{1.0, 0.05, 1.0, 1});
  const auto coarse = self_consistent_fixed_point(m, {-8.0, 8.0, 401, false}, {0.5, 1e-11, 100000});
  const auto fine = self_consistent_fixed_point(m, {-8.0, 8.0, 801, false}, {0.5, 1e-11, 100000});
  const auto f = [](double x) { return x * x; };
  EXPECT_LT(std::abs(coarse.density.expect(f) - fine.density.expect(f)), 1e-4);
}

TEST(FixedPoint, TorusTrig) {
  const auto m = make_builtin_model(TorusTrigSpec{0.3, 0.2, 1});
  const auto res = self_consistent_fixed_point(m, default_grid(m, 512));
  EXPECT_LT(res.residual, 1e-8);
  EXPECT_NEAR(res.density.integral(), 1.0, 1e-12);
  // a > 0 puts the mass away from x = 0, where cos(2 pi x) is largest
  EXPECT_LT(res.density.expect([](double x) { return std::cos(2 * std::numbers::pi * x); }), 0.0);
}

TEST(FixedPoint, Errors) {
  const auto m2 = make_builtin_model(QuadraticSpec{1.0, 0.25, 2});
  EXPECT_THROW(self_consistent_fixed_point(m2, {-1, 1, 11, false}), ConfigError);
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  EXPECT_THROW(self_consistent_fixed_point(m, default_grid(m), {0.0, 1e-12, 10}), ConfigError);
  try {
    self_consistent_fixed_point(m, default_grid(m), {0.5, 1e-15, 2});
    FAIL();
  } catch (const NonConvergenceError& e) {
    EXPECT_GT(e.last_residual(), 0.0);
  }
  auto nold = m;
  nold.linear_derivative = nullptr;
  EXPECT_THROW(self_consistent_fixed_point(nold, default_grid(m)), CapabilityError);
}

// N = 2 Gibbs marginal variance against inversion of the 2 x 2 precision
// matrix of U_N = (r/2)|x|^2 + (s/2N) sum_ij (x_i - x_j)^2.
TEST(SmallNGibbs, TwoParticleVarianceMatchesPrecisionInverse) {
  const double r = 1.0, s = 0.25;
  const auto m = make_builtin_model(QuadraticSpec{r, s, 1});
  const auto tab = small_n_gibbs(m, 2, {-8.0, 8.0, 801, false});
  Eigen::Matrix2d A;
  A << r + s, -s, -s, r + s;
  const Eigen::Matrix2d cov = A.inverse();
  EXPECT_NEAR(variance(tab.one_marginal), cov(0, 0), 1e-4);
  // 2/3 + 1/(3N)
  EXPECT_NEAR(cov(0, 0), 2.0 / 3.0 + 1.0 / 6.0, 1e-15);
  // covariance from the two-particle table
  double c = 0.0;
  const std::size_t n = tab.grid.n_cells;
  const double dx = tab.grid.dx();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c += tab.grid.center(i) * tab.grid.center(j) * tab.two_marginal[i * n + j];
  EXPECT_NEAR(c * dx * dx, cov(0, 1), 1e-4);
}

TEST(SmallNGibbs, SymmetricUnderAxisSwap) {
  const auto m = make_builtin_model(GaussAttractRepelSpec{1.0, 0.05, 1.0, 1});
  const auto tab = small_n_gibbs(m, 2, {-6.0, 6.0, 201, false});
  const std::size_t n = 201;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(tab.joint[i * n + j], tab.joint[j * n + i]);
}

TEST(SmallNGibbs, ThreeParticlesAndLimits) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  const auto tab = small_n_gibbs(m, 3, {-7.0, 7.0, 121, false});
  EXPECT_NEAR(tab.one_marginal.integral(), 1.0, 1e-12);
  EXPECT_NEAR(variance(tab.one_marginal), 2.0 / 3.0 + 1.0 / 9.0, 2e-3);
  EXPECT_THROW(small_n_gibbs(m, 4, {-7.0, 7.0, 11, false}), ConfigError);
  EXPECT_THROW(small_n_gibbs(m, 3, {-7.0, 7.0, 1001, false}, 1e8), ResourceError);
}

TEST(ReferenceExpectation, StandardGaussianMoments) {
  const GridSpec g{-10.0, 10.0, 4001, false};
  std::vector<double> u(g.n_cells);
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = 0.5 * g.center(j) * g.center(j);
  const auto d = GridDensity::from_potential(g, u);
  EXPECT_NEAR(reference_expectation(d, [](double x) { return x * x; }), 1.0, 1e-5);
  EXPECT_NEAR(reference_expectation(d, [](double x) { return x * x * x * x; }), 3.0, 1e-4);
  EXPECT_NEAR(reference_expectation(d, [](double x) { return x; }), 0.0, 1e-12);
}

TEST(SampleFrom, ReproducesMoments) {
  const auto m = make_builtin_model(QuadraticSpec{1.0, 0.25, 1});
  const auto res = self_consistent_fixed_point(m, default_grid(m));
  RngStream rng(3);
  const auto xs = sample_from(res.density, 100000, rng);
  double s2 = 0.0;
  for (double x : xs) s2 += x * x;
  s2 /= xs.size();
  // Var(x^2) = 2 sigma^4 for a centred Gaussian
  EXPECT_NEAR(s2, 2.0 / 3.0, 4.0 * std::sqrt(2.0 * 4.0 / 9.0 / xs.size()));
}

// Same recursion solved as a dense 4 x 4 Kronecker system.
TEST(DiscreteHarmonic, MatchesDenseLyapunovSolve) {
  for (const auto& [k, h, gamma] : {std::tuple{1.0, 0.05, 1.0}, std::tuple{1.5, 0.2, 1.0}, std::tuple{0.3, 0.1, 4.0}}) {
    const double eta = 1.0 - gamma * h;
    const double a = 1.0 - 0.5 * h * h * k;
    Eigen::Matrix2d phi;
    phi << a, h, -0.5 * h * k * (1.0 + a), a;
    const Eigen::Matrix2d M = phi * Eigen::Vector2d(1.0, eta).asDiagonal();
    const Eigen::Vector2d B = phi * Eigen::Vector2d(0.0, std::sqrt(1.0 - eta * eta));
    Eigen::Matrix4d K = Eigen::Matrix4d::Identity() - Eigen::kroneckerProduct(M, M);
    const Eigen::Matrix2d BB = B * B.transpose();
    const Eigen::Vector4d sol = K.fullPivLu().solve(Eigen::Vector4d(BB(0, 0), BB(0, 1), BB(1, 0), BB(1, 1)));
    const auto c = discrete_harmonic_covariance(k, h, gamma);
    EXPECT_NEAR(c.xx, sol(0), 1e-12);
    EXPECT_NEAR(c.xv, sol(1), 1e-12);
    EXPECT_NEAR(c.vv, sol(3), 1e-12);
  }
  EXPECT_THROW(discrete_harmonic_covariance(1.0, 1.0, 1.0), ConfigError);
}

TEST(DiscreteHarmonic, SmallStepLimitAndBiasOrder) {
  EXPECT_NEAR(discrete_harmonic_covariance(2.0, 1e-4, 1.0).xx, 0.5, 1e-7);
  const double b1 = discrete_harmonic_covariance(1.0, 0.05, 1.0).xx - 1.0;
  const double b2 = discrete_harmonic_covariance(1.0, 0.1, 1.0).xx - 1.0;
  EXPECT_NEAR(std::log2(std::abs(b2 / b1)), 2.0, 0.1);
  // quadratic model, N particles
  const double m = quadratic_discrete_second_moment(1.0, 0.25, 4, 2, 1e-4, 1.0);
  EXPECT_NEAR(m, quadratic_stationary_second_moment(1.0, 0.25, 4, 2), 1e-6);
  EXPECT_NEAR(quadratic_stationary_second_moment(1.0, 0.25, 2, 1), 2.0 / 3.0 + 1.0 / 6.0, 1e-15);
}

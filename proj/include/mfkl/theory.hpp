#ifndef MFKL_THEORY_HPP
#define MFKL_THEORY_HPP

// Closed-form constants: entropy contraction rate and bias constant, risk
// bounds, entropy comparison and defective/tight LSI constants, and the
// Lyapunov drift constants for the Euclidean and torus cases.
//
// Every expression is evaluated term by term as written, without algebraic
// simplification, so printed values can be audited against the formulas.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "mfkl/core.hpp"
#include "mfkl/model.hpp"

namespace mfkl::theory {

struct TheoryConstants {
  double gamma = 1.0;
  double a = 0.0;
  double kappa = 0.0;
  double c2 = 0.0;
  double rho = 1.0;
  double delta_n = 0.0;
  double c1_hat = 0.0;
};

/// a = gamma / (7 + 3 (gamma + 3)^2), kappa = a / (3 max(1, 1/rho) + 6a),
/// C2 = (1/kappa)(9 + 1/a) C1.
inline TheoryConstants contraction_constants(double gamma, double rho, double c1_hat, double delta_n = 0.0) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("rho must be positive");
  if (!(c1_hat >= 0.0) || !std::isfinite(c1_hat)) throw DomainError("C1 estimate must be nonnegative");
  if (!(delta_n >= 0.0) || !std::isfinite(delta_n)) throw DomainError("delta_N must be nonnegative");
  TheoryConstants tc;
  tc.gamma = gamma;
  tc.rho = rho;
  tc.c1_hat = c1_hat;
  tc.delta_n = delta_n;
  tc.a = gamma / (7.0 + 3.0 * (gamma + 3.0) * (gamma + 3.0));
  tc.kappa = tc.a / (3.0 * std::max(1.0, 1.0 / rho) + 6.0 * tc.a);
  tc.c2 = (1.0 / tc.kappa) * (9.0 + 1.0 / tc.a) * c1_hat;
  if (!(tc.kappa > 0.0 && tc.kappa < 1.0)) throw InvariantError("kappa outside (0,1)");
  return tc;
}

/// (1 + kappa h)^{-n} (H0 + 2a I0) + delta_N / rho + C2 N d^3 h^4.
inline double entropy_bound(double n, double n_particles, double d, double h, double h0, double i0,
                            const TheoryConstants& tc) {
  if (h0 < 0.0 || i0 < 0.0) throw DomainError("initial entropy and Fisher information must be >= 0");
  const double transient = std::exp(-n * std::log1p(tc.kappa * h));
  return transient * (h0 + 2.0 * tc.a * i0) + tc.delta_n / tc.rho + tc.c2 * n_particles * d * d * d * std::pow(h, 4);
}

enum class RiskMode { tv2, entropy };

/// For RiskMode::tv2, `tv` is TV(mu_inf^{2,N}, mu_*^{x2}). For
/// RiskMode::entropy, (r_entropy, eta_n) are the comparison constants.
struct RiskExtras {
  double tv = 0.0;
  double r_entropy = 1.0;
  double eta_n = 0.0;
};

/// Upper bound on the quadratic risk of the particle-average estimator,
/// given the relative entropy H(mu_n^N | mu_inf^N).
inline double risk_bounds(double f_sup, double n_particles, double h_mn, RiskMode mode, const RiskExtras& extras) {
  if (f_sup < 0.0 || n_particles <= 0.0 || h_mn < 0.0 || extras.tv < 0.0 || extras.r_entropy < 0.0 ||
      extras.eta_n < 0.0)
    throw DomainError("risk bound arguments must be nonnegative (N positive)");
  const double pre = 4.0 * f_sup * f_sup;
  if (mode == RiskMode::tv2) return pre * (1.0 / n_particles + std::sqrt(2.0 * h_mn) + extras.tv);
  return pre * (1.0 / n_particles + 2.0 * std::sqrt((extras.eta_n + extras.r_entropy * h_mn) / n_particles));
}

struct LsiConstants {
  double rho_bar = 1.0;       // LSI constant of the local Gibbs measures
  double mmm = 0.0;           // bound on the second flat-intrinsic derivative
  double eps = 0.5;           // free parameter in (0,1)
  double lambda_flat = 0.0;   // semi-convexity defect, must be < 1/2
  double alpha_n = 0.0;
  double alpha_n_prime = 0.0;
  double lambda_prime = 0.0;
  double rho_n = 1.0;         // conditional Poincare constant
};

struct LsiResult {
  double lambda_tilde = 0.0;
  double delta_n = 0.0;
  std::optional<double> rho_prime_star;
  std::string rho_prime_reason;  // why rho_prime_star is absent
  std::optional<double> rho_star;
  std::string rho_star_reason;
  double r_entropy = 1.0;
  double eta_n = 0.0;
};

inline LsiResult lsi_constants(const LsiConstants& lc, double n_particles, double d) {
  if (!(lc.rho_bar > 0.0)) throw DomainError("rho_bar must be positive");
  if (!(lc.eps > 0.0 && lc.eps < 1.0)) throw DomainError("eps must lie in (0,1)");
  if (lc.mmm < 0.0 || lc.alpha_n < 0.0 || lc.alpha_n_prime < 0.0 || lc.lambda_prime < 0.0 || lc.lambda_flat < 0.0)
    throw DomainError("LSI inputs must be nonnegative");
  if (!(lc.lambda_flat < 0.5)) throw DomainError("defective LSI constants need lambda < 1/2");
  const double M = lc.mmm;
  const double rb = lc.rho_bar;
  LsiResult out;
  out.lambda_tilde = (2.0 * M / rb) * (4.0 + 3.0 * M / (2.0 * rb * lc.eps));
  out.delta_n = 4.0 * rb * (1.0 - lc.eps) * (2.0 * lc.alpha_n + (M * d / rb) * (5.0 / 2.0 + 3.0 * M / (4.0 * rb * lc.eps)));
  const double n_threshold = out.lambda_tilde / (1.0 - 2.0 * lc.lambda_flat);
  if (n_particles > n_threshold) {
    out.rho_prime_star = 2.0 * (1.0 - lc.eps) * (1.0 - 2.0 * lc.lambda_flat - out.lambda_tilde / n_particles) * rb;
    const double gap = lc.rho_n - lc.lambda_prime - M / n_particles;
    if (gap > 0.0) {
      out.rho_star = *out.rho_prime_star / (1.0 + out.delta_n / (4.0 * gap));
    } else {
      out.rho_star_reason = "rho_N - lambda' - M/N <= 0";
    }
  } else {
    out.rho_prime_reason = "N <= lambda_tilde / (1 - 2 lambda)";
    out.rho_star_reason = out.rho_prime_reason;
  }
  out.r_entropy = 1.0 / (1.0 - lc.lambda_flat);
  out.eta_n = (lc.alpha_n + lc.alpha_n_prime) / (1.0 - lc.lambda_flat);
  return out;
}

struct EuclideanLyapunov {
  double alpha;
  double theta;
  double lambda0;
};

struct TorusLyapunov {
  /// Additive drift constant per unit N h: 766 gamma d^3 + |DF|_inf^6 / gamma^5.
  double torus_additive;
};

using LyapunovConstants = std::variant<EuclideanLyapunov, TorusLyapunov>;

inline EuclideanLyapunov euclidean_lyapunov(double gamma, double r, double c0, double c1, double n_particles) {
  if (!(gamma > 0.0) || !(r > 0.0) || !(c0 > 0.0) || !(c1 > 0.0) || !(n_particles > 0.0))
    throw DomainError("Euclidean Lyapunov constants need positive gamma, r, c0, c1, N");
  EuclideanLyapunov e{};
  e.alpha = std::min(gamma / 2.0 / (2.0 * gamma * gamma / r + 19.0 / 12.0), std::sqrt(c0 / 2.0));
  e.theta = 0.5 * std::min(e.alpha * r / (5.0 * c1), gamma);
  const double op = 1.0 + e.alpha;
  e.lambda0 = std::min({r / 3.0, 2.0 * e.alpha / 3.0, r * e.alpha * c0 * c0 / (176.0 * op * op * op),
                        (2.0 * e.theta / op) / (16.0 / (c0 * c0 * c0 * n_particles) + 2.0)});
  return e;
}

inline TorusLyapunov torus_lyapunov(double gamma, double df_sup, double d) {
  if (!(gamma > 0.0) || df_sup < 0.0 || !(d >= 1.0)) throw DomainError("torus Lyapunov constant needs gamma > 0");
  return {766.0 * gamma * d * d * d + std::pow(df_sup, 6) / std::pow(gamma, 5)};
}

inline LyapunovConstants lyapunov_constants(SpaceKind space, double gamma, const ModelCoefficients& coeffs,
                                            double n_particles) {
  if (space.is_torus()) {
    if (!coeffs.df_sup) throw CapabilityError("torus Lyapunov drift check disabled: coefficient df_sup is absent");
    return torus_lyapunov(gamma, *coeffs.df_sup, static_cast<double>(space.d));
  }
  std::string missing;
  if (!coeffs.r_conf) missing += " r_conf";
  if (!coeffs.c0) missing += " c0";
  if (!coeffs.c1) missing += " c1";
  if (!missing.empty())
    throw CapabilityError("Euclidean Lyapunov drift check disabled: missing coefficient(s)" + missing);
  return euclidean_lyapunov(gamma, *coeffs.r_conf, *coeffs.c0, *coeffs.c1, n_particles);
}

/// Relative entropy and relative Fisher information of a Gaussian product
/// initial law against the stationary law of the quadratic model.
///
/// Initial law: positions iid N(mean, sigma^2) and velocities iid
/// N(0, tau^2) in every coordinate. Target: exp(-U_N(x)) dx (x) N(0, I) dv with
/// U_N = (r/2) sum |x_i|^2 + (s/2N) sum_ij |x_i - x_j|^2, whose position
/// precision per coordinate has eigenvalue r once (mean mode) and r + 2s
/// (N - 1 times).
struct GaussianInitDivergence {
  double relative_entropy;
  double fisher_information;
};

inline GaussianInitDivergence gaussian_init_divergence(double r, double s, double n_particles, double d, double mean,
                                                       double sigma, double tau = 1.0) {
  if (!(r > 0.0) || !(r + 2.0 * s > 0.0) || !(sigma > 0.0) || !(tau > 0.0) || !(n_particles >= 1.0))
    throw DomainError("closed-form initial divergence needs r > 0, r + 2s > 0, sigma > 0, tau > 0");
  const double n = n_particles;
  const double s2 = sigma * sigma;
  const double lam_mean = r;
  const double lam_rest = r + 2.0 * s;
  // Per position coordinate: KL(N(m 1, s2 I) || N(0, A^{-1})).
  const double tr = s2 * (lam_mean + (n - 1.0) * lam_rest);
  const double quad = mean * mean * n * lam_mean;
  const double logdet = -std::log(lam_mean) - (n - 1.0) * std::log(lam_rest) - n * std::log(s2);
  const double kl_x = 0.5 * (tr + quad - n + logdet);
  const double fi_x = (lam_mean - 1.0 / s2) * (lam_mean - 1.0 / s2) * s2 +
                      (n - 1.0) * (lam_rest - 1.0 / s2) * (lam_rest - 1.0 / s2) * s2 + lam_mean * lam_mean * n * mean * mean;
  const double t2 = tau * tau;
  const double kl_v = 0.5 * n * (t2 - 1.0 - std::log(t2));
  const double fi_v = n * (1.0 - 1.0 / t2) * (1.0 - 1.0 / t2) * t2;
  return {d * (kl_x + kl_v), d * (fi_x + fi_v)};
}

}  // namespace mfkl::theory

#endif  // MFKL_THEORY_HPP

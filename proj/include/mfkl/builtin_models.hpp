#ifndef MFKL_BUILTIN_MODELS_HPP
#define MFKL_BUILTIN_MODELS_HPP

// Built-in mean-field models.
//
// Pairwise energies use F(mu) = int V dmu + 1/2 int int W(x, y) mu(dx) mu(dy),
// so DF(mu, x) = grad V(x) + int grad_x W(x, y) mu(dy). The empirical-measure
// average includes the self term j = i. On the torus, interaction partners
// are replaced by their minimal image relative to the query point.

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "mfkl/model.hpp"

namespace mfkl {

using ScalarFieldFn = std::function<double(std::span<const double>)>;
using VectorFieldFn = std::function<void(std::span<const double>, std::span<double>)>;
using KernelFn = std::function<double(std::span<const double>, std::span<const double>)>;
using KernelGradFn =
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;

/// General pairwise model given by user callbacks. grad_W is the gradient of
/// W(x, y) in its first argument; W must be symmetric.
struct PairwiseSpec {
  std::string name = "pairwise";
  SpaceKind space;
  ScalarFieldFn V;
  VectorFieldFn grad_V;
  KernelFn W;
  KernelGradFn grad_W;
  ModelCoefficients coeffs;
};

/// V = (r/2)|x|^2, W = s|x - y|^2.
struct QuadraticSpec {
  double r = 1.0;
  double s = 0.0;
  std::size_t d = 1;
};

/// V = (r/2)|x|^2, W = L exp(-|x - y|^2) + s|x - y|^2 (short-range repulsion,
/// long-range attraction).
struct GaussAttractRepelSpec {
  double L = 1.0;
  double s = 0.0;
  double r = 1.0;
  std::size_t d = 1;
};

/// Torus model V(x) = a sum_j cos(2 pi x_j), W(x - y) = b sum_j cos(2 pi (x_j - y_j)).
struct TorusTrigSpec {
  double a = 0.0;
  double b = 0.0;
  std::size_t d = 1;
};

/// Mean-field one-hidden-layer network with sigmoid units and quadratic loss
/// on a finite dataset, plus a ridge confinement (ridge/2)|theta|^2.
struct FlatConvexRegressionSpec {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
  double ridge = 1.0;
};

using ModelSpec =
    std::variant<PairwiseSpec, QuadraticSpec, GaussAttractRepelSpec, TorusTrigSpec, FlatConvexRegressionSpec>;

namespace detail {

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}

// Partner position seen from `query`: raw on R^d, minimal image on the torus.
inline void partner(const SpaceKind& space, std::span<const double> query, std::span<const double> y,
                    std::span<double> out) {
  for (std::size_t c = 0; c < y.size(); ++c)
    out[c] = space.is_torus() ? query[c] + minimal_image(y[c] - query[c]) : y[c];
}

// Coordinate-wise (1/N) sum_j of column entries, order independent.
inline std::vector<double> column_means(const Matrix& m) {
  std::vector<double> means(m.cols());
  std::vector<double> col(m.rows());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t j = 0; j < m.rows(); ++j) col[j] = m(j, c);
    means[c] = multiset_sum(col) / static_cast<double>(m.rows());
  }
  return means;
}

inline double pairwise_energy(const SpaceKind& space, const ScalarFieldFn& V, const KernelFn& W,
                              const Matrix& x) {
  const std::size_t n = x.rows();
  std::vector<double> ext(n);
  for (std::size_t i = 0; i < n; ++i) ext[i] = V(x.row(i));
  std::vector<double> inter(n * n);
  std::vector<double> y(x.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      partner(space, x.row(i), x.row(j), y);
      inter[i * n + j] = W(x.row(i), y);
    }
  const double nn = static_cast<double>(n);
  return multiset_sum(ext) / nn + 0.5 * multiset_sum(inter) / (nn * nn);
}

inline void pairwise_force(const SpaceKind& space, const VectorFieldFn& grad_V, const KernelGradFn& grad_W,
                           const Matrix& x, std::span<const double> q, std::span<double> out) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Matrix terms(n, d);
  std::vector<double> y(d);
  for (std::size_t j = 0; j < n; ++j) {
    partner(space, q, x.row(j), y);
    grad_W(q, y, terms.row(j));
  }
  grad_V(q, out);
  std::vector<double> col(n);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t j = 0; j < n; ++j) col[j] = terms(j, c);
    out[c] += multiset_sum(col) / static_cast<double>(n);
  }
}

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
  return s;
}

inline MeanFieldModel make_pairwise(const PairwiseSpec& spec) {
  spec.space.validate();
  if (!spec.V || !spec.grad_V || !spec.W || !spec.grad_W)
    throw ConfigError("pairwise model needs V, grad_V, W and grad_W");
  MeanFieldModel m;
  m.name = spec.name;
  m.space = spec.space;
  m.coeffs = spec.coeffs;
  const SpaceKind space = spec.space;
  auto gv = spec.grad_V;
  auto gw = spec.grad_W;
  m.force = [space, gv, gw](const Matrix& x, std::span<const double> q, std::span<double> out) {
    pairwise_force(space, gv, gw, x, q, out);
  };
  auto v = spec.V;
  auto w = spec.W;
  m.energy = [space, v, w](const Matrix& x) { return pairwise_energy(space, v, w, x); };
  m.external_potential = v;
  if (space.d == 1) {
    m.linear_derivative = [space, v, w](const GridDensity& mu, double x) {
      double acc = 0.0;
      for (std::size_t j = 0; j < mu.size(); ++j) {
        double y = mu.x(j);
        if (space.is_torus()) y = x + minimal_image(y - x);
        acc += w(std::span<const double>(&x, 1), std::span<const double>(&y, 1)) * mu.values[j];
      }
      return v(std::span<const double>(&x, 1)) + acc * mu.dx();
    };
  }
  return m;
}

inline ScalarFieldFn quadratic_potential(double r) {
  return [r](std::span<const double> x) { return 0.5 * r * norm2(x); };
}

inline MeanFieldModel make_quadratic(const QuadraticSpec& spec) {
  check_finite(spec.r, "quadratic r");
  check_finite(spec.s, "quadratic s");
  if (!(spec.r > 0.0)) throw ConfigError("quadratic model requires r > 0");
  if (!(spec.r + 2.0 * spec.s > 0.0)) throw ConfigError("quadratic model requires r + 2s > 0");
  const double r = spec.r;
  const double s = spec.s;
  PairwiseSpec base;
  base.name = "quadratic";
  base.space = SpaceKind::euclidean(spec.d);
  base.V = quadratic_potential(r);
  base.grad_V = [r](std::span<const double> x, std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = r * x[c];
  };
  base.W = [s](std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) acc += (x[c] - y[c]) * (x[c] - y[c]);
    return s * acc;
  };
  base.grad_W = [s](std::span<const double> x, std::span<const double> y, std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = 2.0 * s * (x[c] - y[c]);
  };
  MeanFieldModel m = make_pairwise(base);

  // Closed form DF(pi_x, q) = r q + 2s (q - mean(x)); O(N) per evaluation.
  m.force = [r, s](const Matrix& x, std::span<const double> q, std::span<double> out) {
    const auto mean = column_means(x);
    for (std::size_t c = 0; c < q.size(); ++c) out[c] = r * q[c] + 2.0 * s * (q[c] - mean[c]);
  };
  m.batch_force = [r, s](const Matrix& x, Matrix& out) {
    const auto mean = column_means(x);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) = r * x(i, c) + 2.0 * s * (x(i, c) - mean[c]);
  };
  if (spec.d == 1) {
    m.linear_derivative = [r, s](const GridDensity& mu, double x) {
      const double m1 = mu.expect([](double y) { return y; });
      const double m2 = mu.expect([](double y) { return y * y; });
      return 0.5 * r * x * x + s * (x * x - 2.0 * x * m1 + m2);
    };
  }

  ModelCoefficients& k = m.coeffs;
  const double as = std::abs(s);
  k.m1x = r + 2.0 * as;
  k.m1m = 2.0 * as;
  k.l1 = *k.m1x + *k.m1m;
  // constant Hessian: the second- and third-order remainders vanish
  k.l2 = 0.0;
  k.l3 = 0.0;
  k.m_bnd = 0.0;
  k.lambda_growth = 2.0 * as;
  k.r_conf = r;
  k.k_conf = 0.0;
  k.l_hess = r;
  k.c0 = r / 2.0;
  k.c1 = r / 2.0;
  k.r0_low = 0.0;
  k.r1_up = 0.0;
  return m;
}

inline MeanFieldModel make_gauss_attract_repel(const GaussAttractRepelSpec& spec) {
  check_finite(spec.L, "gauss_attract_repel L");
  check_finite(spec.s, "gauss_attract_repel s");
  check_finite(spec.r, "gauss_attract_repel r");
  if (!(spec.r > 0.0)) throw ConfigError("gauss_attract_repel requires r > 0");
  if (spec.L < 0.0 || spec.s < 0.0) throw ConfigError("gauss_attract_repel requires L >= 0 and s >= 0");
  const double r = spec.r;
  const double L = spec.L;
  const double s = spec.s;
  PairwiseSpec base;
  base.name = "gauss_attract_repel";
  base.space = SpaceKind::euclidean(spec.d);
  base.V = quadratic_potential(r);
  base.grad_V = [r](std::span<const double> x, std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = r * x[c];
  };
  base.W = [L, s](std::span<const double> x, std::span<const double> y) {
    double z2 = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) z2 += (x[c] - y[c]) * (x[c] - y[c]);
    return L * std::exp(-z2) + s * z2;
  };
  base.grad_W = [L, s](std::span<const double> x, std::span<const double> y, std::span<double> out) {
    double z2 = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) z2 += (x[c] - y[c]) * (x[c] - y[c]);
    const double e = std::exp(-z2);
    for (std::size_t c = 0; c < x.size(); ++c) {
      const double z = x[c] - y[c];
      out[c] = -2.0 * L * z * e + 2.0 * s * z;
    }
  };
  MeanFieldModel m = make_pairwise(base);

  ModelCoefficients& k = m.coeffs;
  // sup |grad W_1| = L sqrt(2) e^{-1/2}; sup |hess W_1| = 2L (attained at 0).
  k.m_bnd = L * std::sqrt(2.0) * std::exp(-0.5);
  k.lambda_growth = 2.0 * s;
  k.m1x = r + 2.0 * L + 2.0 * s;
  k.m1m = 2.0 * L + 2.0 * s;
  k.l1 = *k.m1x + *k.m1m;
  k.r_conf = r;
  k.k_conf = 0.0;
  k.l_hess = r;
  k.c0 = r / 2.0;
  k.c1 = r / 2.0;
  k.r0_low = 0.0;
  k.r1_up = 0.0;
  return m;
}

inline MeanFieldModel make_torus_trig(const TorusTrigSpec& spec) {
  check_finite(spec.a, "torus_trig a");
  check_finite(spec.b, "torus_trig b");
  if (spec.d < 1) throw ConfigError("torus_trig requires d >= 1");
  const double a = spec.a;
  const double b = spec.b;
  constexpr double tau = 2.0 * std::numbers::pi;

  // C_c = mean_j cos(2 pi x_jc), S_c = mean_j sin(2 pi x_jc).
  auto trig_means = [](const Matrix& x) {
    Matrix cs(x.rows(), x.cols());
    Matrix sn(x.rows(), x.cols());
    for (std::size_t j = 0; j < x.rows(); ++j)
      for (std::size_t c = 0; c < x.cols(); ++c) {
        cs(j, c) = std::cos(tau * x(j, c));
        sn(j, c) = std::sin(tau * x(j, c));
      }
    return std::pair{column_means(cs), column_means(sn)};
  };
  auto row_force = [a, b](std::span<const double> q, const std::vector<double>& C, const std::vector<double>& S,
                          std::span<double> out) {
    for (std::size_t c = 0; c < q.size(); ++c) {
      const double sq = std::sin(tau * q[c]);
      const double cq = std::cos(tau * q[c]);
      out[c] = -tau * a * sq - tau * b * (sq * C[c] - cq * S[c]);
    }
  };

  MeanFieldModel m;
  m.name = "torus_trig";
  m.space = SpaceKind::torus(spec.d);
  m.force = [trig_means, row_force](const Matrix& x, std::span<const double> q, std::span<double> out) {
    const auto [C, S] = trig_means(x);
    row_force(q, C, S, out);
  };
  m.batch_force = [trig_means, row_force](const Matrix& x, Matrix& out) {
    const auto [C, S] = trig_means(x);
    for (std::size_t i = 0; i < x.rows(); ++i) row_force(x.row(i), C, S, out.row(i));
  };
  m.external_potential = [a](std::span<const double> x) {
    double acc = 0.0;
    for (double xc : x) acc += std::cos(tau * xc);
    return a * acc;
  };
  m.energy = [a, b, trig_means](const Matrix& x) {
    const auto [C, S] = trig_means(x);
    double ext = 0.0;
    for (double v : C) ext += v;
    double inter = 0.0;
    for (std::size_t c = 0; c < C.size(); ++c) inter += C[c] * C[c] + S[c] * S[c];
    return a * ext + 0.5 * b * inter;
  };
  if (spec.d == 1) {
    m.linear_derivative = [a, b](const GridDensity& mu, double x) {
      const double C = mu.expect([](double y) { return std::cos(tau * y); });
      const double S = mu.expect([](double y) { return std::sin(tau * y); });
      return a * std::cos(tau * x) + b * (std::cos(tau * x) * C + std::sin(tau * x) * S);
    };
  }
  const double amp = std::abs(a) + std::abs(b);
  m.coeffs.df_sup = tau * amp * std::sqrt(static_cast<double>(spec.d));
  m.coeffs.m1x = tau * tau * amp;
  m.coeffs.m1m = tau * tau * std::abs(b);
  m.coeffs.l1 = *m.coeffs.m1x + *m.coeffs.m1m;
  return m;
}

inline MeanFieldModel make_flat_convex_regression(const FlatConvexRegressionSpec& spec) {
  if (spec.inputs.empty() || spec.inputs.size() != spec.targets.size())
    throw ConfigError("regression dataset needs matching, non-empty inputs and targets");
  const std::size_t d = spec.inputs.front().size();
  if (d < 1) throw ConfigError("regression inputs must have dimension >= 1");
  for (const auto& xk : spec.inputs) {
    if (xk.size() != d) throw ConfigError("regression inputs must share one dimension");
    for (double v : xk) check_finite(v, "regression input");
  }
  for (double y : spec.targets) check_finite(y, "regression target");
  check_finite(spec.ridge, "regression ridge");
  if (spec.ridge < 0.0) throw ConfigError("regression ridge must be >= 0");

  auto data = std::make_shared<const FlatConvexRegressionSpec>(spec);
  const double ridge = spec.ridge;
  const double k_count = static_cast<double>(spec.targets.size());

  // phi_k = (1/N) sum_j sigmoid(theta_j . X_k), one per data point.
  auto predictions = [data](const Matrix& theta) {
    std::vector<double> phi(data->targets.size());
    std::vector<double> terms(theta.rows());
    for (std::size_t k = 0; k < phi.size(); ++k) {
      for (std::size_t j = 0; j < theta.rows(); ++j) terms[j] = sigmoid(dot(theta.row(j), data->inputs[k]));
      phi[k] = multiset_sum(terms) / static_cast<double>(theta.rows());
    }
    return phi;
  };
  auto row_force = [data, ridge, k_count](std::span<const double> q, const std::vector<double>& phi,
                                          std::span<double> out) {
    for (std::size_t c = 0; c < q.size(); ++c) out[c] = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
      const double sg = sigmoid(dot(q, data->inputs[k]));
      const double w = (phi[k] - data->targets[k]) * sg * (1.0 - sg);
      for (std::size_t c = 0; c < q.size(); ++c) out[c] += w * data->inputs[k][c];
    }
    for (std::size_t c = 0; c < q.size(); ++c) out[c] = out[c] / k_count + ridge * q[c];
  };

  MeanFieldModel m;
  m.name = "flat_convex_regression";
  m.space = SpaceKind::euclidean(d);
  m.force = [predictions, row_force](const Matrix& x, std::span<const double> q, std::span<double> out) {
    row_force(q, predictions(x), out);
  };
  m.batch_force = [predictions, row_force](const Matrix& x, Matrix& out) {
    const auto phi = predictions(x);
    for (std::size_t i = 0; i < x.rows(); ++i) row_force(x.row(i), phi, out.row(i));
  };
  m.external_potential = quadratic_potential(ridge);
  m.energy = [data, predictions, ridge, k_count](const Matrix& x) {
    const auto phi = predictions(x);
    double loss = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) loss += 0.5 * (data->targets[k] - phi[k]) * (data->targets[k] - phi[k]);
    std::vector<double> conf(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) conf[i] = 0.5 * ridge * norm2(x.row(i));
    return loss / k_count + multiset_sum(conf) / static_cast<double>(x.rows());
  };
  if (d == 1) {
    m.linear_derivative = [data, ridge, k_count](const GridDensity& mu, double theta) {
      double acc = 0.0;
      for (std::size_t k = 0; k < data->targets.size(); ++k) {
        const double xk = data->inputs[k][0];
        const double phi = mu.expect([xk](double t) { return sigmoid(t * xk); });
        acc += (phi - data->targets[k]) * sigmoid(theta * xk);
      }
      return acc / k_count + 0.5 * ridge * theta * theta;
    };
  }
  if (ridge > 0.0) {
    m.coeffs.r_conf = ridge;
    m.coeffs.c0 = ridge / 2.0;
    m.coeffs.c1 = ridge / 2.0;
    m.coeffs.l_hess = ridge;
    m.coeffs.k_conf = 0.0;
    m.coeffs.r0_low = 0.0;
    m.coeffs.r1_up = 0.0;
  }
  return m;
}

}  // namespace detail

/// Model whose force is identically zero (free flight).
inline MeanFieldModel zero_force_model(SpaceKind space) {
  space.validate();
  MeanFieldModel m;
  m.name = "zero";
  m.space = space;
  m.force = [](const Matrix&, std::span<const double>, std::span<double> out) {
    for (double& o : out) o = 0.0;
  };
  m.energy = [](const Matrix&) { return 0.0; };
  m.external_potential = [](std::span<const double>) { return 0.0; };
  if (space.d == 1) m.linear_derivative = [](const GridDensity&, double) { return 0.0; };
  m.coeffs.df_sup = 0.0;
  m.coeffs.m1x = 0.0;
  m.coeffs.m1m = 0.0;
  m.coeffs.l1 = 0.0;
  m.coeffs.l2 = 0.0;
  m.coeffs.l3 = 0.0;
  return m;
}

inline MeanFieldModel make_builtin_model(const ModelSpec& spec) {
  MeanFieldModel m = std::visit(
      [](const auto& s) -> MeanFieldModel {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PairwiseSpec>) return detail::make_pairwise(s);
        else if constexpr (std::is_same_v<T, QuadraticSpec>) return detail::make_quadratic(s);
        else if constexpr (std::is_same_v<T, GaussAttractRepelSpec>) return detail::make_gauss_attract_repel(s);
        else if constexpr (std::is_same_v<T, TorusTrigSpec>) return detail::make_torus_trig(s);
        else return detail::make_flat_convex_regression(s);
      },
      spec);
  m.coeffs.validate();
  return m;
}

}  // namespace mfkl

#endif  // MFKL_BUILTIN_MODELS_HPP

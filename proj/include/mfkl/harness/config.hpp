#ifndef MFKL_HARNESS_CONFIG_HPP
#define MFKL_HARNESS_CONFIG_HPP

// Strict experiment configuration. Every read goes through a FieldReader that
// knows its JSON path, records the resolved value (defaults included) into
// the config echo, and rejects keys nobody asked for.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mfkl/builtin_models.hpp"
#include "mfkl/chain.hpp"
#include "mfkl/harness/io.hpp"
#include "mfkl/theory.hpp"

namespace mfkl::harness {

inline const std::array<const char*, 8> kKinds = {"sample",         "sweep_h", "sweep_N",   "converge",
                                                  "lyapunov_check", "oracle",  "constants", "risk"};

inline bool is_kind(const std::string& k) {
  for (const char* s : kKinds)
    if (k == s) return true;
  return false;
}

class FieldReader {
 public:
  FieldReader(const Json& in, Json& echo, std::string path) : in_(in), echo_(echo), path_(std::move(path)) {
    if (!in_.is_object()) fail("expected an object");
    echo_ = Json::object();
  }

  ~FieldReader() = default;
  FieldReader(const FieldReader&) = delete;
  FieldReader& operator=(const FieldReader&) = delete;

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(at(key) + ": " + msg);
  }

  bool has(const std::string& key) const { return in_.contains(key); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    if (!in_.contains(key)) fail(key, "required field is missing");
    return in_.at(key);
  }

  double number(const std::string& key) { return store(key, as_number(key, raw(key))); }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : store(key, fallback);
  }
  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  double positive(const std::string& key) {
    const double v = number(key);
    if (!(v > 0.0)) fail(key, "must be > 0");
    return v;
  }
  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(key, "must be > 0");
    return v;
  }
  double nonneg(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) fail(key, "must be >= 0");
    return v;
  }

  std::uint64_t unsigned_int(const std::string& key) {
    const Json& j = raw(key);
    if (!is_nonneg_integer(j)) fail(key, "expected a nonnegative integer");
    const auto v = j.get<std::uint64_t>();
    echo_[key] = v;
    return v;
  }
  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
    if (has(key)) return unsigned_int(key);
    echo_[key] = fallback;
    return fallback;
  }
  std::size_t count(const std::string& key, std::size_t min_value = 1) {
    const auto v = unsigned_int(key);
    if (v < min_value) fail(key, "must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(v);
  }
  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min_value) {
    const auto v = unsigned_int(key, fallback);
    if (v < min_value) fail(key, "must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) {
      echo_[key] = fallback;
      return fallback;
    }
    const Json& j = raw(key);
    if (!j.is_boolean()) fail(key, "expected true or false");
    echo_[key] = j.get<bool>();
    return j.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& j = raw(key);
    if (!j.is_string()) fail(key, "expected a string");
    echo_[key] = j.get<std::string>();
    return j.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (has(key)) return string(key);
    echo_[key] = fallback;
    return fallback;
  }
  std::string choice(const std::string& key, std::initializer_list<const char*> options,
                     std::optional<std::string> fallback = std::nullopt) {
    const std::string v = (fallback && !has(key)) ? string(key, *fallback) : string(key);
    for (const char* o : options)
      if (v == o) return v;
    std::string list;
    for (const char* o : options) list += std::string(list.empty() ? "" : ", ") + o;
    fail(key, "unknown value '" + v + "' (expected one of: " + list + ")");
  }

  std::vector<double> numbers(const std::string& key, std::size_t min_len = 1) {
    const Json& j = raw(key);
    if (!j.is_array()) fail(key, "expected an array of numbers");
    if (j.size() < min_len) fail(key, "needs at least " + std::to_string(min_len) + " entries");
    std::vector<double> out;
    Json arr = Json::array();
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(as_number(key + "[" + std::to_string(i) + "]", j[i]));
      arr.push_back(json_number(out.back()));
    }
    echo_[key] = arr;
    return out;
  }
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    if (has(key)) return numbers(key, 1);
    Json arr = Json::array();
    for (double v : fallback) arr.push_back(json_number(v));
    echo_[key] = arr;
    return fallback;
  }
  std::vector<std::size_t> counts(const std::string& key, std::size_t min_value = 1) {
    const Json& j = raw(key);
    if (!j.is_array() || j.empty()) fail(key, "expected a non-empty array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!is_nonneg_integer(j[i]) || j[i].get<std::uint64_t>() < min_value)
        fail(key + "[" + std::to_string(i) + "]", "expected an integer >= " + std::to_string(min_value));
      out.push_back(j[i].get<std::size_t>());
    }
    echo_[key] = j;
    return out;
  }

  /// Nested object reader; `fn` parses it and the echo lands under `key`.
  template <class Fn>
  void object(const std::string& key, Fn&& fn) {
    const Json& j = raw(key);
    Json sub;
    {
      FieldReader r(j, sub, at(key));
      fn(r);
      r.finish();
    }
    echo_[key] = std::move(sub);
  }
  /// Same, parsing an empty object when the key is absent.
  template <class Fn>
  void object_or_empty(const std::string& key, Fn&& fn) {
    if (has(key)) return object(key, std::forward<Fn>(fn));
    const Json empty = Json::object();
    Json sub;
    {
      FieldReader r(empty, sub, at(key));
      fn(r);
      r.finish();
    }
    echo_[key] = std::move(sub);
  }

  void ignore(const std::string& key) { seen_.insert(key); }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown field");
  }

 private:
  static bool is_nonneg_integer(const Json& j) {
    return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
  }

  double as_number(const std::string& key, const Json& j) const {
    if (!j.is_number()) fail(key, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(key, "must be finite");
    return v;
  }
  double store(const std::string& key, double v) {
    echo_[key] = json_number(v);
    return v;
  }

  const Json& in_;
  Json& echo_;
  std::string path_;
  std::set<std::string> seen_;
};

// ---------------------------------------------------------------- options

/// Reference value of an expectation: the self-consistent fixed point
/// ("oracle"), the exact small-N stationary law ("gibbs"), or a number.
struct ReferenceSpec {
  std::string mode = "oracle";
  double value = 0.0;
};

struct SampleOptions {
  std::size_t stride = 1;
};

struct SweepHOptions {
  std::vector<double> h_values;
  std::string observable = "x2";
  std::size_t n_steps = 0;   // per h
  std::size_t burn_in = 0;   // steps discarded before averaging
  std::size_t batches = 20;  // batch means for the standard error
  ReferenceSpec reference;
  std::string slope_source = "monte_carlo";  // or "exact_discrete"
  double gate_lo = 1.5;
  double gate_hi = 2.5;
};

struct SweepNOptions {
  std::vector<std::size_t> n_values;
  std::size_t reps = 64;
  std::string observable = "x2_clamped";
  ReferenceSpec reference;
  double gap_sigmas = 2.0;
};

struct ConvergeOptions {
  std::size_t reps = 256;
  std::size_t n_bins = 50;
  std::size_t stride = 1;
  double range_sigmas = 8.0;  // histogram range: oracle mean +- range_sigmas * oracle sd
  double rho = 1.0;           // LSI constant fed to the rate bound
  double floor_factor = 2.0;
  double rate_slack = 0.02;
  double r2_min = 0.9;
};

struct LyapunovCheckOptions {
  std::vector<double> h_values;
  std::size_t n_states = 100;
  std::size_t m_draws = 10000;
  double position_scale = 1.0;
  double velocity_scale = 1.0;
  std::array<double, 2> scale_range{0.5, 5.0};  // Euclidean slope test state scales
  std::optional<double> euclidean_constant;
};

struct OracleOptions {
  std::optional<double> lo, hi;
  std::size_t n_cells = 2001;
  double beta = 0.5;
  double tol = 1e-12;
  std::size_t max_iter = 100000;
};

struct C1EstimateOptions {
  std::size_t n_steps = 100000;
  std::size_t window = 100;
};

struct ConstantsOptions {
  double rho = 1.0;
  std::optional<double> c1_hat;                  // given directly
  std::optional<C1EstimateOptions> c1_estimate;  // or estimated from a run
  std::optional<double> delta_n;                 // default: from lsi when present, else 0
  std::optional<double> h0, i0;                  // default: closed form for quadratic + gaussian init
  std::optional<double> f_sup;
  double tv = 0.0;
  std::optional<theory::LsiConstants> lsi;
};

struct RiskOptions {
  std::size_t reps = 64;
  std::string observable = "x2_clamped";
  ReferenceSpec reference;
};

struct ExperimentConfig {
  std::string kind;
  std::string model_variant;
  ModelSpec model_spec;
  SpaceKind space;
  std::size_t n_particles = 1;
  ChainParams chain;
  PositionLaw init;
  ModelCoefficients coefficient_overrides;
  std::string output_dir;

  SampleOptions sample;
  SweepHOptions sweep_h;
  SweepNOptions sweep_n;
  ConvergeOptions converge;
  LyapunovCheckOptions lyapunov_check;
  OracleOptions oracle;
  ConstantsOptions constants;
  RiskOptions risk;

  Json resolved;  // full resolved config, echoed into every output
};

// ---------------------------------------------------------------- parsing

namespace detail {

inline ReferenceSpec parse_reference(FieldReader& r, const std::string& key) {
  ReferenceSpec ref;
  if (r.has(key) && r.raw(key).is_number()) {
    ref.mode = "value";
    ref.value = r.number(key);
    return ref;
  }
  ref.mode = r.choice(key, {"oracle", "gibbs"}, std::string("oracle"));
  return ref;
}

inline const char* kObservables[] = {"x", "x2", "x2_clamped", "cos2pi", "tanh"};

inline std::string parse_observable(FieldReader& r, const std::string& key, const std::string& fallback) {
  return r.choice(key, {"x", "x2", "x2_clamped", "cos2pi", "tanh"}, fallback);
}

inline ModelSpec parse_model(FieldReader& r, SpaceKind space, std::string& variant) {
  variant = r.choice("variant", {"quadratic", "gauss_attract_repel", "torus_trig", "flat_convex_regression"});
  const bool want_torus = variant == "torus_trig";
  if (want_torus != space.is_torus())
    r.fail("variant", "model '" + variant + "' needs space.kind = " + (want_torus ? "torus" : "euclidean"));
  if (variant == "quadratic") return QuadraticSpec{r.positive("r"), r.number("s", 0.0), space.d};
  if (variant == "gauss_attract_repel")
    return GaussAttractRepelSpec{r.nonneg("L", 1.0), r.nonneg("s", 0.0), r.positive("r", 1.0), space.d};
  if (variant == "torus_trig") return TorusTrigSpec{r.number("a"), r.number("b"), space.d};
  FlatConvexRegressionSpec reg;
  const Json& inputs = r.raw("inputs");
  if (!inputs.is_array() || inputs.empty()) r.fail("inputs", "expected a non-empty array of points");
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Json& p = inputs[k];
    const std::string at = "inputs[" + std::to_string(k) + "]";
    if (!p.is_array() || p.size() != space.d) r.fail(at, "expected an array of length d = " + std::to_string(space.d));
    std::vector<double> x;
    for (const auto& v : p) {
      if (!v.is_number()) r.fail(at, "expected numbers");
      x.push_back(v.get<double>());
    }
    reg.inputs.push_back(std::move(x));
  }
  reg.targets = r.numbers("targets");
  if (reg.targets.size() != reg.inputs.size()) r.fail("targets", "needs one target per input");
  reg.ridge = r.nonneg("ridge", 0.0);
  return reg;
}

inline void parse_coefficients(FieldReader& r, ModelCoefficients& c) {
  const std::pair<const char*, std::optional<double> ModelCoefficients::*> fields[] = {
      {"m1x", &ModelCoefficients::m1x},       {"m1m", &ModelCoefficients::m1m},
      {"l1", &ModelCoefficients::l1},         {"l2", &ModelCoefficients::l2},
      {"l3", &ModelCoefficients::l3},         {"df_sup", &ModelCoefficients::df_sup},
      {"m_bnd", &ModelCoefficients::m_bnd},   {"lambda_growth", &ModelCoefficients::lambda_growth},
      {"r_conf", &ModelCoefficients::r_conf}, {"k_conf", &ModelCoefficients::k_conf},
      {"l_hess", &ModelCoefficients::l_hess}, {"c0", &ModelCoefficients::c0},
      {"c1", &ModelCoefficients::c1},         {"r0_low", &ModelCoefficients::r0_low},
      {"r1_up", &ModelCoefficients::r1_up}};
  for (const auto& [name, member] : fields) {
    if (!r.has(name)) continue;
    const double v = r.number(name);
    if (v < 0.0) r.fail(name, "must be >= 0");
    c.*member = v;
  }
}

inline PositionLaw parse_init(FieldReader& r, SpaceKind space) {
  const std::string law = r.choice("law", {"point", "gaussian", "uniform"});
  if (law == "point") {
    const auto x0 = r.numbers("x0");
    if (x0.size() != 1 && x0.size() != space.d) r.fail("x0", "expected length 1 or d");
    return PointMass{x0};
  }
  if (law == "gaussian") {
    GaussianLaw g;
    g.mean = r.number("mean", 0.0);
    g.sigma = r.nonneg("sigma", 1.0);
    g.wrap = r.boolean("wrap", space.is_torus());
    if (space.is_torus() && !g.wrap) r.fail("wrap", "must be true on the torus");
    return g;
  }
  if (!space.is_torus()) r.fail("law", "'uniform' is only defined on the torus");
  return UniformTorus{};
}

}  // namespace detail

/// Parses and validates a configuration. `cli_kind` (may be empty) must
/// agree with the config's own "kind" when both are given.
inline ExperimentConfig parse_config(const Json& j, const std::string& cli_kind) {
  ExperimentConfig cfg;
  FieldReader r(j, cfg.resolved, "config");

  if (r.has("kind")) {
    cfg.kind = r.string("kind");
    if (!cli_kind.empty() && cli_kind != cfg.kind)
      r.fail("kind", "config is for '" + cfg.kind + "' but the command asked for '" + cli_kind + "'");
  } else {
    if (cli_kind.empty()) r.fail("kind", "required field is missing");
    cfg.kind = cli_kind;
    cfg.resolved["kind"] = cli_kind;
  }
  if (!is_kind(cfg.kind)) r.fail("kind", "unknown experiment kind '" + cfg.kind + "'");

  r.object("space", [&](FieldReader& s) {
    const std::string k = s.choice("kind", {"euclidean", "torus"});
    const std::size_t d = s.count("d", 1, 1);
    cfg.space = k == "torus" ? SpaceKind::torus(d) : SpaceKind::euclidean(d);
  });
  r.object("model", [&](FieldReader& m) { cfg.model_spec = detail::parse_model(m, cfg.space, cfg.model_variant); });
  r.object_or_empty("coefficients", [&](FieldReader& c) { detail::parse_coefficients(c, cfg.coefficient_overrides); });
  cfg.n_particles = r.count("N", 1);
  r.object("chain", [&](FieldReader& c) {
    cfg.chain.h = c.positive("h");
    cfg.chain.gamma = c.positive("gamma", 1.0);
    cfg.chain.n_steps = c.count("n_steps", 0, 0);
    cfg.chain.master_seed = c.unsigned_int("seed", 0);
    if (!(cfg.chain.gamma * cfg.chain.h < 1.0)) c.fail("h", "need h < 1/gamma");
  });
  r.object_or_empty("init", [&](FieldReader& i) {
    if (!i.has("law")) {
      // default: uniform on the torus, standard Gaussian on R^d
      const Json fallback = cfg.space.is_torus() ? Json{{"law", "uniform"}} : Json{{"law", "gaussian"}};
      Json echo;
      FieldReader inner(fallback, echo, i.path());
      cfg.init = detail::parse_init(inner, cfg.space);
      i.string("law", echo["law"].get<std::string>());
      return;
    }
    cfg.init = detail::parse_init(i, cfg.space);
  });
  cfg.output_dir = r.string("output_dir", "results/" + cfg.kind);

  const std::string& kind = cfg.kind;
  auto section_required = [&](const char* name) {
    if (!r.has(name)) r.fail(name, std::string("required for kind '") + kind + "'");
  };
  // sections of other kinds are rejected by finish()
  if (kind == "sample") {
    r.object_or_empty("sample", [&](FieldReader& s) { cfg.sample.stride = s.count("stride", 1, 1); });
  } else if (kind == "sweep_h") {
    section_required("sweep_h");
    r.object("sweep_h", [&](FieldReader& s) {
      auto& o = cfg.sweep_h;
      o.h_values = s.numbers("h_values", 2);
      for (double h : o.h_values)
        if (!(h > 0.0 && h * cfg.chain.gamma < 1.0)) s.fail("h_values", "every h must satisfy 0 < h < 1/gamma");
      o.observable = detail::parse_observable(s, "observable", "x2");
      o.n_steps = s.count("n_steps", cfg.chain.n_steps, 1);
      o.burn_in = s.count("burn_in", o.n_steps / 10, 0);
      if (o.burn_in >= o.n_steps) s.fail("burn_in", "must be smaller than n_steps");
      o.batches = s.count("batches", 20, 2);
      o.reference = detail::parse_reference(s, "reference");
      o.slope_source = s.choice("slope_source", {"monte_carlo", "exact_discrete"}, std::string("monte_carlo"));
      const auto gate = s.numbers("gate", std::vector<double>{1.5, 2.5});
      if (gate.size() != 2 || !(gate[0] <= gate[1])) s.fail("gate", "expected [lo, hi] with lo <= hi");
      o.gate_lo = gate[0];
      o.gate_hi = gate[1];
    });
  } else if (kind == "sweep_N") {
    section_required("sweep_N");
    r.object("sweep_N", [&](FieldReader& s) {
      auto& o = cfg.sweep_n;
      o.n_values = s.counts("N_values", 1);
      if (o.n_values.size() < 2) s.fail("N_values", "needs at least two values");
      o.reps = s.count("reps", 64, 8);
      o.observable = detail::parse_observable(s, "observable", "x2_clamped");
      o.reference = detail::parse_reference(s, "reference");
      o.gap_sigmas = s.nonneg("gap_sigmas", 2.0);
    });
  } else if (kind == "converge") {
    r.object_or_empty("converge", [&](FieldReader& s) {
      auto& o = cfg.converge;
      o.reps = s.count("reps", 256, 1);
      o.n_bins = s.count("n_bins", 50, 10);
      o.stride = s.count("stride", 1, 1);
      o.range_sigmas = s.positive("range_sigmas", 8.0);
      o.rho = s.positive("rho", 1.0);
      o.floor_factor = s.positive("floor_factor", 2.0);
      o.rate_slack = s.nonneg("rate_slack", 0.02);
      o.r2_min = s.number("r2_min", 0.9);
    });
  } else if (kind == "lyapunov_check") {
    section_required("lyapunov_check");
    r.object("lyapunov_check", [&](FieldReader& s) {
      auto& o = cfg.lyapunov_check;
      o.h_values = s.numbers("h_values", 1);
      for (double h : o.h_values)
        if (!(h > 0.0 && h * cfg.chain.gamma < 1.0)) s.fail("h_values", "every h must satisfy 0 < h < 1/gamma");
      o.n_states = s.count("n_states", 100, 3);
      o.m_draws = s.count("m_draws", 10000, 1000);
      o.position_scale = s.positive("position_scale", 1.0);
      o.velocity_scale = s.positive("velocity_scale", 1.0);
      const auto sr = s.numbers("scale_range", std::vector<double>{0.5, 5.0});
      if (sr.size() != 2 || !(sr[0] > 0.0 && sr[0] < sr[1])) s.fail("scale_range", "expected [lo, hi] with 0 < lo < hi");
      o.scale_range = {sr[0], sr[1]};
      o.euclidean_constant = s.optional_number("euclidean_constant");
    });
  } else if (kind == "oracle") {
    r.object_or_empty("oracle", [&](FieldReader& s) {
      auto& o = cfg.oracle;
      o.lo = s.optional_number("lo");
      o.hi = s.optional_number("hi");
      if (o.lo.has_value() != o.hi.has_value()) s.fail("lo", "give both lo and hi or neither");
      if (o.lo && !(*o.lo < *o.hi)) s.fail("hi", "must exceed lo");
      o.n_cells = s.count("n_cells", 2001, 3);
      o.beta = s.positive("beta", 0.5);
      if (o.beta > 1.0) s.fail("beta", "must lie in (0, 1]");
      o.tol = s.positive("tol", 1e-12);
      o.max_iter = s.count("max_iter", 100000, 1);
    });
  } else if (kind == "constants") {
    r.object_or_empty("constants", [&](FieldReader& s) {
      auto& o = cfg.constants;
      o.rho = s.positive("rho", 1.0);
      if (s.has("c1_hat") && s.raw("c1_hat").is_object()) {
        s.object("c1_hat", [&](FieldReader& c) {
          C1EstimateOptions e;
          e.n_steps = c.count("n_steps", 100000, 1);
          e.window = c.count("window", 100, 1);
          if (e.window > e.n_steps) c.fail("window", "must not exceed n_steps");
          o.c1_estimate = e;
        });
      } else if (s.has("c1_hat")) {
        o.c1_hat = s.number("c1_hat");
        if (*o.c1_hat < 0.0) s.fail("c1_hat", "must be >= 0");
      }
      o.delta_n = s.optional_number("delta_n");
      o.h0 = s.optional_number("H0");
      o.i0 = s.optional_number("I0");
      o.f_sup = s.optional_number("f_sup");
      o.tv = s.nonneg("tv", 0.0);
      if (s.has("lsi")) {
        s.object("lsi", [&](FieldReader& l) {
          theory::LsiConstants lc;
          lc.rho_bar = l.positive("rho_bar", 1.0);
          lc.mmm = l.nonneg("M", 0.0);
          lc.eps = l.positive("eps", 0.5);
          lc.lambda_flat = l.nonneg("lambda", 0.0);
          lc.alpha_n = l.nonneg("alpha_N", 0.0);
          lc.alpha_n_prime = l.nonneg("alpha_N_prime", 0.0);
          lc.lambda_prime = l.nonneg("lambda_prime", 0.0);
          lc.rho_n = l.positive("rho_N", 1.0);
          o.lsi = lc;
        });
      }
    });
  } else if (kind == "risk") {
    r.object_or_empty("risk", [&](FieldReader& s) {
      auto& o = cfg.risk;
      o.reps = s.count("reps", 64, 8);
      o.observable = detail::parse_observable(s, "observable", "x2_clamped");
      o.reference = detail::parse_reference(s, "reference");
    });
  }
  r.finish();
  return cfg;
}

/// Builds the model with coefficient overrides applied on top of the
/// built-in declarations.
inline MeanFieldModel build_model(const ExperimentConfig& cfg) {
  MeanFieldModel m = make_builtin_model(cfg.model_spec);
  const auto& o = cfg.coefficient_overrides;
  auto apply = [](std::optional<double>& dst, const std::optional<double>& src) {
    if (src) dst = src;
  };
  apply(m.coeffs.m1x, o.m1x);
  apply(m.coeffs.m1m, o.m1m);
  apply(m.coeffs.l1, o.l1);
  apply(m.coeffs.l2, o.l2);
  apply(m.coeffs.l3, o.l3);
  apply(m.coeffs.df_sup, o.df_sup);
  apply(m.coeffs.m_bnd, o.m_bnd);
  apply(m.coeffs.lambda_growth, o.lambda_growth);
  apply(m.coeffs.r_conf, o.r_conf);
  apply(m.coeffs.k_conf, o.k_conf);
  apply(m.coeffs.l_hess, o.l_hess);
  apply(m.coeffs.c0, o.c0);
  apply(m.coeffs.c1, o.c1);
  apply(m.coeffs.r0_low, o.r0_low);
  apply(m.coeffs.r1_up, o.r1_up);
  try {
    m.coeffs.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.coefficients: ") + e.what());
  }
  return m;
}

}  // namespace mfkl::harness

#endif  // MFKL_HARNESS_CONFIG_HPP

#pragma once

#include <optional>
#include <string>

#include "icpm/io.hpp"
#include "icpm/models.hpp"
#include "icpm/poincare.hpp"
#include "icpm/reduction.hpp"

namespace icpm {

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorCode::config_error, where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) { known = true; break; }
    if (!known)
      fail(ErrorCode::config_error, "unknown key '" + item.key() + "' in " + where);
  }
}

inline double get_number(const json& obj, const char* key, double def, const std::string& where,
                         bool must_be_positive = false) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number())
    fail(ErrorCode::config_error, where + "." + key + " must be a number");
  const double v = obj[key].get<double>();
  if (must_be_positive && !(v > 0.0))
    fail(ErrorCode::config_error, where + "." + key + " must be positive");
  return v;
}

/// A weight/gain specification: scalar (multiple of identity), flat array
/// (diagonal) or nested array (full matrix).
inline Mat materialize_matrix(const json& spec, int size, const std::string& where) {
  if (spec.is_number()) return spec.get<double>() * Mat::Identity(size, size);
  if (spec.is_array() && !spec.empty() && spec[0].is_number()) {
    if (static_cast<int>(spec.size()) != size)
      fail(ErrorCode::config_error, where + ": diagonal length mismatch");
    Mat m = Mat::Zero(size, size);
    for (int i = 0; i < size; ++i) m(i, i) = spec[i].get<double>();
    return m;
  }
  if (spec.is_array()) {
    Mat m = matrix_from_json(spec);
    if (m.rows() != size || m.cols() != size)
      fail(ErrorCode::config_error, where + ": matrix size mismatch");
    return m;
  }
  fail(ErrorCode::config_error, where + " must be a scalar, diagonal list or matrix");
}

}  // namespace detail

/// Parsed and validated experiment description. Unknown keys anywhere are
/// rejected; tolerances must be positive.
struct ExperimentConfig {
  nlohmann::json raw;  // as provided, for hashing
  std::string model = "cart-pendulum";
  nlohmann::json params;         // per-model overrides
  nlohmann::json vhc;            // slope(s), kp, kd
  nlohmann::json orbit;          // anchor or energy
  nlohmann::json section;        // q2_star, direction
  nlohmann::json impulse;        // mode, mu, lambda, eps3
  nlohmann::json lqr;            // q_weight, r_weight
  nlohmann::json reduction;      // quad_tol, domain, orbit_samples
  nlohmann::json phase_portrait; // q2 / q2d grids
  IntegratorOptions integrator;
  double eps1 = 1e-5, eps2 = 1e-5;
  bool central = false;
  double t_end = 30.0;
  std::optional<Vec> x0_natural;
  double output_dt = 0.01;
  double divergence_bound = 10.0;
  std::string output_dir = "out";
  unsigned long seed = 0;

  /// Fingerprint of the experiment itself; the output location is excluded
  /// so reruns into different directories stay byte-identical.
  std::string hash() const {
    nlohmann::json j = raw;
    j.erase("output_dir");
    return hash_hex(fnv1a(j.dump()));
  }
};

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_number;
  ExperimentConfig c;
  c.raw = j;
  check_keys(j, "config",
             {"model", "params", "vhc", "orbit", "section", "impulse", "lqr", "integrator",
              "linearization", "simulation", "reduction", "phase_portrait", "output_dir", "seed"});

  if (j.contains("model")) {
    if (!j["model"].is_string()) fail(ErrorCode::config_error, "model must be a string");
    c.model = j["model"].get<std::string>();
    if (c.model != "cart-pendulum" && c.model != "tiptoebot")
      fail(ErrorCode::config_error, "unknown model '" + c.model + "'");
  }

  if (j.contains("params")) {
    c.params = j["params"];
    if (c.model == "cart-pendulum")
      check_keys(c.params, "params", {"cart_mass", "pendulum_mass", "length", "gravity"});
    else
      check_keys(c.params, "params", {"alpha", "beta"});
  }

  if (j.contains("vhc")) {
    c.vhc = j["vhc"];
    check_keys(c.vhc, "vhc", {"slope", "slopes", "kp", "kd"});
  }

  if (j.contains("orbit")) {
    c.orbit = j["orbit"];
    check_keys(c.orbit, "orbit", {"anchor", "energy"});
    if (c.orbit.contains("anchor") && c.orbit.contains("energy"))
      fail(ErrorCode::config_error, "orbit: give either anchor or energy, not both");
    if (c.orbit.contains("anchor") &&
        (!c.orbit["anchor"].is_array() || c.orbit["anchor"].size() != 2))
      fail(ErrorCode::config_error, "orbit.anchor must be [q2, q2d]");
  }

  if (j.contains("section")) {
    c.section = j["section"];
    check_keys(c.section, "section", {"q2_star", "direction"});
    if (c.section.contains("direction")) {
      const int d = c.section["direction"].get<int>();
      if (d != 1 && d != -1) fail(ErrorCode::config_error, "section.direction must be +1 or -1");
    }
  }

  if (j.contains("impulse")) {
    c.impulse = j["impulse"];
    check_keys(c.impulse, "impulse", {"mode", "mu", "lambda", "eps3"});
    if (c.impulse.contains("mode")) {
      const std::string m = c.impulse["mode"].get<std::string>();
      if (m != "jump" && m != "high-gain")
        fail(ErrorCode::config_error, "impulse.mode must be 'jump' or 'high-gain'");
    }
    get_number(c.impulse, "mu", 0.005, "impulse", true);
    get_number(c.impulse, "eps3", 1e-4, "impulse", true);
  }

  if (j.contains("lqr")) {
    c.lqr = j["lqr"];
    check_keys(c.lqr, "lqr", {"q_weight", "r_weight"});
  }

  if (j.contains("integrator")) {
    const auto& ji = j["integrator"];
    check_keys(ji, "integrator", {"rel_tol", "abs_tol", "max_step"});
    c.integrator.rel_tol = get_number(ji, "rel_tol", c.integrator.rel_tol, "integrator", true);
    c.integrator.abs_tol = get_number(ji, "abs_tol", c.integrator.abs_tol, "integrator", true);
    c.integrator.max_step = get_number(ji, "max_step", c.integrator.max_step, "integrator", true);
  }

  if (j.contains("linearization")) {
    const auto& jl = j["linearization"];
    check_keys(jl, "linearization", {"eps1", "eps2", "central"});
    c.eps1 = get_number(jl, "eps1", c.eps1, "linearization", true);
    c.eps2 = get_number(jl, "eps2", c.eps2, "linearization", true);
    if (jl.contains("central")) c.central = jl["central"].get<bool>();
  }

  if (j.contains("simulation")) {
    const auto& js = j["simulation"];
    check_keys(js, "simulation", {"t_end", "x0", "output_dt", "divergence_bound"});
    c.t_end = get_number(js, "t_end", c.t_end, "simulation", true);
    c.output_dt = get_number(js, "output_dt", c.output_dt, "simulation", true);
    c.divergence_bound =
        get_number(js, "divergence_bound", c.divergence_bound, "simulation", true);
    if (js.contains("x0")) {
      if (!js["x0"].is_array()) fail(ErrorCode::config_error, "simulation.x0 must be an array");
      Vec x0(js["x0"].size());
      for (size_t i = 0; i < js["x0"].size(); ++i) x0(i) = js["x0"][i].get<double>();
      c.x0_natural = x0;
    }
  }

  if (j.contains("reduction")) {
    c.reduction = j["reduction"];
    check_keys(c.reduction, "reduction", {"quad_tol", "domain", "orbit_samples"});
    get_number(c.reduction, "quad_tol", 1e-10, "reduction", true);
  }

  if (j.contains("phase_portrait")) {
    c.phase_portrait = j["phase_portrait"];
    check_keys(c.phase_portrait, "phase_portrait", {"q2", "q2d"});
    for (const char* axis : {"q2", "q2d"}) {
      if (!c.phase_portrait.contains(axis)) continue;
      const auto& a = c.phase_portrait[axis];
      if (!a.is_array() || a.size() != 3)
        fail(ErrorCode::config_error, std::string("phase_portrait.") + axis +
                                          " must be [min, max, count]");
      if (a[2].get<double>() < 0)
        fail(ErrorCode::config_error, std::string("phase_portrait.") + axis +
                                          " count must be non-negative");
    }
  }

  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("seed")) c.seed = j["seed"].get<unsigned long>();
  return c;
}

/// Everything an experiment needs, with config overrides applied.
struct Experiment {
  ExperimentConfig cfg;
  ModelBundle model;
  ReducedSystem reduced;
  OrbitSpec orbit;
  Mat q_weight, r_weight;
  ImpulseParams impulse;
  LinearizeOptions lin;
  SimulateOptions sim;  // energy_ref is wired to `reduced` by simulate_options()
  int orbit_samples = 2000;
  std::optional<Vec> x0_internal;

  SimulateOptions simulate_options() const {
    SimulateOptions o = sim;
    o.energy_ref = &reduced;
    o.orbit_samples = orbit_samples;
    return o;
  }
};

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  using detail::get_number;
  ModelBundle model;
  if (cfg.model == "cart-pendulum") {
    CartPendulumParams p;
    if (!cfg.params.is_null()) {
      p.cart_mass = get_number(cfg.params, "cart_mass", p.cart_mass, "params", true);
      p.pendulum_mass = get_number(cfg.params, "pendulum_mass", p.pendulum_mass, "params", true);
      p.length = get_number(cfg.params, "length", p.length, "params", true);
      p.gravity = get_number(cfg.params, "gravity", p.gravity, "params", true);
    }
    if (!cfg.vhc.is_null() && cfg.vhc.contains("slope"))
      p.vhc_slope = cfg.vhc["slope"].get<double>();
    if (!cfg.vhc.is_null() && cfg.vhc.contains("slopes"))
      fail(ErrorCode::config_error, "vhc.slopes does not apply to the cart-pendulum");
    if (!cfg.vhc.is_null() && cfg.vhc.contains("kp"))
      p.kp = detail::materialize_matrix(cfg.vhc["kp"], 1, "vhc.kp");
    if (!cfg.vhc.is_null() && cfg.vhc.contains("kd"))
      p.kd = detail::materialize_matrix(cfg.vhc["kd"], 1, "vhc.kd");
    model = cart_pendulum(p);
  } else {
    TiptoebotParams p;
    if (!cfg.params.is_null()) {
      if (cfg.params.contains("alpha")) {
        const auto& a = cfg.params["alpha"];
        if (!a.is_array() || a.size() != 6)
          fail(ErrorCode::config_error, "params.alpha must have 6 entries");
        for (int i = 0; i < 6; ++i) p.alpha[i] = a[i].get<double>();
      }
      if (cfg.params.contains("beta")) {
        const auto& b = cfg.params["beta"];
        if (!b.is_array() || b.size() != 3)
          fail(ErrorCode::config_error, "params.beta must have 3 entries");
        for (int i = 0; i < 3; ++i) p.beta[i] = b[i].get<double>();
      }
    }
    if (!cfg.vhc.is_null() && cfg.vhc.contains("slope"))
      fail(ErrorCode::config_error, "vhc.slope does not apply to the tiptoebot");
    if (!cfg.vhc.is_null() && cfg.vhc.contains("slopes")) {
      const auto& s = cfg.vhc["slopes"];
      if (!s.is_array() || s.size() != 2)
        fail(ErrorCode::config_error, "vhc.slopes must be [a1, a2]");
      p.vhc_a1 = s[0].get<double>();
      p.vhc_a2 = s[1].get<double>();
    }
    if (!cfg.vhc.is_null() && cfg.vhc.contains("kp"))
      p.kp = detail::materialize_matrix(cfg.vhc["kp"], 2, "vhc.kp");
    if (!cfg.vhc.is_null() && cfg.vhc.contains("kd"))
      p.kd = detail::materialize_matrix(cfg.vhc["kd"], 2, "vhc.kd");
    model = tiptoebot(p);
  }

  if (!cfg.section.is_null()) {
    model.section.q2_star = get_number(cfg.section, "q2_star", model.section.q2_star, "section");
    if (cfg.section.contains("direction"))
      model.section.direction = cfg.section["direction"].get<int>();
  }

  Experiment ex;
  ex.cfg = cfg;

  ReducedSystem::Options ro;
  ro.domain_lo = model.reduced_domain_lo;
  ro.domain_hi = model.reduced_domain_hi;
  if (!cfg.reduction.is_null()) {
    ro.quad_tol = get_number(cfg.reduction, "quad_tol", ro.quad_tol, "reduction", true);
    if (cfg.reduction.contains("domain")) {
      const auto& d = cfg.reduction["domain"];
      if (!d.is_array() || d.size() != 2)
        fail(ErrorCode::config_error, "reduction.domain must be [lo, hi]");
      ro.domain_lo = d[0].get<double>();
      ro.domain_hi = d[1].get<double>();
    }
    if (cfg.reduction.contains("orbit_samples"))
      ex.orbit_samples = cfg.reduction["orbit_samples"].get<int>();
    if (ex.orbit_samples < 16)
      fail(ErrorCode::config_error, "reduction.orbit_samples must be at least 16");
  }
  ex.reduced = ReducedSystem::build(model.system, model.vhc, ro);

  double anchor_q2 = model.anchor_q2, anchor_q2d = model.anchor_q2d;
  if (!cfg.orbit.is_null() && cfg.orbit.contains("anchor")) {
    anchor_q2 = cfg.orbit["anchor"][0].get<double>();
    anchor_q2d = cfg.orbit["anchor"][1].get<double>();
    ex.orbit = orbit_from_anchor(ex.reduced, anchor_q2, anchor_q2d);
  } else if (!cfg.orbit.is_null() && cfg.orbit.contains("energy")) {
    const double cd = cfg.orbit["energy"].get<double>();
    const double surplus = cd - ex.reduced.potential(model.section.q2_star);
    if (surplus <= 0.0)
      fail(ErrorCode::config_error, "orbit.energy level does not reach the section");
    const double q2d = model.section.direction *
                       std::sqrt(2.0 * surplus / ex.reduced.mass(model.section.q2_star));
    ex.orbit = orbit_from_anchor(ex.reduced, model.section.q2_star, q2d);
  } else {
    ex.orbit = orbit_from_anchor(ex.reduced, anchor_q2, anchor_q2d);
  }

  const int d = 2 * model.n() - 1;
  const int m = model.n() - 1;
  ex.q_weight = Mat::Identity(d, d);
  ex.r_weight = Mat::Identity(m, m);
  if (!cfg.lqr.is_null()) {
    if (cfg.lqr.contains("q_weight"))
      ex.q_weight = detail::materialize_matrix(cfg.lqr["q_weight"], d, "lqr.q_weight");
    if (cfg.lqr.contains("r_weight"))
      ex.r_weight = detail::materialize_matrix(cfg.lqr["r_weight"], m, "lqr.r_weight");
  }

  ex.impulse.mode = ImpulseMode::high_gain;
  ex.impulse.lambda_diag = Vec::Ones(m);
  if (!cfg.impulse.is_null()) {
    if (cfg.impulse.contains("mode"))
      ex.impulse.mode = (cfg.impulse["mode"].get<std::string>() == "jump") ? ImpulseMode::jump
                                                                           : ImpulseMode::high_gain;
    ex.impulse.mu = get_number(cfg.impulse, "mu", ex.impulse.mu, "impulse", true);
    ex.impulse.eps3 = get_number(cfg.impulse, "eps3", ex.impulse.eps3, "impulse", true);
    if (cfg.impulse.contains("lambda")) {
      const auto& l = cfg.impulse["lambda"];
      if (l.is_number()) {
        ex.impulse.lambda_diag = Vec::Constant(m, l.get<double>());
      } else if (l.is_array() && static_cast<int>(l.size()) == m) {
        for (int i = 0; i < m; ++i) ex.impulse.lambda_diag(i) = l[i].get<double>();
      } else {
        fail(ErrorCode::config_error, "impulse.lambda must be a scalar or a length n-1 list");
      }
    }
    if (ex.impulse.lambda_diag.minCoeff() <= 0.0)
      fail(ErrorCode::config_error, "impulse.lambda entries must be positive");
  }

  ex.lin.eps1 = cfg.eps1;
  ex.lin.eps2 = cfg.eps2;
  ex.lin.central = cfg.central;
  ex.lin.map.sim.integrator = cfg.integrator;

  ex.sim.arc.integrator = cfg.integrator;
  ex.sim.output_dt = cfg.output_dt;
  ex.sim.divergence_bound = cfg.divergence_bound;

  if (cfg.x0_natural) {
    if (cfg.x0_natural->size() != 2 * model.n())
      fail(ErrorCode::config_error, "simulation.x0 must have 2n entries");
    ex.x0_internal = model.state_from_natural(*cfg.x0_natural);
  }

  ex.model = std::move(model);
  return ex;
}

}  // namespace icpm

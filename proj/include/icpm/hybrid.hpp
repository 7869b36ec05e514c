#pragma once

#include <optional>
#include <sstream>
#include <vector>

#include "icpm/ode.hpp"
#include "icpm/reduction.hpp"
#include "icpm/vhc.hpp"

namespace icpm {

/// Poincare section q2 = q2_star with a sign constraint on q2d at crossing.
/// direction = +1 requires q2d >= 0 (default), -1 requires q2d <= 0.
struct SectionSpec {
  double q2_star = 0.0;
  int direction = +1;
};

struct Crossing {
  double t = 0.0;
  Vec x;
};

struct SimOptions {
  IntegratorOptions integrator;
  double event_value_tol = 1e-10;  // |q2 - q2*| at the refined crossing
  double rearm_band = 1e-3;        // rad; crossing detection re-arms outside this band
  int scan_subdivisions = 8;       // dense-output samples per accepted step
  double tol_reg = kDefaultRegularityTol;
};

namespace detail {

struct ArcResult {
  bool crossed = false;
  double t = 0.0;
  Vec x;  // crossing state, or the state at the time horizon
};

/// Observer invoked with the dense interpolant over each accepted step.
using SpanObserver =
    std::function<void(double t_lo, double t_hi, const std::function<Vec(double)>&)>;

/// Integrate a field from (t0, x0) watching for a section crossing of the
/// passive coordinate. An initial point inside the re-arm band does not
/// count; detection arms once the trajectory leaves the band.
inline ArcResult integrate_arc(const std::function<Vec(const Vec&)>& field, int n,
                               const SectionSpec& section, const Vec& x0, double t0,
                               double t_limit, const SimOptions& opt,
                               const SpanObserver* observer = nullptr) {
  const int qi = n - 1;       // passive position index
  const int vi = 2 * n - 1;   // passive velocity index
  auto gap = [&](const Vec& x) { return wrap_angle(x(qi) - section.q2_star); };

  DenseSolver solver(field, opt.integrator);
  solver.initialize(x0, t0);

  bool armed = std::abs(gap(x0)) > opt.rearm_band;
  double g_prev = gap(x0);
  double t_prev = t0;

  while (solver.time() < t_limit) {
    auto [a, b] = solver.step();
    const double scan_hi = std::min(b, t_limit);
    if (observer) {
      auto interp = [&](double t) { return solver.state_at(t); };
      (*observer)(a, scan_hi, interp);
    }
    const int k = opt.scan_subdivisions;
    for (int j = 1; j <= k; ++j) {
      const double t_cur = a + (scan_hi - a) * j / k;
      if (t_cur <= t_prev) continue;
      const double g_cur = gap(solver.state_at(t_cur));
      if (!armed) {
        if (std::abs(g_cur) > opt.rearm_band) armed = true;
        t_prev = t_cur;
        g_prev = g_cur;
        continue;
      }
      const bool up = g_prev < 0.0 && g_cur >= 0.0;
      const bool down = g_prev > 0.0 && g_cur <= 0.0;
      const bool wanted = (section.direction >= 0) ? up : down;
      // sign flips across the +/- pi seam are jumps, not crossings
      const bool genuine = std::abs(g_prev) < 0.5 * M_PI && std::abs(g_cur) < 0.5 * M_PI;
      if (wanted && genuine) {
        auto g_of_t = [&](double t) { return gap(solver.state_at(t)); };
        const double tc = refine_root(g_of_t, t_prev, t_cur, opt.event_value_tol);
        Vec xc = solver.state_at(tc);
        if (xc(vi) * section.direction >= 0.0) {
          ArcResult r;
          r.crossed = true;
          r.t = tc;
          r.x = std::move(xc);
          return r;
        }
      }
      t_prev = t_cur;
      g_prev = g_cur;
    }
    if (b >= t_limit) break;
  }
  ArcResult r;
  r.crossed = false;
  r.t = t_limit;
  r.x = (solver.time() >= t_limit) ? solver.state_at(t_limit) : solver.state();
  return r;
}

}  // namespace detail

/// Flow the VHC-controlled closed loop from x0 until the next section
/// crossing. An initial state on the section does not count; the map
/// semantics return the *next* crossing. Empty result if t_max elapses first.
inline std::optional<Crossing> integrate_to_section(const MechanicalSystem& sys,
                                                    const VhcSpec& vhc, const SectionSpec& section,
                                                    const Vec& x0, double t_max,
                                                    const SimOptions& opt = {}) {
  auto field = closed_loop_field(sys, vhc, opt.tol_reg);
  detail::ArcResult r = detail::integrate_arc(field, sys.n, section, x0, 0.0, t_max, opt);
  if (!r.crossed) return std::nullopt;
  return Crossing{r.t, r.x};
}

/// Velocity jump produced by a generalized impulse on the active joints:
/// qd+ = qd- + M(q)^{-1} [impulse; 0]. Positions are unchanged.
inline Vec apply_impulse_jump(const MechanicalSystem& sys, const Vec& q, const Vec& qd_minus,
                              const Vec& impulse) {
  Mat m = sys.mass_matrix(q);
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) fail(ErrorCode::model_error, "mass matrix not SPD");
  Vec rhs = Vec::Zero(sys.n);
  rhs.head(sys.n - 1) = impulse;
  return qd_minus + llt.solve(rhs);
}

struct BurstResult {
  Vec x;
  double duration = 0.0;
};

/// Continuous realization of an impulsive input: high-gain feedback drives
/// the active velocities to qd1_des within O(mu) time, on top of the VHC
/// controller. Terminates once ||qd1_des - qd1|| < eps3.
inline BurstResult high_gain_burst(const MechanicalSystem& sys, const VhcSpec& vhc, const Vec& x0,
                                   const Vec& qd1_des, const Vec& lambda_diag, double mu,
                                   double eps3 = 1e-4, const SimOptions& opt = {}) {
  if (!(mu > 0.0)) fail(ErrorCode::invalid_input, "mu must be positive");
  if (lambda_diag.minCoeff() <= 0.0) fail(ErrorCode::invalid_input, "Lambda must be positive");
  const int n = sys.n;
  auto err = [&](const Vec& x) { return (qd1_des - x.segment(n, n - 1)).norm(); };
  if (err(x0) < eps3) return {x0, 0.0};

  auto field = [&](const Vec& x) {
    Vec q = x.head(n);
    Vec qd = x.tail(n);
    Vec uc = vhc_controller(sys, vhc, q, qd, opt.tol_reg);
    DynamicsTerms t = dynamics_terms(sys, q, qd);
    Vec abar = t.drift_active + t.gain_active * uc;
    Vec rhs = lambda_diag.cwiseProduct(qd1_des - qd.head(n - 1)) / mu - abar;
    Vec uhg = t.gain_active.llt().solve(rhs);
    Vec dx(2 * n);
    dx.head(n) = qd;
    dx.tail(n) = forward_accel(sys, q, qd, uc + uhg);
    return dx;
  };

  const double t_cap = 100.0 * mu / lambda_diag.minCoeff();
  IntegratorOptions burst_integ = opt.integrator;
  burst_integ.max_step = std::max(mu / 4.0, 1e-7);
  burst_integ.init_step = std::max(mu / 20.0, 1e-9);

  DenseSolver solver(field, burst_integ);
  solver.initialize(x0, 0.0);
  double t_prev = 0.0;
  while (solver.time() < t_cap) {
    auto [a, b] = solver.step();
    (void)a;
    if (err(solver.state()) < eps3) {
      auto g = [&](double t) { return err(solver.state_at(t)) - eps3; };
      const double tc = refine_root(g, t_prev, b, 1e-12);
      return {solver.state_at(tc), tc};
    }
    t_prev = b;
  }
  fail(ErrorCode::convergence_failure, "high-gain burst did not reach the velocity target");
}

enum class ImpulseMode { jump, high_gain };

struct ImpulseParams {
  ImpulseMode mode = ImpulseMode::jump;
  Vec lambda_diag;      // high-gain only
  double mu = 0.005;    // high-gain only
  double eps3 = 1e-4;   // high-gain only
};

struct ImpulseEvent {
  int k = 0;
  double t = 0.0;
  Vec z_minus;
  Vec z_plus;
  Vec impulse;  // applied impulse (after any feasibility clamp)
  ImpulseMode mode = ImpulseMode::jump;
  bool clamped = false;
  double burst_duration = 0.0;
};

struct CrossingRecord {
  int k = 0;
  double t = 0.0;
  Vec z;
};

// event_flag values in trajectory samples
inline constexpr int kSamplePlain = 0;
inline constexpr int kSampleCrossing = 1;      // at a section crossing, pre-impulse
inline constexpr int kSamplePostImpulse = 2;   // immediately after a velocity jump
inline constexpr int kSampleBurstEnd = 3;      // end of a high-gain burst

struct TrajectorySample {
  double t = 0.0;
  Vec x;
  Vec rho;
  double energy = 0.0;
  int event_flag = kSamplePlain;
};

struct HybridTrajectory {
  std::vector<TrajectorySample> samples;
  std::vector<CrossingRecord> crossings;
  std::vector<ImpulseEvent> events;
  bool diverged = false;
  double t_final = 0.0;
};

struct SimulateOptions {
  SimOptions arc;
  double output_dt = 0.01;
  double divergence_bound = 10.0;
  const ReducedSystem* energy_ref = nullptr;  // reduced energy diagnostic if set
  int orbit_samples = 2000;                   // kept here for config round-tripping
};

inline Vec section_state_of(int n, const Vec& x) {
  Vec z(2 * n - 1);
  z.head(n - 1) = x.head(n - 1);
  z.segment(n - 1, n - 1) = x.segment(n, n - 1);
  z(2 * n - 2) = x(2 * n - 1);
  return z;
}

inline Vec lift_section_state(int n, const Vec& z, double q2_star) {
  Vec x(2 * n);
  x.head(n - 1) = z.head(n - 1);
  x(n - 1) = q2_star;
  x.segment(n, n - 1) = z.segment(n - 1, n - 1);
  x(2 * n - 1) = z(2 * n - 2);
  return x;
}

namespace detail {

inline double diag_energy(const MechanicalSystem& sys, const SimulateOptions& opt, const Vec& x) {
  auto [q, qd] = sys.split_state(x);
  if (opt.energy_ref) return opt.energy_ref->energy(q(sys.n - 1), qd(sys.n - 1));
  return mechanical_energy(sys, q, qd);
}

inline void push_sample(HybridTrajectory& out, const MechanicalSystem& sys, const VhcSpec& vhc,
                        const SimulateOptions& opt, double t, const Vec& x, int flag) {
  TrajectorySample s;
  s.t = t;
  s.x = x;
  s.rho = rho(vhc, x.head(sys.n));
  s.energy = diag_energy(sys, opt, x);
  s.event_flag = flag;
  out.samples.push_back(std::move(s));
}

}  // namespace detail

/// Closed-loop hybrid simulation: flow under the VHC controller, fire the
/// discrete impulse I(k) = K e(k) at every section crossing, realized either
/// as an instantaneous jump or as a high-gain burst. Results accumulate into
/// `out` so partial trajectories survive thrown errors.
///
/// Crossing numbering: an initial state already on the section fires as
/// k = 0; crossings detected by the flow are numbered from k = 1.
inline void simulate_closed_loop(const MechanicalSystem& sys, const VhcSpec& vhc,
                                 const SectionSpec& section, const Mat& gain, const Vec& z_star,
                                 const Vec& x0, double t_end, const ImpulseParams& imp,
                                 const SimulateOptions& opt, HybridTrajectory& out) {
  const int n = sys.n;
  auto field = closed_loop_field(sys, vhc, opt.arc.tol_reg);

  double t = 0.0;
  Vec x = x0;
  int next_k = 1;
  double next_sample_t = 0.0;

  detail::push_sample(out, sys, vhc, opt, t, x, kSamplePlain);
  next_sample_t = opt.output_dt;

  auto fire = [&](int k, double tk, Vec& state) {
    const Vec z_minus = section_state_of(n, state);
    out.crossings.push_back({k, tk, z_minus});
    const Vec e = z_minus - z_star;
    if (e.norm() > opt.divergence_bound) {
      out.diverged = true;
      out.t_final = tk;
      std::ostringstream os;
      os << "||e(" << k << ")|| = " << e.norm() << " exceeds divergence bound "
         << opt.divergence_bound;
      fail(ErrorCode::orbit_escape, os.str());
    }
    Vec impulse = gain * e;

    auto [q, qd] = sys.split_state(state);
    Vec rhs = Vec::Zero(n);
    rhs.head(n - 1) = impulse;
    Vec dqd = sys.mass_matrix(q).llt().solve(rhs);
    bool clamped = false;
    const double v_after = (qd(n - 1) + dqd(n - 1)) * section.direction;
    if (v_after < 0.0) {
      // scale the impulse back along the impulse manifold until the
      // post-impulse state stays on the section
      const double s = -qd(n - 1) * section.direction / (dqd(n - 1) * section.direction);
      impulse *= s;
      dqd *= s;
      clamped = true;
    }

    ImpulseEvent ev;
    ev.k = k;
    ev.t = tk;
    ev.z_minus = z_minus;
    ev.impulse = impulse;
    ev.mode = imp.mode;
    ev.clamped = clamped;

    detail::push_sample(out, sys, vhc, opt, tk, state, kSampleCrossing);
    if (imp.mode == ImpulseMode::jump) {
      state.tail(n) = qd + dqd;
      ev.z_plus = section_state_of(n, state);
      detail::push_sample(out, sys, vhc, opt, tk, state, kSamplePostImpulse);
    } else {
      const Vec qd1_des = qd.head(n - 1) + dqd.head(n - 1);
      BurstResult burst =
          high_gain_burst(sys, vhc, state, qd1_des, imp.lambda_diag, imp.mu, imp.eps3, opt.arc);
      state = burst.x;
      t += burst.duration;
      ev.burst_duration = burst.duration;
      ev.z_plus = section_state_of(n, state);
      detail::push_sample(out, sys, vhc, opt, t, state, kSampleBurstEnd);
    }
    out.events.push_back(std::move(ev));
  };

  // a run seeded from a section state counts as crossing k = 0
  if (std::abs(wrap_angle(x(n - 1) - section.q2_star)) < 1e-9 &&
      x(2 * n - 1) * section.direction >= 0.0) {
    fire(0, 0.0, x);
  }

  while (t < t_end) {
    detail::SpanObserver observer = [&](double lo, double hi,
                                        const std::function<Vec(double)>& interp) {
      while (next_sample_t <= hi + 1e-15) {
        if (next_sample_t >= lo - 1e-15 && next_sample_t > t - 1e-15)
          detail::push_sample(out, sys, vhc, opt, next_sample_t, interp(next_sample_t),
                              kSamplePlain);
        next_sample_t += opt.output_dt;
      }
    };
    detail::ArcResult arc =
        detail::integrate_arc(field, n, section, x, t, t_end, opt.arc, &observer);
    if (!arc.crossed) {
      t = arc.t;
      x = arc.x;
      break;
    }
    t = arc.t;
    x = arc.x;
    // drop grid samples that the observer emitted past the crossing
    while (!out.samples.empty() && out.samples.back().event_flag == kSamplePlain &&
           out.samples.back().t > t)
      out.samples.pop_back();
    next_sample_t = std::ceil((t - 1e-15) / opt.output_dt) * opt.output_dt;
    if (next_sample_t <= t) next_sample_t += opt.output_dt;
    fire(next_k++, t, x);
  }

  detail::push_sample(out, sys, vhc, opt, t, x, kSamplePlain);
  out.t_final = t;
}

inline HybridTrajectory simulate_closed_loop(const MechanicalSystem& sys, const VhcSpec& vhc,
                                             const SectionSpec& section, const Mat& gain,
                                             const Vec& z_star, const Vec& x0, double t_end,
                                             const ImpulseParams& imp,
                                             const SimulateOptions& opt = {}) {
  HybridTrajectory out;
  simulate_closed_loop(sys, vhc, section, gain, z_star, x0, t_end, imp, opt, out);
  return out;
}

}  // namespace icpm

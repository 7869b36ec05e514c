#pragma once

#include <map>
#include <random>
#include <sstream>

#include "icpm/design.hpp"
#include "icpm/models.hpp"

namespace icpm::verification {

/// Reference design data for the two bundled models, used as regression
/// targets by the verification suite. Section states in this layout list the
/// active positions first and order the velocities passive-first, which is
/// how the tiptoebot values were originally reported; the cart-pendulum
/// layout coincides with the internal one.
namespace reference {

inline Mat cart_A() {
  Mat a(3, 3);
  a << 0.115, 0.435, 0.600, -0.510, -0.640, -2.465, -0.145, 0.215, 1.325;
  return a;
}

inline Mat cart_B() {
  Mat b(3, 1);
  b << -0.06, 1.80, -1.09;
  return b;
}

inline Mat cart_K() {
  Mat k(1, 3);
  k << 0.163, 0.288, 1.198;
  return k;
}

inline Eigen::VectorXcd cart_closed_loop_eigs() {
  Eigen::VectorXcd e(3);
  e << std::complex<double>(0.13, 0.0), std::complex<double>(-0.06, 0.48),
      std::complex<double>(-0.06, -0.48);
  return e;
}

inline Mat tiptoebot_A() {
  Mat a(5, 5);
  a << -0.380, -0.080, 1.530, 0.800, 0.050,
       0.000, -0.460, -0.080, -0.003, 0.730,
       1.230, 1.890, 6.120, 2.770, 4.050,
       -3.210, -3.770, -13.360, -6.090, -8.100,
       0.120, -0.560, 0.670, 0.280, 0.100;
  return a;
}

inline Mat tiptoebot_B() {
  Mat b(5, 2);
  b << 1.525, 4.875, -3.700, -8.650, -17.700, 22.650, 34.325, -43.850, 0.875, -0.325;
  return b;
}

inline Mat tiptoebot_K() {
  Mat k(2, 5);
  k << 0.028, 0.024, 0.197, 0.094, 0.138, -0.034, -0.051, 0.116, -0.049, -0.055;
  return k;
}

inline Eigen::VectorXcd tiptoebot_closed_loop_eigs() {
  Eigen::VectorXcd e(5);
  e << std::complex<double>(0.14, 0.0), std::complex<double>(-0.47, 0.73),
      std::complex<double>(-0.47, -0.73), std::complex<double>(-0.12, 0.56),
      std::complex<double>(-0.12, -0.56);
  return e;
}

/// Index map from the internal section-state ordering (q1, q1d, q2d) to the
/// reported tiptoebot ordering (q1, q2d, q1d).
inline std::vector<int> tiptoebot_layout() { return {0, 1, 4, 2, 3}; }

inline Mat to_tiptoebot_layout(const Mat& a_internal) {
  const auto p = tiptoebot_layout();
  Mat out(5, a_internal.cols() == 5 ? 5 : a_internal.cols());
  if (a_internal.cols() == 5) {
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) out(i, j) = a_internal(p[i], p[j]);
  } else {
    for (int i = 0; i < 5; ++i) out.row(i) = a_internal.row(p[i]);
  }
  return out;
}

}  // namespace reference

struct CriterionResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

/// Greedy modulus-distance matching between computed and expected spectra.
inline double max_eig_distance(const Eigen::VectorXcd& computed, const Eigen::VectorXcd& expected) {
  std::vector<bool> used(computed.size(), false);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < expected.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (Eigen::Index j = 0; j < computed.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(computed(j) - expected(i));
      if (d < best) { best = d; arg = static_cast<int>(j); }
    }
    if (arg >= 0) used[arg] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

struct EntryDiff {
  double worst_abs = 0.0;
  int row = 0, col = 0;
  bool within = true;
};

inline EntryDiff compare_entrywise(const Mat& got, const Mat& ref, double abs_tol,
                                   double rel_tol = 0.0) {
  EntryDiff d;
  for (int i = 0; i < ref.rows(); ++i)
    for (int j = 0; j < ref.cols(); ++j) {
      const double diff = std::abs(got(i, j) - ref(i, j));
      const double tol = std::max(abs_tol, rel_tol * std::abs(ref(i, j)));
      if (diff > d.worst_abs) { d.worst_abs = diff; d.row = i; d.col = j; }
      if (diff > tol) d.within = false;
    }
  return d;
}

/// Dense-grid sampling of the pure VHC closed loop (no impulses).
inline std::vector<Vec> sample_closed_loop(const ModelBundle& model, const Vec& x0, double t_end,
                                           double dt, const IntegratorOptions& integ = {}) {
  auto field = closed_loop_field(model.system, model.vhc);
  DenseSolver solver(field, integ);
  solver.initialize(x0, 0.0);
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(t_end / dt) + 2);
  double next = 0.0;
  while (solver.time() < t_end) {
    auto [a, b] = solver.step();
    while (next <= b && next <= t_end) {
      out.push_back(solver.state_at(next));
      next += dt;
    }
    if (b >= t_end) break;
  }
  return out;
}

/// Largest norm of rho'' + kd rho' + kp rho measured along a pure
/// closed-loop trajectory. rho and rho' are read off the sampled states;
/// rho'' comes from one central difference of the rho' series, which keeps
/// the dense-output interpolation noise out of the second derivative.
inline double max_vhc_residual(const ModelBundle& model, const Vec& x0, double t_end) {
  const double dt = 1e-3;
  auto states = sample_closed_loop(model, x0, t_end, dt);
  const int n = model.n();
  std::vector<Vec> rhos, rho_dots;
  rhos.reserve(states.size());
  rho_dots.reserve(states.size());
  for (const auto& x : states) {
    rhos.push_back(rho(model.vhc, x.head(n)));
    rho_dots.push_back(rho_dot(model.vhc, x.head(n), x.tail(n)));
  }
  double worst = 0.0;
  for (size_t i = 1; i + 1 < rhos.size(); ++i) {
    Vec rdd = (rho_dots[i + 1] - rho_dots[i - 1]) / (2.0 * dt);
    worst = std::max(worst, (rdd + model.vhc.kd * rho_dots[i] + model.vhc.kp * rhos[i]).norm());
  }
  return worst;
}

}  // namespace detail

/// Lazily-computed shared artifacts for the verification criteria.
class Suite {
 public:
  explicit Suite(unsigned seed = 0) : seed_(seed) {}

  // -- shared artifacts ------------------------------------------------

  struct ModelDesign {
    ModelBundle model;
    ReducedSystem reduced;
    OrbitSpec orbit;
    DesignOutput design;
  };

  const ModelDesign& tiptoebot_design() {
    if (!tb_) tb_ = make_design(tiptoebot());
    return *tb_;
  }

  const ModelDesign& cart_design(double gravity) {
    auto it = cart_.find(gravity);
    if (it == cart_.end()) {
      CartPendulumParams p;
      p.gravity = gravity;
      it = cart_.emplace(gravity, make_design(cart_pendulum(p))).first;
    }
    return it->second;
  }

  double cart_gravity_winner() {
    run_cart_comparison();
    return g_winner_;
  }

  // -- criteria ---------------------------------------------------------

  CriterionResult c1_tiptoebot_A() {
    const auto& d = tiptoebot_design();
    const Mat got = reference::to_tiptoebot_layout(d.design.lin.A);
    auto diff = detail::compare_entrywise(got, reference::tiptoebot_A(), 0.05);
    CriterionResult r{"C1", "tiptoebot A-matrix reproduction", diff.within,
                      "max|dA| = " + detail::fmt(diff.worst_abs) + " at (" +
                          std::to_string(diff.row) + "," + std::to_string(diff.col) +
                          "), tolerance 0.05"};
    return r;
  }

  CriterionResult c2_tiptoebot_B() {
    const auto& d = tiptoebot_design();
    const Mat got = reference::to_tiptoebot_layout(d.design.lin.B);
    auto diff = detail::compare_entrywise(got, reference::tiptoebot_B(), 0.1, 0.02);
    return {"C2", "tiptoebot B-matrix reproduction", diff.within,
            "max|dB| = " + detail::fmt(diff.worst_abs) + " at (" + std::to_string(diff.row) +
                "," + std::to_string(diff.col) + "), tolerance max(0.1, 2%)"};
  }

  CriterionResult c3_reference_spectra() {
    const CertifyReport tb =
        certify(reference::tiptoebot_A(), reference::tiptoebot_B(), reference::tiptoebot_K());
    const double dtb = detail::max_eig_distance(tb.eigenvalues,
                                                reference::tiptoebot_closed_loop_eigs());
    const CertifyReport cp = certify(reference::cart_A(), reference::cart_B(), reference::cart_K());
    const double dcp = detail::max_eig_distance(cp.eigenvalues, reference::cart_closed_loop_eigs());
    const bool pass = dtb <= 0.05 && dcp <= 0.05;
    return {"C3", "closed-loop spectra with reference gains", pass,
            "cart max eig distance = " + detail::fmt(dcp) + ", tiptoebot = " + detail::fmt(dtb) +
                ", tolerance 0.05"};
  }

  CriterionResult c4_cart_AB_gravity() {
    run_cart_comparison();
    std::ostringstream os;
    os.precision(4);
    bool any = false;
    for (const auto& [g, res] : cart_cmp_) {
      os << "g=" << g << ": max|dA|=" << res.first << ", max|dB|=" << res.second << "; ";
      const bool a_ok = res.first <= 0.05;
      // B tolerance handled entrywise during the comparison
      any = any || (a_ok && cart_b_within_.at(g));
    }
    os << "winner g=" << g_winner_;
    return {"C4", "cart-pendulum A,B reproduction over gravity candidates", any, os.str()};
  }

  CriterionResult c5_cart_convergence() {
    const HybridTrajectory& traj = cart_fig5_trajectory();
    const auto& d = cart_design(cart_gravity_winner());
    OrbitSampler sampler(d.reduced, d.model.vhc, d.model.n(), d.orbit, 2000);
    double worst = 0.0;
    for (const auto& s : traj.samples)
      if (s.t >= 12.0) worst = std::max(worst, sampler.distance(s.x));
    return {"C5", "cart-pendulum converges from the reference initial state", worst < 0.05,
            "max dist(x, orbit) for t >= 12 s: " + detail::fmt(worst) + ", tolerance 0.05"};
  }

  CriterionResult c6_cart_origin() {
    const HybridTrajectory& traj = cart_origin_trajectory();
    const auto& d = cart_design(cart_gravity_winner());
    OrbitSampler sampler(d.reduced, d.model.vhc, d.model.n(), d.orbit, 2000);
    const int n = d.model.n();
    double theta_max = 0.0;
    for (const auto& s : traj.samples)
      theta_max = std::max(theta_max, std::abs(wrap_angle(s.x(n - 1))));
    // earliest time after which the distance stays below threshold
    double t_conv = std::numeric_limits<double>::infinity();
    for (auto it = traj.samples.rbegin(); it != traj.samples.rend(); ++it) {
      if (it->event_flag != kSamplePlain) continue;
      if (sampler.distance(it->x) < 0.05) t_conv = it->t;
      else break;
    }
    const bool pass = t_conv <= 54.0 && theta_max < 0.61;
    return {"C6", "cart-pendulum converges from the origin with the pendulum inside the regular cone",
            pass,
            "converged (and stayed) from t = " + detail::fmt(t_conv) +
                " s of 60 s, max|theta| = " + detail::fmt(theta_max) + " (< 0.61 required)"};
  }

  CriterionResult c7_tiptoebot_convergence() {
    const auto& d = tiptoebot_design();
    Vec x0_nat(6);
    x0_nat << -0.1, 0.2, 0.05, 3.3, -6.0, 0.4;
    ImpulseParams imp;
    imp.mode = ImpulseMode::jump;
    SimulateOptions so;
    so.energy_ref = &d.reduced;
    HybridTrajectory traj;
    simulate_closed_loop(d.model.system, d.model.vhc, d.model.section, d.design.dare.K,
                         d.design.z_star, d.model.state_from_natural(x0_nat), 70.0, imp, so, traj);
    std::vector<double> e;
    for (const auto& c : traj.crossings) e.push_back((c.z - d.design.z_star).norm());

    const double rho_cl = d.design.closed_loop.spectral_radius;
    const double ratio_bound = rho_cl + 0.2;
    double e_max_tail = 0.0;
    int first_tail = -1;
    double geo_log = 0.0;
    int geo_count = 0;
    double max_ratio = 0.0;
    // crossings are numbered from k = 1 here (the run starts off-section)
    for (size_t i = 0; i < e.size(); ++i) {
      if (traj.crossings[i].k < 15) continue;
      if (first_tail < 0) first_tail = static_cast<int>(i);
      e_max_tail = std::max(e_max_tail, e[i]);
      if (i + 1 < e.size() && e[i] > 1e-9) {
        geo_log += std::log(std::max(e[i + 1], 1e-15) / e[i]);
        max_ratio = std::max(max_ratio, e[i + 1] / e[i]);
        ++geo_count;
      }
    }
    const bool have_tail = first_tail >= 0 && first_tail + 1 < static_cast<int>(e.size());
    const double geo_ratio = geo_count ? std::exp(geo_log / geo_count) : 0.0;
    const bool decreasing = have_tail && e.back() < e[first_tail];
    const bool pass = have_tail && e_max_tail < 1e-2 && decreasing && geo_ratio <= ratio_bound;
    std::ostringstream os;
    os.precision(4);
    os << "max||e(k)|| for k >= 15: " << e_max_tail << " (< 1e-2), mean tail contraction "
       << geo_ratio << " <= " << ratio_bound << " (max single-step ratio " << max_ratio
       << "), crossings: " << e.size();
    return {"C7", "tiptoebot error sequence decays", pass, os.str()};
  }

  CriterionResult c8a_residual() {
    std::mt19937_64 rng(seed_ ^ 0xa);
    double worst = 0.0;
    for (const ModelBundle& model : {cart_pendulum(), tiptoebot()}) {
      std::uniform_real_distribution<double> uq(-1.0, 1.0), uv(-3.0, 3.0), uu(-2.0, 2.0);
      for (int s = 0; s < 1000; ++s) {
        const int n = model.n();
        Vec q(n), qd(n), u(n - 1);
        for (int i = 0; i < n; ++i) q(i) = uq(rng);
        for (int i = 0; i < n; ++i) qd(i) = uv(rng);
        for (int i = 0; i < n - 1; ++i) u(i) = uu(rng);
        Vec acc = forward_accel(model.system, q, qd, u);
        Vec lhs = model.system.mass_matrix(q) * acc + model.system.bias(q, qd);
        lhs.head(n - 1) -= u;
        worst = std::max(worst, lhs.cwiseAbs().maxCoeff());
      }
    }
    return {"C8a", "equation-of-motion residual on random samples", worst < 1e-9,
            "max residual = " + detail::fmt(worst) + " over 1000 samples per model (< 1e-9)"};
  }

  CriterionResult c8b_symmetry() {
    std::mt19937_64 rng(seed_ ^ 0xb);
    std::uniform_real_distribution<double> uq(-1.0, 1.0);
    double worst_sym = 0.0, worst_odd = 0.0;
    for (const ModelBundle& model : {cart_pendulum(), tiptoebot()}) {
      for (int s = 0; s < 100; ++s) {
        Vec off(model.n());
        for (int i = 0; i < model.n(); ++i) off(i) = uq(rng);
        worst_sym = std::max(worst_sym, symmetry_defect(model.system, off));
        worst_odd = std::max(
            worst_odd, vhc_oddness_defect(model.vhc, model.system.symmetry_center(model.n() - 1),
                                          {off(model.n() - 1)}));
      }
    }
    const bool pass = worst_sym < 1e-10 && worst_odd < 1e-10;
    return {"C8b", "evenness of M, F and oddness of the constraint", pass,
            "max symmetry defect = " + detail::fmt(worst_sym) +
                ", max oddness defect = " + detail::fmt(worst_odd) + " (< 1e-10)"};
  }

  CriterionResult c8c_vhc_residual() {
    Vec cart_x0(4);
    cart_x0 << 0.1, 0.4, -0.1, -0.2;
    const double r1 = detail::max_vhc_residual(cart_design(cart_gravity_winner()).model, cart_x0, 5.0);
    ModelBundle tb = tiptoebot();
    Vec tb_x0_nat(6);
    tb_x0_nat << -0.1, 0.2, 0.05, 3.3, -6.0, 0.4;
    const double r2 = detail::max_vhc_residual(tb, tb.state_from_natural(tb_x0_nat), 5.0);
    const double worst = std::max(r1, r2);
    return {"C8c", "transversal dynamics residual along trajectories", worst < 1e-6,
            "max ||rho'' + kd rho' + kp rho|| = " + detail::fmt(worst) + " (< 1e-6)"};
  }

  CriterionResult c8d_energy_and_impulse_manifold() {
    // zero-dynamics energy drift over one period
    double worst_drift = 0.0;
    for (const ModelDesign* md : {&cart_design(cart_gravity_winner()), &tiptoebot_design()}) {
      const ReducedSystem& red = md->reduced;
      auto field = [&red](const Vec& y) {
        Vec dy(2);
        dy << y(1), red.alpha1(y(0)) + red.alpha2(y(0)) * y(1) * y(1);
        return dy;
      };
      Vec y0(2);
      y0 << md->orbit.anchor_q2, md->orbit.anchor_q2d;
      const double e0 = red.energy(y0(0), y0(1));
      const double period = estimate_reduced_period(red, y0);
      IntegratorOptions integ;
      Vec y = integrate_fixed_horizon(field, y0, 0.0, period, integ);
      worst_drift = std::max(worst_drift, std::abs(red.energy(y(0), y(1)) - e0));
    }
    // impulse-manifold identity on random impulses
    std::mt19937_64 rng(seed_ ^ 0xd);
    std::uniform_real_distribution<double> uq(-0.5, 0.5), ui(-1.0, 1.0);
    double worst_im = 0.0;
    for (const ModelBundle& model : {cart_pendulum(), tiptoebot()}) {
      const int n = model.n();
      for (int s = 0; s < 100; ++s) {
        Vec q(n), qd(n), imp(n - 1);
        for (int i = 0; i < n; ++i) q(i) = uq(rng);
        for (int i = 0; i < n; ++i) qd(i) = uq(rng);
        for (int i = 0; i < n - 1; ++i) imp(i) = ui(rng);
        Vec qd_plus = apply_impulse_jump(model.system, q, qd, imp);
        MassBlocks mb = partition_mass(model.system, q);
        const Vec dqd1 = (qd_plus - qd).head(n - 1);
        const double dqd2 = qd_plus(n - 1) - qd(n - 1);
        worst_im = std::max(worst_im, std::abs(dqd2 + mb.m12.dot(dqd1) / mb.m22));
      }
    }
    const bool pass = worst_drift < 1e-6 && worst_im < 1e-10;
    return {"C8d", "zero-dynamics energy conservation and impulse-manifold identity", pass,
            "max |E(T) - E(0)| = " + detail::fmt(worst_drift) +
                " (< 1e-6), max manifold defect = " + detail::fmt(worst_im) + " (< 1e-10)"};
  }

  CriterionResult c8e_fixed_point() {
    double worst = 0.0;
    for (const ModelDesign* md : {&cart_design(cart_gravity_winner()), &tiptoebot_design()}) {
      Vec mapped = poincare_map(md->model.system, md->model.vhc, md->model.section,
                                md->design.z_star, MapOptions{});
      worst = std::max(worst, (mapped - md->design.z_star).norm());
    }
    return {"C8e", "fixed point of the return map", worst < 1e-7,
            "max ||P(z*) - z*|| = " + detail::fmt(worst) + " (< 1e-7)"};
  }

  CriterionResult c8f_richardson() {
    double worst = 0.0;
    for (const ModelDesign* md : {&cart_design(cart_gravity_winner()), &tiptoebot_design()}) {
      LinearizeOptions half;
      half.eps1 = 0.5e-5;
      half.eps2 = 0.5e-5;
      LinearizedMap lin_half =
          linearize(md->model.system, md->model.vhc, md->model.section, md->design.z_star, half);
      worst = std::max(worst, (lin_half.A - md->design.lin.A).cwiseAbs().maxCoeff());
    }
    return {"C8f", "linearization is converged under step halving", worst < 1e-3,
            "max |A(eps) - A(eps/2)| = " + detail::fmt(worst) + " (< 1e-3)"};
  }

  CriterionResult c8g_dare() {
    // scalar oracle: a=2, b=1, q=r=1 has P = 2 + sqrt(5)
    LqrProblem scalar{Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 1.0), Mat::Identity(1, 1),
                      Mat::Identity(1, 1)};
    DareSolution ssol = dare_solve(scalar);
    const double scalar_err = std::abs(ssol.P(0, 0) - (2.0 + std::sqrt(5.0)));

    double worst_residual = std::max(ssol.residual, 0.0);
    double worst_rho = 0.0;
    for (const ModelDesign* md : {&cart_design(cart_gravity_winner()), &tiptoebot_design()}) {
      worst_residual = std::max(worst_residual, md->design.dare.residual);
      worst_rho = std::max(worst_rho, md->design.closed_loop.spectral_radius);
    }

    std::mt19937_64 rng(seed_ ^ 0x6);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> usize(3, 7), uin(1, 3);
    int accepted = 0;
    while (accepted < 100) {
      const int n = usize(rng);
      const int m = uin(rng);
      Mat a(n, n), b(n, m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = gauss(rng) / std::sqrt(static_cast<double>(n));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) b(i, j) = gauss(rng);
      if (!stabilizability_check(a, b).stabilizable) continue;
      ++accepted;
      DareSolution sol = dare_solve(make_lqr_problem(a, b));
      worst_residual = std::max(worst_residual, sol.residual);
      worst_rho = std::max(worst_rho, certify(a, b, sol.K).spectral_radius);
    }
    const bool pass = scalar_err <= 1e-9 && worst_residual < 1e-9 && worst_rho < 1.0;
    return {"C8g", "Riccati synthesis: oracle, residuals and closed-loop stability", pass,
            "scalar error = " + detail::fmt(scalar_err) + ", max residual = " +
                detail::fmt(worst_residual) + ", max closed-loop radius = " +
                detail::fmt(worst_rho) + " over models + 100 random systems"};
  }

  CriterionResult c8h_high_gain_consistency() {
    const auto& d = tiptoebot_design();
    const int n = d.model.n();
    Vec dz(5);
    dz << 0.01, -0.02, 0.01, -0.03, 0.05;
    Vec z = d.design.z_star + dz;
    Vec x = lift_section_state(n, z, d.model.section.q2_star);
    Vec imp(2);
    imp << 0.05, -0.03;
    auto [q, qd] = d.model.system.split_state(x);
    Vec qd_jump = apply_impulse_jump(d.model.system, q, qd, imp);
    Vec qd1_des = qd.head(n - 1) + (qd_jump - qd).head(n - 1);
    BurstResult burst = high_gain_burst(d.model.system, d.model.vhc, x, qd1_des,
                                        Vec::Ones(n - 1), 1e-4, 1e-4);
    const double diff = (burst.x.tail(n) - qd_jump).norm();
    return {"C8h", "high-gain burst approaches the ideal velocity jump", diff < 1e-2,
            "||qd_burst - qd_jump|| = " + detail::fmt(diff) + " at mu = 1e-4 (< 1e-2), " +
                "burst duration " + detail::fmt(burst.duration) + " s"};
  }

  std::vector<CriterionResult> run_all() {
    return {c1_tiptoebot_A(), c2_tiptoebot_B(),   c3_reference_spectra(),
            c4_cart_AB_gravity(), c5_cart_convergence(), c6_cart_origin(),
            c7_tiptoebot_convergence(), c8a_residual(), c8b_symmetry(), c8c_vhc_residual(),
            c8d_energy_and_impulse_manifold(), c8e_fixed_point(), c8f_richardson(), c8g_dare(),
            c8h_high_gain_consistency()};
  }

  const HybridTrajectory& cart_fig5_trajectory() {
    if (!fig5_) {
      Vec x0(4);
      x0 << 0.1, 0.4, -0.1, -0.2;
      fig5_ = run_cart_sim(x0, 25.0);
    }
    return *fig5_;
  }

  const HybridTrajectory& cart_origin_trajectory() {
    if (!fig6_) fig6_ = run_cart_sim(Vec::Zero(4), 60.0);
    return *fig6_;
  }

 private:
  ModelDesign make_design(ModelBundle model) {
    ReducedSystem::Options ro;
    ro.domain_lo = model.reduced_domain_lo;
    ro.domain_hi = model.reduced_domain_hi;
    ReducedSystem red = ReducedSystem::build(model.system, model.vhc, ro);
    OrbitSpec orbit = orbit_from_anchor(red, model.anchor_q2, model.anchor_q2d);
    const int dim = 2 * model.n() - 1;
    DesignOutput d = run_design(model, red, orbit, Mat::Identity(dim, dim),
                                Mat::Identity(model.n() - 1, model.n() - 1), LinearizeOptions{});
    return ModelDesign{std::move(model), std::move(red), orbit, std::move(d)};
  }

  void run_cart_comparison() {
    if (!cart_cmp_.empty()) return;
    double best_score = std::numeric_limits<double>::infinity();
    for (double g : {9.81, 1.0}) {
      const auto& d = cart_design(g);
      auto da = detail::compare_entrywise(d.design.lin.A, reference::cart_A(), 0.05);
      auto db = detail::compare_entrywise(d.design.lin.B, reference::cart_B(), 0.1, 0.02);
      cart_cmp_[g] = {da.worst_abs, db.worst_abs};
      cart_b_within_[g] = db.within;
      const double score = std::max(da.worst_abs / 0.05, db.worst_abs / 0.1);
      if (score < best_score) {
        best_score = score;
        g_winner_ = g;
      }
    }
  }

  HybridTrajectory run_cart_sim(const Vec& x0, double t_end) {
    const auto& d = cart_design(cart_gravity_winner());
    ImpulseParams imp;
    imp.mode = ImpulseMode::high_gain;
    imp.lambda_diag = Vec::Ones(1);
    imp.mu = 0.005;
    imp.eps3 = 1e-4;
    SimulateOptions so;
    so.energy_ref = &d.reduced;
    HybridTrajectory traj;
    simulate_closed_loop(d.model.system, d.model.vhc, d.model.section, d.design.dare.K,
                         d.design.z_star, x0, t_end, imp, so, traj);
    return traj;
  }

  double estimate_reduced_period(const ReducedSystem& red, const Vec& y0) {
    auto field = [&red](const Vec& y) {
      Vec dy(2);
      dy << y(1), red.alpha1(y(0)) + red.alpha2(y(0)) * y(1) * y(1);
      return dy;
    };
    DenseSolver solver(field, IntegratorOptions{});
    solver.initialize(y0, 0.0);
    bool armed = false;
    double t_prev = 0.0;
    double g_prev = 0.0;
    while (solver.time() < 60.0) {
      auto [a, b] = solver.step();
      for (int j = 1; j <= 8; ++j) {
        const double t = a + (b - a) * j / 8;
        const double g = solver.state_at(t)(0) - y0(0);
        if (!armed) {
          if (std::abs(g) > 1e-3) armed = true;
        } else if (g_prev < 0 && g >= 0 && solver.state_at(t)(1) > 0) {
          auto gf = [&](double tt) { return solver.state_at(tt)(0) - y0(0); };
          return refine_root(gf, t_prev, t, 1e-12);
        }
        t_prev = t;
        g_prev = g;
      }
    }
    fail(ErrorCode::no_crossing, "reduced trajectory did not complete a period");
  }

  unsigned seed_;
  std::optional<ModelDesign> tb_;
  std::map<double, ModelDesign> cart_;
  std::map<double, std::pair<double, double>> cart_cmp_;
  std::map<double, bool> cart_b_within_;
  double g_winner_ = 9.81;
  std::optional<HybridTrajectory> fig5_;
  std::optional<HybridTrajectory> fig6_;
};

inline std::vector<CriterionResult> run_all(unsigned seed = 0) {
  Suite suite(seed);
  return suite.run_all();
}

}  // namespace icpm::verification

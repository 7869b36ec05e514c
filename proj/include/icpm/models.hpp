#pragma once

#include <array>
#include <string>
#include <vector>

#include "icpm/hybrid.hpp"
#include "icpm/vhc.hpp"

namespace icpm {

/// A ready-to-use system: dynamics, constraint, section and orbit defaults,
/// plus the mapping between the model's published joint ordering and the
/// internal passive-last convention.
struct ModelBundle {
  std::string name;
  MechanicalSystem system;
  VhcSpec vhc;
  SectionSpec section;                       // default section
  double anchor_q2 = 0.0;                    // default orbit anchor
  double anchor_q2d = 0.0;
  double reduced_domain_lo = -M_PI;          // regularity-safe q2 range
  double reduced_domain_hi = M_PI;
  std::vector<std::string> coordinate_names; // natural order
  std::vector<int> natural_to_internal;      // q index map

  int n() const { return system.n; }

  /// Full state from the model's natural ordering (positions then velocities).
  Vec state_from_natural(const Vec& x_nat) const {
    const int nn = n();
    Vec x(2 * nn);
    for (int i = 0; i < nn; ++i) {
      x(natural_to_internal[i]) = x_nat(i);
      x(nn + natural_to_internal[i]) = x_nat(nn + i);
    }
    return x;
  }

  Vec state_to_natural(const Vec& x) const {
    const int nn = n();
    Vec x_nat(2 * nn);
    for (int i = 0; i < nn; ++i) {
      x_nat(i) = x(natural_to_internal[i]);
      x_nat(nn + i) = x(nn + natural_to_internal[i]);
    }
    return x_nat;
  }
};

/// Cart with an inverted pendulum; the pendulum angle is the passive joint.
/// Internal coordinates q = [x; theta].
struct CartPendulumParams {
  double cart_mass = 1.0;
  double pendulum_mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;  // resolved against the reference linearization
  double vhc_slope = 1.5; // rho = x + slope * sin(theta)
  Mat kp = Mat::Constant(1, 1, 2.0);
  Mat kd = Mat::Constant(1, 1, 1.0);
};

inline ModelBundle cart_pendulum(const CartPendulumParams& p = {}) {
  if (p.cart_mass <= 0 || p.pendulum_mass <= 0 || p.length <= 0 || p.gravity <= 0)
    fail(ErrorCode::invalid_input, "cart-pendulum parameters must be positive");
  ModelBundle mb;
  mb.name = "cart-pendulum";

  const double mc = p.cart_mass, mp = p.pendulum_mass, l = p.length, g = p.gravity;
  mb.system.n = 2;
  mb.system.symmetry_center = Vec::Zero(2);
  mb.system.mass_matrix = [mc, mp, l](const Vec& q) {
    Mat m(2, 2);
    const double c = std::cos(q(1));
    m << mc + mp, mp * l * c, mp * l * c, mp * l * l;
    return m;
  };
  mb.system.bias = [mp, l, g](const Vec& q, const Vec& qd) {
    Vec h(2);
    const double s = std::sin(q(1));
    h << -mp * l * s * qd(1) * qd(1), -mp * g * l * s;
    return h;
  };
  mb.system.potential = [mp, l, g](const Vec& q) { return -mp * g * l * std::cos(q(1)); };

  const double a = p.vhc_slope;
  mb.vhc.phi = [a](double t) { return Vec::Constant(1, -a * std::sin(t)); };
  mb.vhc.dphi = [a](double t) { return Vec::Constant(1, -a * std::cos(t)); };
  mb.vhc.d2phi = [a](double t) { return Vec::Constant(1, a * std::sin(t)); };
  mb.vhc.kp = p.kp;
  mb.vhc.kd = p.kd;

  mb.section = SectionSpec{0.0, +1};
  mb.anchor_q2 = 0.0;
  mb.anchor_q2d = 0.450;
  // the constraint loses regularity where 1 - slope * cos^2(theta) = 0;
  // keep the reduction domain strictly inside the singular cone
  if (a > 1.0) {
    const double theta_s = std::acos(1.0 / std::sqrt(a));
    mb.reduced_domain_lo = -0.975 * theta_s;
    mb.reduced_domain_hi = 0.975 * theta_s;
  } else {
    mb.reduced_domain_lo = -M_PI;
    mb.reduced_domain_hi = M_PI;
  }
  mb.coordinate_names = {"x", "theta"};
  mb.natural_to_internal = {0, 1};
  return mb;
}

/// Three-link balancer on a passive toe joint. Published joint ordering is
/// (theta1, theta2, theta3) with theta1 passive; internally the passive
/// angle is stored last, q = [theta2; theta3; theta1].
struct TiptoebotParams {
  std::array<double, 6> alpha{0.386, 0.217, 0.247, 0.065, 0.054, 0.104};
  std::array<double, 3> beta{4.307, 1.102, 1.764};
  double vhc_a1 = -2.0;  // theta2 = a1 * theta1 on the constraint
  double vhc_a2 = 0.1;   // theta3 = a2 * theta1
  Mat kp = Mat::Identity(2, 2);
  Mat kd = 0.1 * Mat::Identity(2, 2);
};

inline ModelBundle tiptoebot(const TiptoebotParams& p = {}) {
  for (double a : p.alpha)
    if (a <= 0) fail(ErrorCode::invalid_input, "tiptoebot inertia parameters must be positive");
  ModelBundle mb;
  mb.name = "tiptoebot";

  const auto al = p.alpha;
  const auto be = p.beta;
  mb.system.n = 3;
  mb.system.symmetry_center = Vec::Zero(3);
  // internal order (theta2, theta3, theta1)
  mb.system.mass_matrix = [al](const Vec& q) {
    const double c2 = std::cos(q(0)), c3 = std::cos(q(1)), c23 = std::cos(q(0) + q(1));
    Mat m(3, 3);
    m(0, 0) = al[1] + al[2] + 2 * al[4] * c3;
    m(0, 1) = al[2] + al[4] * c3;
    m(1, 1) = al[2];
    m(0, 2) = al[1] + al[2] + al[3] * c2 + 2 * al[4] * c3 + al[5] * c23;
    m(1, 2) = al[2] + al[4] * c3 + al[5] * c23;
    m(2, 2) = al[0] + al[1] + al[2] + 2 * (al[3] * c2 + al[4] * c3 + al[5] * c23);
    m(1, 0) = m(0, 1);
    m(2, 0) = m(0, 2);
    m(2, 1) = m(1, 2);
    return m;
  };
  mb.system.potential = [be](const Vec& q) {
    const double t2 = q(0), t3 = q(1), t1 = q(2);
    return -(be[0] * std::cos(t1) + be[1] * std::cos(t1 + t2) + be[2] * std::cos(t1 + t2 + t3));
  };
  mb.system.bias = [al, be](const Vec& q, const Vec& qd) {
    const double t2 = q(0), t3 = q(1), t1 = q(2);
    const double s2 = std::sin(t2), s3 = std::sin(t3), s23 = std::sin(t2 + t3);
    std::vector<Mat> dm(3, Mat::Zero(3, 3));
    // dM/dtheta2
    dm[0](0, 2) = dm[0](2, 0) = -al[3] * s2 - al[5] * s23;
    dm[0](1, 2) = dm[0](2, 1) = -al[5] * s23;
    dm[0](2, 2) = -2 * (al[3] * s2 + al[5] * s23);
    // dM/dtheta3
    dm[1](0, 0) = -2 * al[4] * s3;
    dm[1](0, 1) = dm[1](1, 0) = -al[4] * s3;
    dm[1](0, 2) = dm[1](2, 0) = -2 * al[4] * s3 - al[5] * s23;
    dm[1](1, 2) = dm[1](2, 1) = -al[4] * s3 - al[5] * s23;
    dm[1](2, 2) = -2 * (al[4] * s3 + al[5] * s23);
    // M does not depend on theta1
    const double s1 = std::sin(t1), s12 = std::sin(t1 + t2), s123 = std::sin(t1 + t2 + t3);
    Vec df(3);
    df << be[1] * s12 + be[2] * s123, be[2] * s123, be[0] * s1 + be[1] * s12 + be[2] * s123;
    return coriolis_gravity_bias(dm, df, qd);
  };

  const double a1 = p.vhc_a1, a2 = p.vhc_a2;
  mb.vhc.phi = [a1, a2](double t) {
    Vec v(2);
    v << a1 * t, a2 * t;
    return v;
  };
  mb.vhc.dphi = [a1, a2](double) {
    Vec v(2);
    v << a1, a2;
    return v;
  };
  mb.vhc.d2phi = [](double) { return Vec::Zero(2); };
  mb.vhc.kp = p.kp;
  mb.vhc.kd = p.kd;

  mb.section = SectionSpec{0.0, +1};
  mb.anchor_q2 = 0.0;
  mb.anchor_q2d = 3.0;
  // regular on the whole circle for the default slopes
  mb.reduced_domain_lo = -M_PI;
  mb.reduced_domain_hi = M_PI;
  mb.coordinate_names = {"theta1", "theta2", "theta3"};
  mb.natural_to_internal = {2, 0, 1};
  return mb;
}

}  // namespace icpm

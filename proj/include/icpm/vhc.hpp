#pragma once

#include <functional>
#include <sstream>

#include "icpm/dynamics.hpp"

namespace icpm {

/// Virtual holonomic constraint rho(q) = q1 - Phi(q2) together with the
/// PD gains of the transversal dynamics rho'' + kd rho' + kp rho = 0.
/// Phi must be smooth and 2*pi-periodic; derivatives are supplied
/// analytically by the model.
struct VhcSpec {
  std::function<Vec(double)> phi;    // q2 -> Phi(q2) in R^{n-1}
  std::function<Vec(double)> dphi;   // dPhi/dq2
  std::function<Vec(double)> d2phi;  // d2Phi/dq2^2
  Mat kp;                            // SPD (n-1) x (n-1)
  Mat kd;                            // SPD (n-1) x (n-1)
};

constexpr double kDefaultRegularityTol = 1e-6;

inline Vec rho(const VhcSpec& vhc, const Vec& q) {
  const int na = static_cast<int>(q.size()) - 1;
  return q.head(na) - vhc.phi(q(na));
}

inline Vec rho_dot(const VhcSpec& vhc, const Vec& q, const Vec& qd) {
  const int na = static_cast<int>(q.size()) - 1;
  return qd.head(na) - vhc.dphi(q(na)) * qd(na);
}

/// Lift a passive-coordinate point to the full constrained state
/// q = [Phi(q2); q2], qd = [Phi'(q2) q2d; q2d].
inline std::pair<Vec, Vec> constraint_lift(const VhcSpec& vhc, int n, double q2, double q2d) {
  Vec q(n), qd(n);
  q.head(n - 1) = vhc.phi(q2);
  q(n - 1) = q2;
  qd.head(n - 1) = vhc.dphi(q2) * q2d;
  qd(n - 1) = q2d;
  return {q, qd};
}

/// Regularity quantity M12' Phi' + M22 at an arbitrary configuration.
/// The linearizing controller exists iff this is nonzero.
inline double regularity_at(const MechanicalSystem& sys, const VhcSpec& vhc, const Vec& q) {
  MassBlocks mb = partition_mass(sys, q);
  return mb.m12.dot(vhc.dphi(q(sys.n - 1))) + mb.m22;
}

/// Regularity evaluated on the constraint (q1 = Phi(q2)).
inline double regularity(const MechanicalSystem& sys, const VhcSpec& vhc, double q2) {
  auto [q, qd] = constraint_lift(vhc, sys.n, q2, 0.0);
  return regularity_at(sys, vhc, q);
}

/// Feedback-linearizing control that renders the constraint manifold
/// exponentially stable. Throws singular-vhc inside the regularity guard
/// band |M12' Phi' + M22| <= tol_reg.
inline Vec vhc_controller(const MechanicalSystem& sys, const VhcSpec& vhc, const Vec& q,
                          const Vec& qd, double tol_reg = kDefaultRegularityTol) {
  const int na = sys.n - 1;
  const double q2 = q(na);
  const double q2d = qd(na);

  const double reg = regularity_at(sys, vhc, q);
  if (std::abs(reg) <= tol_reg) {
    std::ostringstream os;
    os << "constraint not regular at q2 = " << q2 << " (value " << reg << ")";
    fail(ErrorCode::singular_vhc, os.str());
  }

  DynamicsTerms t = dynamics_terms(sys, q, qd);
  Vec dp = vhc.dphi(q2);
  Mat lhs = t.gain_active - dp * t.gain_passive;  // [B - Phi' D]
  Vec rhs = -t.drift_active + vhc.d2phi(q2) * (q2d * q2d) + dp * t.drift_passive -
            vhc.kp * rho(vhc, q) - vhc.kd * rho_dot(vhc, q, qd);
  return lhs.partialPivLu().solve(rhs);
}

/// Right-hand side of the closed loop x' = f(x) with u = u_c, x = [q; qd].
inline std::function<Vec(const Vec&)> closed_loop_field(const MechanicalSystem& sys,
                                                        const VhcSpec& vhc,
                                                        double tol_reg = kDefaultRegularityTol) {
  return [&sys, &vhc, tol_reg](const Vec& x) {
    const int n = sys.n;
    Vec q = x.head(n);
    Vec qd = x.tail(n);
    Vec u = vhc_controller(sys, vhc, q, qd, tol_reg);
    Vec dx(2 * n);
    dx.head(n) = qd;
    dx.tail(n) = forward_accel(sys, q, qd, u);
    return dx;
  };
}

/// Max deviation of Phi from 2*pi-periodicity over sampled q2.
inline double vhc_periodicity_defect(const VhcSpec& vhc, const std::vector<double>& q2s) {
  double worst = 0.0;
  for (double q2 : q2s)
    worst = std::max(worst, (vhc.phi(q2 + 2.0 * M_PI) - vhc.phi(q2)).cwiseAbs().maxCoeff());
  return worst;
}

/// Max deviation from oddness Phi(qb2 + s) = -Phi(qb2 - s) over sampled s.
inline double vhc_oddness_defect(const VhcSpec& vhc, double q2_bar, const std::vector<double>& offsets) {
  double worst = 0.0;
  for (double s : offsets)
    worst = std::max(worst, (vhc.phi(q2_bar + s) + vhc.phi(q2_bar - s)).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace icpm

#include "icpm/vhc.hpp"

#include <gtest/gtest.h>

#include "icpm/models.hpp"
#include "icpm/ode.hpp"
#include "icpm/verification.hpp"

using namespace icpm;

namespace {

Vec make_vec(std::initializer_list<double> vals) {
  Vec v(static_cast<Eigen::Index>(vals.size()));
  int i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

TEST(Rho, CartPendulumValue) {
  ModelBundle cp = cart_pendulum();
  Vec r = rho(cp.vhc, make_vec({0.1, 0.4}));
  EXPECT_NEAR(r(0), 0.1 + 1.5 * std::sin(0.4), 1e-14);
}

TEST(Rho, OnManifoldIsZero) {
  for (const ModelBundle& mb : {cart_pendulum(), tiptoebot()}) {
    auto [q, qd] = constraint_lift(mb.vhc, mb.n(), 0.37, -0.8);
    EXPECT_LT(rho(mb.vhc, q).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(rho_dot(mb.vhc, q, qd).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Rho, TiptoebotLinearConstraint) {
  ModelBundle tb = tiptoebot();
  // natural (theta1, theta2, theta3) = (0.5, -1.0, 0.05) sits on the constraint
  Vec x_nat(6);
  x_nat << 0.5, -1.0, 0.05, 0.0, 0.0, 0.0;
  Vec x = tb.state_from_natural(x_nat);
  EXPECT_LT(rho(tb.vhc, x.head(3)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Regularity, CartPendulumClosedForm) {
  ModelBundle cp = cart_pendulum();
  for (double th : {0.0, 0.2, -0.45, 0.61, 1.0}) {
    EXPECT_NEAR(regularity(cp.system, cp.vhc, th), 1.0 - 1.5 * std::cos(th) * std::cos(th),
                1e-12);
  }
  EXPECT_NEAR(regularity(cp.system, cp.vhc, 0.0), -0.5, 1e-14);
}

TEST(Regularity, CartPendulumSingularAngle) {
  ModelBundle cp = cart_pendulum();
  // bracket the positive root of 1 - 1.5 cos^2(theta)
  auto g = [&](double th) { return regularity(cp.system, cp.vhc, th); };
  double root = refine_root(g, 0.3, 1.0, 1e-14);
  EXPECT_NEAR(root, std::acos(std::sqrt(2.0 / 3.0)), 1e-9);
  EXPECT_NEAR(root, 0.61548, 1e-4);  // the commonly quoted 0.61 rad
}

TEST(Vhc, DerivativeConsistency) {
  const double h = 1e-5;
  for (const ModelBundle& mb : {cart_pendulum(), tiptoebot()}) {
    for (double q2 : {-0.9, -0.3, 0.0, 0.4, 1.2}) {
      Vec fd = (mb.vhc.phi(q2 + h) - mb.vhc.phi(q2 - h)) / (2.0 * h);
      Vec an = mb.vhc.dphi(q2);
      EXPECT_LT((fd - an).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, an.cwiseAbs().maxCoeff()));
      Vec fd2 = (mb.vhc.dphi(q2 + h) - mb.vhc.dphi(q2 - h)) / (2.0 * h);
      Vec an2 = mb.vhc.d2phi(q2);
      EXPECT_LT((fd2 - an2).cwiseAbs().maxCoeff(),
                1e-6 * std::max(1.0, an2.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Vhc, PeriodicityAndOddness) {
  ModelBundle cp = cart_pendulum();
  std::vector<double> qs{-2.0, -0.5, 0.0, 0.3, 1.7};
  EXPECT_LT(vhc_periodicity_defect(cp.vhc, qs), 1e-10);
  EXPECT_LT(vhc_oddness_defect(cp.vhc, 0.0, qs), 1e-10);
  // the tiptoebot constraint is linear: odd but intentionally not periodic
  ModelBundle tb = tiptoebot();
  EXPECT_LT(vhc_oddness_defect(tb.vhc, 0.0, qs), 1e-10);
}

TEST(Controller, RefusesNearSingularity) {
  ModelBundle cp = cart_pendulum();
  const double th_star = std::acos(std::sqrt(2.0 / 3.0));
  auto [q, qd] = constraint_lift(cp.vhc, 2, th_star, 0.1);
  try {
    vhc_controller(cp.system, cp.vhc, q, qd);
    FAIL() << "expected singular-vhc";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_vhc);
    EXPECT_NE(std::string(e.what()).find("q2"), std::string::npos);
  }
}

TEST(Controller, TransversalResidualAlongTrajectory) {
  ModelBundle cp = cart_pendulum();
  Vec x0 = make_vec({0.1, 0.4, -0.1, -0.2});
  EXPECT_LT(verification::detail::max_vhc_residual(cp, x0, 5.0), 1e-6);

  ModelBundle tb = tiptoebot();
  Vec x0_nat(6);
  x0_nat << -0.1, 0.2, 0.05, 3.3, -6.0, 0.4;
  EXPECT_LT(verification::detail::max_vhc_residual(tb, tb.state_from_natural(x0_nat), 5.0), 1e-6);
}

TEST(Controller, ExponentialDecayRate) {
  // kp = 2, kd = 1 gives s = -1/2 +- i sqrt(7)/2; over one rotation period the
  // envelope contracts by exactly exp(-T/2)
  ModelBundle cp = cart_pendulum();
  auto [q0, qd0] = constraint_lift(cp.vhc, 2, 0.0, 0.45);
  Vec x0(4);
  x0 << q0, qd0;
  x0(0) += 1e-3;  // small constraint violation
  const double period = 2.0 * M_PI / (std::sqrt(7.0) / 2.0);
  auto states = verification::detail::sample_closed_loop(cp, x0, period + 0.01, period / 2.0);
  auto err_norm = [&](const Vec& x) {
    Vec r = rho(cp.vhc, x.head(2));
    Vec rd = rho_dot(cp.vhc, x.head(2), x.tail(2));
    return std::sqrt(r.squaredNorm() + rd.squaredNorm());
  };
  const double rate = -std::log(err_norm(states[2]) / err_norm(states[0])) / period;
  EXPECT_NEAR(rate, 0.5, 0.1);  // within 20 % of the slowest mode
}

TEST(Controller, ManifoldIsInvariant) {
  // starting exactly on the constraint at orbit energy, the constraint error
  // stays at integration-noise level over one full period
  struct Case { ModelBundle mb; double q2d0; double horizon; };
  for (auto& c : {Case{cart_pendulum(), 0.45, 1.5}, Case{tiptoebot(), 3.0, 2.1}}) {
    auto [q0, qd0] = constraint_lift(c.mb.vhc, c.mb.n(), 0.0, c.q2d0);
    Vec x0(2 * c.mb.n());
    x0 << q0, qd0;
    auto states = verification::detail::sample_closed_loop(c.mb, x0, c.horizon, 0.01);
    double worst = 0.0;
    for (const auto& x : states)
      worst = std::max(worst, rho(c.mb.vhc, x.head(c.mb.n())).cwiseAbs().maxCoeff());
    EXPECT_LT(worst, 1e-7) << c.mb.name;
  }
}

}  // namespace

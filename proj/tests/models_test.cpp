#include "icpm/models.hpp"

#include <gtest/gtest.h>

#include "icpm/reduction.hpp"

using namespace icpm;

namespace {

TEST(CartPendulum, Defaults) {
  ModelBundle cp = cart_pendulum();
  EXPECT_EQ(cp.n(), 2);
  EXPECT_EQ(cp.name, "cart-pendulum");
  EXPECT_NEAR(cp.vhc.kp(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(cp.vhc.kd(0, 0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(cp.section.q2_star, 0.0);
  EXPECT_DOUBLE_EQ(cp.anchor_q2d, 0.450);
  EXPECT_LT(cp.system.symmetry_center.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CartPendulum, RejectsNonPositiveParams) {
  CartPendulumParams p;
  p.length = -1.0;
  try {
    cart_pendulum(p);
    FAIL() << "expected invalid-input";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
}

TEST(CartPendulum, BiasConvention) {
  ModelBundle cp = cart_pendulum();
  Vec q(2), qd(2);
  q << 0.3, 0.7;
  qd << -0.2, 1.1;
  Vec h = cp.system.bias(q, qd);
  EXPECT_NEAR(h(0), -std::sin(0.7) * 1.1 * 1.1, 1e-14);
  EXPECT_NEAR(h(1), -9.81 * std::sin(0.7), 1e-14);
}

TEST(CartPendulum, GravityIsConfigurable) {
  CartPendulumParams p;
  p.gravity = 1.0;
  ModelBundle cp = cart_pendulum(p);
  Vec q(2), qd(2);
  q << 0.0, 0.5;
  qd.setZero();
  EXPECT_NEAR(cp.system.bias(q, qd)(1), -std::sin(0.5), 1e-14);
}

TEST(Tiptoebot, Defaults) {
  ModelBundle tb = tiptoebot();
  EXPECT_EQ(tb.n(), 3);
  MassBlocks b = partition_mass(tb.system, Vec::Zero(3));
  EXPECT_NEAR(b.m22, 1.296, 1e-12);
  EXPECT_NEAR(tb.vhc.kp(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(tb.vhc.kd(1, 1), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(tb.anchor_q2d, 3.0);
}

TEST(Tiptoebot, NaturalStateRoundTrip) {
  ModelBundle tb = tiptoebot();
  Vec x_nat(6);
  x_nat << -0.1, 0.2, 0.05, 3.3, -6.0, 0.4;  // (t1, t2, t3, td1, td2, td3)
  Vec x = tb.state_from_natural(x_nat);
  // internal order (t2, t3, t1)
  EXPECT_DOUBLE_EQ(x(0), 0.2);
  EXPECT_DOUBLE_EQ(x(1), 0.05);
  EXPECT_DOUBLE_EQ(x(2), -0.1);
  EXPECT_DOUBLE_EQ(x(3), -6.0);
  EXPECT_DOUBLE_EQ(x(4), 0.4);
  EXPECT_DOUBLE_EQ(x(5), 3.3);
  EXPECT_LT((tb.state_to_natural(x) - x_nat).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Tiptoebot, ConstraintLiftOfTheDefaultAnchor) {
  // linear constraint slopes make the section state exact arithmetic
  ModelBundle tb = tiptoebot();
  auto [q, qd] = constraint_lift(tb.vhc, 3, 0.0, 3.0);
  EXPECT_DOUBLE_EQ(q(0), 0.0);
  EXPECT_DOUBLE_EQ(q(1), 0.0);
  EXPECT_DOUBLE_EQ(qd(0), -6.0);
  EXPECT_DOUBLE_EQ(qd(1), 0.3);
  EXPECT_DOUBLE_EQ(qd(2), 3.0);
}

TEST(Tiptoebot, RegularOnTheOrbitRange) {
  ModelBundle tb = tiptoebot();
  double min_abs = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 10000; ++i) {
    const double q2 = -1.1 + 2.2 * i / 10000.0;
    min_abs = std::min(min_abs, std::abs(regularity(tb.system, tb.vhc, q2)));
  }
  EXPECT_GT(min_abs, 0.1);
}

TEST(Tiptoebot, ZeroDynamicsHasACenterAtTheOrigin) {
  ModelBundle tb = tiptoebot();
  // restoring acceleration on both sides of the equilibrium
  const double eps = 1e-4;
  EXPECT_LT(zero_dynamics_coeffs(tb.system, tb.vhc, eps).alpha1, 0.0);
  EXPECT_GT(zero_dynamics_coeffs(tb.system, tb.vhc, -eps).alpha1, 0.0);

  // nearby energy levels are closed: both turning points exist
  ReducedSystem red = ReducedSystem::build(tb.system, tb.vhc);
  OrbitSpec small = orbit_from_anchor(red, 0.0, 0.5);
  OrbitSampler sampler(red, tb.vhc, 3, small, 400);
  EXPECT_GT(sampler.q2_lo(), red.domain_lo());
  EXPECT_LT(sampler.q2_hi(), red.domain_hi());
  EXPECT_NEAR(sampler.q2_lo(), -sampler.q2_hi(), 1e-6);  // symmetric well
}

TEST(Models, RegularityZeroMatchesQuotedAngle) {
  ModelBundle cp = cart_pendulum();
  // the quoted singular angle is +-0.61 rad
  double lo = 0.5, hi = 0.7;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (regularity(cp.system, cp.vhc, mid) < 0) lo = mid;
    else hi = mid;
  }
  EXPECT_NEAR(0.5 * (lo + hi), 0.61548, 5e-4);
}

}  // namespace

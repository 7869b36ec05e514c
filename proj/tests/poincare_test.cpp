#include "icpm/poincare.hpp"

#include <random>

#include <gtest/gtest.h>

#include "icpm/models.hpp"
#include "icpm/reduction.hpp"
#include "reference_fixtures.hpp"

using namespace icpm;

namespace {

struct ModelSetup {
  ModelBundle model;
  ReducedSystem reduced;
  OrbitSpec orbit;
  Vec z_star;
};

const ModelSetup& cart_setup() {
  static ModelSetup* s = [] {
    auto* out = new ModelSetup{cart_pendulum(), {}, {}, {}};
    ReducedSystem::Options ro;
    ro.domain_lo = out->model.reduced_domain_lo;
    ro.domain_hi = out->model.reduced_domain_hi;
    out->reduced = ReducedSystem::build(out->model.system, out->model.vhc, ro);
    out->orbit = orbit_from_anchor(out->reduced, 0.0, 0.45);
    out->z_star = find_fixed_point(out->model.system, out->model.vhc, out->model.section,
                                   out->reduced, out->orbit);
    return out;
  }();
  return *s;
}

const ModelSetup& tiptoebot_setup() {
  static ModelSetup* s = [] {
    auto* out = new ModelSetup{tiptoebot(), {}, {}, {}};
    out->reduced = ReducedSystem::build(out->model.system, out->model.vhc);
    out->orbit = orbit_from_anchor(out->reduced, 0.0, 3.0);
    out->z_star = find_fixed_point(out->model.system, out->model.vhc, out->model.section,
                                   out->reduced, out->orbit);
    return out;
  }();
  return *s;
}

TEST(SectionState, LiftRoundTrip) {
  Vec z(5);
  z << 0.1, -0.2, 0.3, -0.4, 0.5;
  Vec x = lift_section_state(3, z, 0.77);
  EXPECT_DOUBLE_EQ(x(2), 0.77);
  EXPECT_LT((section_state_of(3, x) - z).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FixedPoint, CartPendulumAnalyticLift) {
  const auto& s = cart_setup();
  EXPECT_NEAR(s.z_star(0), 0.0, 1e-9);
  EXPECT_NEAR(s.z_star(1), -0.675, 1e-9);  // Phi'(0) * 0.45 = -1.5 * 0.45
  EXPECT_NEAR(s.z_star(2), 0.450, 1e-9);
}

TEST(FixedPoint, TiptoebotAnalyticLift) {
  const auto& s = tiptoebot_setup();
  Vec expected(5);
  expected << 0.0, 0.0, -6.0, 0.3, 3.0;  // internal ordering (q1, q1d, q2d)
  EXPECT_LT((s.z_star - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FixedPoint, MapReturnsToItself) {
  for (const ModelSetup* s : {&cart_setup(), &tiptoebot_setup()}) {
    Vec mapped = poincare_map(s->model.system, s->model.vhc, s->model.section, s->z_star);
    EXPECT_LT((mapped - s->z_star).norm(), 1e-7) << s->model.name;
  }
}

TEST(FixedPoint, RefinementIsNoOpWhenConverged) {
  const auto& s = cart_setup();
  FixedPointOptions opt;
  opt.refine = false;
  Vec analytic = find_fixed_point(s.model.system, s.model.vhc, s.model.section, s.reduced,
                                  s.orbit, opt);
  EXPECT_LT((analytic - s.z_star).norm(), 1e-9);
}

TEST(FixedPoint, SectionOutsideOrbitRange) {
  const auto& s = cart_setup();
  SectionSpec far{0.55, +1};  // inside the regular domain but beyond the orbit turning point
  try {
    find_fixed_point(s.model.system, s.model.vhc, far, s.reduced, s.orbit);
    FAIL() << "expected section-mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::section_mismatch);
  }
}

TEST(Linearize, CartMatchesIndependentImplementation) {
  const auto& s = cart_setup();
  LinearizedMap lin = linearize(s.model.system, s.model.vhc, s.model.section, s.z_star);
  EXPECT_LT((lin.A - fixtures::cart_A()).cwiseAbs().maxCoeff(), 2e-3);
  EXPECT_LT((lin.B - fixtures::cart_B()).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(Linearize, TiptoebotMatchesIndependentImplementation) {
  const auto& s = tiptoebot_setup();
  LinearizedMap lin = linearize(s.model.system, s.model.vhc, s.model.section, s.z_star);
  EXPECT_LT((lin.A - fixtures::tiptoebot_A()).cwiseAbs().maxCoeff(), 2e-3);
  EXPECT_LT((lin.B - fixtures::tiptoebot_B()).cwiseAbs().maxCoeff(), 2e-3);
}

TEST(Linearize, DeterministicAcrossThreadCounts) {
  const auto& s = cart_setup();
  LinearizeOptions one;
  one.threads = 1;
  LinearizeOptions four;
  four.threads = 4;
  LinearizedMap a = linearize(s.model.system, s.model.vhc, s.model.section, s.z_star, one);
  LinearizedMap b = linearize(s.model.system, s.model.vhc, s.model.section, s.z_star, four);
  EXPECT_EQ((a.A - b.A).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.B - b.B).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Linearize, QuadraticRemainder) {
  const auto& s = cart_setup();
  LinearizedMap lin = linearize(s.model.system, s.model.vhc, s.model.section, s.z_star);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Vec d(3);
    for (int i = 0; i < 3; ++i) d(i) = gauss(rng);
    d *= 1e-3 / d.norm();
    Vec mapped = poincare_map(s.model.system, s.model.vhc, s.model.section, s.z_star + d);
    EXPECT_LE((mapped - s.z_star - lin.A * d).norm(), 5e-5);
  }
}

TEST(Linearize, ImpulseColumnConsistentWithJumpMap) {
  const auto& s = cart_setup();
  LinearizedMap lin = linearize(s.model.system, s.model.vhc, s.model.section, s.z_star);
  auto remainder = [&](double eps) {
    Vec imp = Vec::Constant(1, eps);
    Vec mapped = poincare_map(s.model.system, s.model.vhc, s.model.section, s.z_star, imp);
    return (mapped - s.z_star - lin.B * imp).norm();
  };
  const double r1 = remainder(2e-3);
  const double r2 = remainder(1e-3);
  EXPECT_LT(r1, 1e-4);
  EXPECT_GT(r1 / std::max(r2, 1e-14), 2.0);  // roughly quadratic in the impulse
}

TEST(Linearize, UnstableOpenLoop) {
  for (const ModelSetup* s : {&cart_setup(), &tiptoebot_setup()}) {
    LinearizedMap lin = linearize(s->model.system, s->model.vhc, s->model.section, s->z_star);
    EXPECT_GE(lin.floquet_multipliers.cwiseAbs().maxCoeff(), 1.0 - 1e-3) << s->model.name;
  }
}

TEST(Floquet, SortedByModulus) {
  Mat a = Mat::Zero(3, 3);
  a(0, 0) = 0.5;
  a(1, 1) = -2.0;
  a(2, 2) = 1.0;
  Eigen::VectorXcd ev = floquet(a);
  EXPECT_NEAR(ev(0).real(), -2.0, 1e-12);
  EXPECT_NEAR(ev(1).real(), 1.0, 1e-12);
  EXPECT_NEAR(ev(2).real(), 0.5, 1e-12);

  ev = floquet(Mat::Identity(4, 4));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(ev(i)), 1.0, 1e-12);
}

TEST(PoincareMap, NoCrossingWithinHorizon) {
  const auto& s = cart_setup();
  MapOptions opt;
  opt.t_max = 0.1;  // far shorter than the orbit period
  try {
    poincare_map(s.model.system, s.model.vhc, s.model.section, s.z_star, opt);
    FAIL() << "expected no-crossing";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_crossing);
  }
}

TEST(PoincareMap, InfeasibleImpulseRejected) {
  const auto& s = cart_setup();
  Vec imp = Vec::Constant(1, 1.0);  // jump drives the passive velocity negative
  try {
    poincare_map(s.model.system, s.model.vhc, s.model.section, s.z_star, imp);
    FAIL() << "expected section-infeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::section_infeasible);
  }
}

}  // namespace

#include "icpm/lqr.hpp"

#include <random>

#include <gtest/gtest.h>

#include "icpm/verification.hpp"
#include "reference_fixtures.hpp"

using namespace icpm;
namespace ref = icpm::verification::reference;

namespace {

TEST(Stabilizability, ReferenceModelMatrices) {
  auto cart = stabilizability_check(ref::cart_A(), ref::cart_B());
  EXPECT_TRUE(cart.controllable);
  EXPECT_TRUE(cart.stabilizable);

  auto tb = stabilizability_check(ref::tiptoebot_A(), ref::tiptoebot_B());
  EXPECT_TRUE(tb.stabilizable);
}

TEST(Stabilizability, ZeroInputMatrix) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 1.5;
  a(1, 1) = 0.5;
  Mat b = Mat::Zero(2, 1);
  auto rep = stabilizability_check(a, b);
  EXPECT_FALSE(rep.controllable);
  EXPECT_FALSE(rep.stabilizable);  // the unstable mode is uncontrollable
  EXPECT_EQ(rep.controllability_rank, 0);
}

TEST(Stabilizability, StableUncontrollableModeIsTolerated) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 0.5;  // uncontrollable but stable
  a(1, 1) = 2.0;  // unstable but controllable
  Mat b(2, 1);
  b << 0.0, 1.0;
  auto rep = stabilizability_check(a, b);
  EXPECT_FALSE(rep.controllable);
  EXPECT_TRUE(rep.stabilizable);
  ASSERT_EQ(rep.uncontrollable_modes.size(), 1u);
  EXPECT_NEAR(rep.uncontrollable_modes[0].real(), 0.5, 1e-12);
}

TEST(Dare, ScalarOracle) {
  // a=2, b=1, q=r=1: the Riccati equation reduces to p^2 - 4p - 1 = 0,
  // so p = 2 + sqrt(5)
  LqrProblem prob{Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 1.0), Mat::Identity(1, 1),
                  Mat::Identity(1, 1)};
  DareSolution sol = dare_solve(prob);
  EXPECT_NEAR(sol.P(0, 0), 2.0 + std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(sol.K(0, 0), -2.0 * (2.0 + std::sqrt(5.0)) / (3.0 + std::sqrt(5.0)), 1e-9);
  EXPECT_LT(sol.residual, 1e-9);
  auto rep = certify(prob.A, prob.B, sol.K);
  EXPECT_NEAR(rep.spectral_radius, 2.0 + sol.K(0, 0), 1e-9);
  EXPECT_TRUE(rep.stable);
}

TEST(Dare, ZeroDynamicsMatrix) {
  LqrProblem prob{Mat::Zero(3, 3), Mat::Identity(3, 2) * 1.0, Mat::Identity(3, 3),
                  Mat::Identity(2, 2)};
  prob.B = Mat::Zero(3, 2);
  prob.B(0, 0) = 1.0;
  prob.B(2, 1) = 1.0;
  DareSolution sol = dare_solve(prob);
  EXPECT_LT((sol.P - prob.Q).norm(), 1e-12);
  EXPECT_LT(sol.K.norm(), 1e-12);
}

TEST(Dare, RejectsBadWeights) {
  LqrProblem prob{Mat::Identity(2, 2), Mat::Identity(2, 1) * 1.0, Mat::Identity(2, 2),
                  Mat::Zero(1, 1)};
  prob.B = Mat::Zero(2, 1);
  prob.B(1, 0) = 1.0;
  try {
    dare_solve(prob);
    FAIL() << "expected invalid-weights";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_weights);
  }
  prob.R = Mat::Identity(1, 1);
  prob.Q(0, 1) = 0.3;  // not symmetric -> indefinite check must fire
  prob.Q(1, 0) = -0.3;
  try {
    dare_solve(prob);
    FAIL() << "expected invalid-weights";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_weights);
  }
}

TEST(Dare, RandomStabilizableSystems) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> usize(3, 7), uin(1, 3);
  int accepted = 0;
  while (accepted < 30) {
    const int n = usize(rng), m = uin(rng);
    Mat a(n, n), b(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = gauss(rng) / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) b(i, j) = gauss(rng);
    if (!stabilizability_check(a, b).stabilizable) continue;
    ++accepted;
    DareSolution sol = dare_solve(make_lqr_problem(a, b));
    EXPECT_LT(sol.residual, 1e-9);
    EXPECT_LT(certify(a, b, sol.K).spectral_radius, 1.0);
  }
}

TEST(Dare, ModelMatricesStabilized) {
  for (const auto& [a, b] : {std::pair{fixtures::cart_A(), fixtures::cart_B()},
                             std::pair{fixtures::tiptoebot_A(), fixtures::tiptoebot_B()}}) {
    DareSolution sol = dare_solve(make_lqr_problem(a, b));
    EXPECT_LT(sol.residual, 1e-9);
    auto rep = certify(a, b, sol.K);
    EXPECT_TRUE(rep.stable);
    // open loop is unstable, so the gain must be doing real work
    EXPECT_GE(Eigen::EigenSolver<Mat>(a).eigenvalues().cwiseAbs().maxCoeff(), 1.0 - 1e-3);
  }
}

TEST(Dare, PenalizingInputShrinksTheGain) {
  for (const auto& [a, b] : {std::pair{fixtures::cart_A(), fixtures::cart_B()},
                             std::pair{fixtures::tiptoebot_A(), fixtures::tiptoebot_B()}}) {
    LqrProblem prob = make_lqr_problem(a, b);
    const double base = dare_solve(prob).K.norm();
    for (double c : {10.0, 100.0}) {
      LqrProblem scaled = prob;
      scaled.R = c * prob.R;
      EXPECT_LE(dare_solve(scaled).K.norm(), base + 1e-12);
    }
  }
}

TEST(Certify, ZeroGainGivesOpenLoopSpectrum) {
  Mat a = ref::cart_A();
  auto rep = certify(a, ref::cart_B(), Mat::Zero(1, 3));
  Eigen::VectorXcd open = Eigen::EigenSolver<Mat>(a).eigenvalues();
  EXPECT_NEAR(rep.spectral_radius, open.cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace

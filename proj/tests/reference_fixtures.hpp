// Frozen design artifacts for the bundled models, computed with an
// independent event-detecting integrator (adaptive RK45 at rtol 1e-11 with
// bisection-refined crossings). Used as cross-implementation regression
// oracles; agreement is expected at the finite-difference noise level.
#pragma once

#include <Eigen/Dense>

namespace fixtures {

inline Eigen::MatrixXd cart_A() {
  Eigen::MatrixXd a(3, 3);
  a << 0.0364758046, 0.3579549541, 0.5369330734,
      -0.4773035623, -0.6334731977, -2.4502124214,
      -0.1590727740, 0.2079939423, 1.3119931893;
  return a;
}

inline Eigen::MatrixXd cart_B() {
  Eigen::MatrixXd b(3, 1);
  b << -0.1789769798, 1.8167356742, -1.1039959499;
  return b;
}

inline constexpr double kCartPeriod = 1.4083855850094564;

// internal section-state ordering (q1, q1d, q2d)
inline Eigen::MatrixXd tiptoebot_A() {
  Eigen::MatrixXd a(5, 5);
  a << -0.3614530849, 0.0, 0.8099198346, 0.0, 1.6198308717,
      0.0, -0.3614575328, 0.0, 0.8099214324, -0.0809915436,
      -3.0679178659, -1.3472716436, -4.9492591957, -2.6696321763, -11.6314979260,
      0.1128993767, -0.7425643196, 0.2253397456, -0.3089799095, 0.5815748963,
      1.1289937671, 0.6736358218, 2.2533974558, 1.3348160881, 5.3732770674;
  return a;
}

inline Eigen::MatrixXd tiptoebot_B() {
  Eigen::MatrixXd b(5, 2);
  b << 1.6216264315, -5.1379454438,
      -4.0191495764, 9.2521685900,
      10.5700995636, 1.9182078509,
      1.6227719936, -5.0100451449,
      -5.7279785697, 0.4443310222;
  return b;
}

inline constexpr double kTiptoebotPeriod = 2.0345185100542187;

}  // namespace fixtures

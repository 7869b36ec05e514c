#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "icpm/dynamics.hpp"

namespace icpm {

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = 0.05;
  double init_step = 1e-4;
};

/// Adaptive Dormand-Prince 5(4) with dense output, wrapped behind an
/// Eigen-typed interface. Autonomous field x' = f(x).
class DenseSolver {
  using State = std::vector<double>;
  using Stepper = decltype(boost::numeric::odeint::make_dense_output(
      1.0, 1.0, 1.0, boost::numeric::odeint::runge_kutta_dopri5<State>()));

 public:
  DenseSolver(std::function<Vec(const Vec&)> field, const IntegratorOptions& opt)
      : field_(std::move(field)),
        opt_(opt),
        stepper_(boost::numeric::odeint::make_dense_output(
            opt.abs_tol, opt.rel_tol, opt.max_step,
            boost::numeric::odeint::runge_kutta_dopri5<State>())) {}

  void initialize(const Vec& x0, double t0) {
    dim_ = static_cast<int>(x0.size());
    State s(x0.data(), x0.data() + x0.size());
    stepper_.initialize(s, t0, opt_.init_step);
  }

  /// Advance one adaptive step; returns the covered interval [t0, t1].
  std::pair<double, double> step() {
    auto system = [this](const State& x, State& dxdt, double) {
      Eigen::Map<const Vec> xm(x.data(), dim_);
      Vec dx = field_(xm);
      dxdt.assign(dx.data(), dx.data() + dx.size());
    };
    return stepper_.do_step(system);
  }

  /// Interpolated state within the last completed step.
  Vec state_at(double t) const {
    State s(dim_);
    stepper_.calc_state(t, s);
    return Eigen::Map<const Vec>(s.data(), dim_);
  }

  double time() const { return stepper_.current_time(); }

  Vec state() const {
    const State& s = stepper_.current_state();
    return Eigen::Map<const Vec>(s.data(), dim_);
  }

 private:
  std::function<Vec(const Vec&)> field_;
  IntegratorOptions opt_;
  Stepper stepper_;
  int dim_ = 0;
};

/// Locate a sign change of g within [lo, hi] (g(lo) and g(hi) of opposite
/// sign) by bisection with a secant safeguard; returns the refined abscissa.
inline double refine_root(const std::function<double(double)>& g, double lo, double hi,
                          double value_tol, int max_iter = 200) {
  double glo = g(lo);
  double ghi = g(hi);
  double best = (std::abs(glo) < std::abs(ghi)) ? lo : hi;
  for (int i = 0; i < max_iter; ++i) {
    if (std::abs(glo) <= value_tol) return lo;
    if (std::abs(ghi) <= value_tol) return hi;
    double mid;
    if (std::abs(ghi - glo) > 0) {
      // secant proposal, clipped into the bracket interior
      mid = hi - ghi * (hi - lo) / (ghi - glo);
      const double margin = 0.01 * (hi - lo);
      if (!(mid > lo + margin && mid < hi - margin)) mid = 0.5 * (lo + hi);
    } else {
      mid = 0.5 * (lo + hi);
    }
    double gm = g(mid);
    if ((gm < 0) == (glo < 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
    best = (std::abs(glo) < std::abs(ghi)) ? lo : hi;
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(hi))) break;
  }
  return best;
}

/// Integrate x' = f(x) from (t0, x0) to t1 and return x(t1).
inline Vec integrate_fixed_horizon(const std::function<Vec(const Vec&)>& field, const Vec& x0,
                                   double t0, double t1, const IntegratorOptions& opt) {
  DenseSolver solver(field, opt);
  solver.initialize(x0, t0);
  while (solver.time() < t1) {
    auto [a, b] = solver.step();
    if (b >= t1) return solver.state_at(t1);
  }
  return solver.state();
}

}  // namespace icpm

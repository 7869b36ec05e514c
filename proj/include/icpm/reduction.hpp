#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "icpm/vhc.hpp"

namespace icpm {

/// Coefficients of the zero dynamics q2'' = alpha1(q2) + alpha2(q2) q2d^2.
struct ZeroDynCoeffs {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

/// Extract (alpha1, alpha2) at q2 from the passive equation evaluated on the
/// constraint at q2d = 0 and q2d = 1; the structure is affine in q2d^2, so two
/// evaluations determine it exactly.
inline ZeroDynCoeffs zero_dynamics_coeffs(const MechanicalSystem& sys, const VhcSpec& vhc,
                                          double q2, double tol_reg = kDefaultRegularityTol) {
  auto [q, qd0] = constraint_lift(vhc, sys.n, q2, 0.0);
  MassBlocks mb = partition_mass(sys, q);
  const double denom = mb.m12.dot(vhc.dphi(q2)) + mb.m22;
  if (std::abs(denom) <= tol_reg) {
    std::ostringstream os;
    os << "constraint not regular at q2 = " << q2;
    fail(ErrorCode::singular_vhc, os.str());
  }
  const double h2_rest = sys.bias(q, qd0)(sys.n - 1);
  auto [q_, qd1] = constraint_lift(vhc, sys.n, q2, 1.0);
  const double h2_unit = sys.bias(q, qd1)(sys.n - 1);
  const double curv = mb.m12.dot(vhc.d2phi(q2));

  ZeroDynCoeffs c;
  c.alpha1 = -h2_rest / denom;
  c.alpha2 = -(h2_unit - h2_rest + curv) / denom;
  return c;
}

namespace detail {

/// Adaptive Simpson quadrature with absolute tolerance and an evaluation
/// budget that turns near-singular integrands into a clean failure.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double fa,
                               double b, double fb, double m, double fm, double whole,
                               double tol, int depth, long& budget) {
  if ((budget -= 2) <= 0) {
    std::ostringstream os;
    os << "quadrature exhausted its evaluation budget near [" << a << ", " << b << "]";
    fail(ErrorCode::numeric_error, os.str());
  }
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    std::ostringstream os;
    os << "quadrature did not converge on [" << a << ", " << b << "]";
    fail(ErrorCode::numeric_error, os.str());
  }
  return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, budget) +
         adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, budget);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  long budget = 1000000;
  return adaptive_simpson(f, a, fa, b, fb, m, fm, whole, std::max(tol, 1e-16), 48, budget);
}

/// Cubic Hermite interpolation with exact nodal values and derivatives.
inline double hermite(double x0, double x1, double v0, double v1, double d0, double d1, double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * v1 +
         (t3 - t2) * h * d1;
}

}  // namespace detail

/// Reduced mass, reduced potential and the integral of motion of the zero
/// dynamics, backed by adaptive quadrature memoized on a dense grid with
/// cubic Hermite interpolation (nodal derivatives are analytic).
/// Tables are built eagerly; evaluation afterwards is lock-free.
class ReducedSystem {
 public:
  struct Options {
    double quad_tol = 1e-10;
    double domain_lo = -M_PI;
    double domain_hi = M_PI;
    int nodes_per_2pi = 2001;
    double tol_reg = kDefaultRegularityTol;
    int scan_points = 10000;  // for pmin/pmax
  };

  static ReducedSystem build(const MechanicalSystem& sys, const VhcSpec& vhc) {
    return build(sys, vhc, Options());
  }

  static ReducedSystem build(const MechanicalSystem& sys, const VhcSpec& vhc, const Options& opt) {
    // refuse domains that contain (or graze) a regularity singularity; the
    // reduction integrals blow up there
    const int scan = 2001;
    for (int i = 0; i < scan; ++i) {
      const double q2 = opt.domain_lo + (opt.domain_hi - opt.domain_lo) * i / (scan - 1);
      if (std::abs(regularity(sys, vhc, q2)) < 1e-4) {
        std::ostringstream os;
        os << "reduction domain contains a regularity singularity near q2 = " << q2;
        fail(ErrorCode::singular_vhc, os.str());
      }
    }
    MechanicalSystem sys_copy = sys;
    VhcSpec vhc_copy = vhc;
    double tol_reg = opt.tol_reg;
    auto a1 = [sys_copy, vhc_copy, tol_reg](double q2) {
      return zero_dynamics_coeffs(sys_copy, vhc_copy, q2, tol_reg).alpha1;
    };
    auto a2 = [sys_copy, vhc_copy, tol_reg](double q2) {
      return zero_dynamics_coeffs(sys_copy, vhc_copy, q2, tol_reg).alpha2;
    };
    return from_coeffs(a1, a2, opt);
  }

  static ReducedSystem from_coeffs(std::function<double(double)> alpha1,
                                   std::function<double(double)> alpha2) {
    return from_coeffs(std::move(alpha1), std::move(alpha2), Options());
  }

  static ReducedSystem from_coeffs(std::function<double(double)> alpha1,
                                   std::function<double(double)> alpha2, const Options& opt) {
    ReducedSystem r;
    r.a1_ = std::move(alpha1);
    r.a2_ = std::move(alpha2);
    r.lo_ = opt.domain_lo;
    r.hi_ = opt.domain_hi;
    if (!(r.lo_ < 0.0 && r.hi_ > 0.0))
      fail(ErrorCode::invalid_input, "reduced domain must contain q2 = 0");
    r.build_tables(opt);
    r.scan_extrema(opt);
    return r;
  }

  double alpha1(double q2) const { return a1_(q2); }
  double alpha2(double q2) const { return a2_(q2); }

  /// Reduced mass, exp(-2 * int_0^{q2} alpha2).
  double mass(double q2) const { return std::exp(-2.0 * i2_at(reduce(q2).first)); }

  /// Reduced potential, -int_0^{q2} alpha1 * mass.
  double potential(double q2) const {
    auto [w, k] = reduce(q2);
    double p = p_at(w);
    if (k != 0) p += static_cast<double>(k) * period_p_;
    return p;
  }

  /// Integral of motion E = (1/2) mass q2d^2 + potential.
  double energy(double q2, double q2d) const {
    return 0.5 * mass(q2) * q2d * q2d + potential(q2);
  }

  double pmin() const { return pmin_; }
  double pmax() const { return pmax_; }
  double pmin_location() const { return pmin_arg_; }
  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  const std::vector<double>& nodes() const { return xs_; }

  /// Empty shell; usable only after assignment from one of the factories.
  ReducedSystem() = default;

 private:
  void build_tables(const Options& opt) {
    const double h_target = 2.0 * M_PI / static_cast<double>(opt.nodes_per_2pi - 1);
    const int n_neg = std::max(4, static_cast<int>(std::ceil(-lo_ / h_target)));
    const int n_pos = std::max(4, static_cast<int>(std::ceil(hi_ / h_target)));
    xs_.resize(n_neg + n_pos + 1);
    zero_index_ = n_neg;
    for (int i = 0; i <= n_neg; ++i) xs_[n_neg - i] = -(-lo_ / n_neg) * i;
    for (int i = 0; i <= n_pos; ++i) xs_[n_neg + i] = (hi_ / n_pos) * i;
    xs_[0] = lo_;
    xs_.back() = hi_;

    const int m = static_cast<int>(xs_.size());
    const double span = hi_ - lo_;
    i2_.assign(m, 0.0);
    for (int i = zero_index_; i + 1 < m; ++i) {
      const double tol = opt.quad_tol * (xs_[i + 1] - xs_[i]) / span;
      i2_[i + 1] = i2_[i] + detail::integrate(a2_, xs_[i], xs_[i + 1], tol);
    }
    for (int i = zero_index_; i > 0; --i) {
      const double tol = opt.quad_tol * (xs_[i] - xs_[i - 1]) / span;
      i2_[i - 1] = i2_[i] - detail::integrate(a2_, xs_[i - 1], xs_[i], tol);
    }
    di2_.resize(m);
    for (int i = 0; i < m; ++i) di2_[i] = a2_(xs_[i]);

    auto integrand = [this](double x) { return a1_(x) * std::exp(-2.0 * i2_at(x)); };
    p_.assign(m, 0.0);
    for (int i = zero_index_; i + 1 < m; ++i) {
      const double tol = opt.quad_tol * (xs_[i + 1] - xs_[i]) / span;
      p_[i + 1] = p_[i] - detail::integrate(integrand, xs_[i], xs_[i + 1], tol);
    }
    for (int i = zero_index_; i > 0; --i) {
      const double tol = opt.quad_tol * (xs_[i] - xs_[i - 1]) / span;
      p_[i - 1] = p_[i] + detail::integrate(integrand, xs_[i - 1], xs_[i], tol);
    }
    dp_.resize(m);
    for (int i = 0; i < m; ++i) dp_[i] = -integrand(xs_[i]);

    full_circle_ = (hi_ - lo_ >= 2.0 * M_PI - 1e-9);
    period_i2_ = i2_.back() - i2_.front();
    period_p_ = p_.back() - p_.front();
  }

  void scan_extrema(const Options& opt) {
    pmin_ = std::numeric_limits<double>::infinity();
    pmax_ = -std::numeric_limits<double>::infinity();
    int imin = 0, imax = 0;
    std::vector<double> grid(opt.scan_points);
    for (int i = 0; i < opt.scan_points; ++i) {
      grid[i] = lo_ + (hi_ - lo_) * i / (opt.scan_points - 1);
      const double v = p_at(grid[i]);
      if (v < pmin_) { pmin_ = v; imin = i; }
      if (v > pmax_) { pmax_ = v; imax = i; }
    }
    auto refine = [&](int idx, double sign) {
      double a = grid[std::max(0, idx - 1)];
      double b = grid[std::min(opt.scan_points - 1, idx + 1)];
      // golden-section on sign * P
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = b - gr * (b - a), d = a + gr * (b - a);
      double fc = sign * p_at(c), fd = sign * p_at(d);
      for (int it = 0; it < 80; ++it) {
        if (fc < fd) { b = d; d = c; fd = fc; c = b - gr * (b - a); fc = sign * p_at(c); }
        else { a = c; c = d; fc = fd; d = a + gr * (b - a); fd = sign * p_at(d); }
      }
      return 0.5 * (a + b);
    };
    pmin_arg_ = refine(imin, +1.0);
    pmin_ = std::min(pmin_, p_at(pmin_arg_));
    const double arg_max = refine(imax, -1.0);
    pmax_ = std::max(pmax_, p_at(arg_max));
  }

  /// Map q2 into the table domain. Full-circle tables with an odd alpha2
  /// (period integral ~ 0) extend periodically; otherwise out-of-domain
  /// evaluation is an error.
  std::pair<double, long> reduce(double q2) const {
    if (q2 >= lo_ && q2 <= hi_) return {q2, 0};
    if (full_circle_ && std::abs(period_i2_) < 1e-9) {
      const double k = std::floor((q2 - lo_) / (2.0 * M_PI));
      return {q2 - 2.0 * M_PI * k, static_cast<long>(k)};
    }
    std::ostringstream os;
    os << "q2 = " << q2 << " outside reduced domain [" << lo_ << ", " << hi_ << "]";
    fail(ErrorCode::numeric_error, os.str());
  }

  int interval_of(double x) const {
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    int i = static_cast<int>(it - xs_.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(xs_.size()) - 2);
  }

  double i2_at(double x) const {
    const int i = interval_of(x);
    return detail::hermite(xs_[i], xs_[i + 1], i2_[i], i2_[i + 1], di2_[i], di2_[i + 1], x);
  }

  double p_at(double x) const {
    const int i = interval_of(x);
    return detail::hermite(xs_[i], xs_[i + 1], p_[i], p_[i + 1], dp_[i], dp_[i + 1], x);
  }

  std::function<double(double)> a1_, a2_;
  double lo_ = 0.0, hi_ = 0.0;
  std::vector<double> xs_, i2_, di2_, p_, dp_;
  int zero_index_ = 0;
  bool full_circle_ = false;
  double period_i2_ = 0.0, period_p_ = 0.0;
  double pmin_ = 0.0, pmax_ = 0.0, pmin_arg_ = 0.0;
};

enum class OrbitKind { oscillation, rotation };

/// A target level set E = c_d of the reduced system.
struct OrbitSpec {
  double c_d = 0.0;
  double anchor_q2 = 0.0;
  double anchor_q2d = 0.0;
  OrbitKind kind = OrbitKind::oscillation;
};

inline OrbitSpec orbit_from_anchor(const ReducedSystem& red, double q2, double q2d) {
  OrbitSpec o;
  o.c_d = red.energy(q2, q2d);
  o.anchor_q2 = q2;
  o.anchor_q2d = q2d;
  const double margin = 1e-12 * std::max({1.0, std::abs(o.c_d), std::abs(red.pmin())});
  if (!(o.c_d > red.pmin() + margin)) {
    std::ostringstream os;
    os << "energy level " << o.c_d << " does not exceed the potential minimum " << red.pmin();
    fail(ErrorCode::invalid_orbit, os.str());
  }
  o.kind = (o.c_d < red.pmax()) ? OrbitKind::oscillation : OrbitKind::rotation;
  return o;
}

/// Dense sampling of an orbit lifted to the full state space through the
/// constraint; supports distance queries with local refinement.
class OrbitSampler {
 public:
  OrbitSampler(const ReducedSystem& red, const VhcSpec& vhc, int n, const OrbitSpec& orbit,
               int samples = 2000)
      : red_(&red), vhc_(&vhc), n_(n), orbit_(orbit) {
    if (orbit.kind == OrbitKind::oscillation) {
      find_turning_points();
    } else {
      q2_lo_ = red.domain_lo();
      q2_hi_ = red.domain_hi();
    }
    build_samples(std::max(16, samples));
  }

  double q2_lo() const { return q2_lo_; }
  double q2_hi() const { return q2_hi_; }
  const std::vector<Vec>& samples() const { return samples_; }

  /// inf over the orbit of the Euclidean distance in full state space.
  double distance(const Vec& x_full) const {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(samples_.size()); ++i) {
      const double d2 = (samples_[i] - x_full).squaredNorm();
      if (d2 < best_d2) { best_d2 = d2; best = i; }
    }
    // local refinement around the best sample, on each admissible branch
    const double q2b = sample_q2_[best];
    const double dq = spacing_;
    double refined = best_d2;
    std::vector<double> branches;
    if (orbit_.kind == OrbitKind::oscillation) branches = {+1.0, -1.0};
    else branches = {orbit_.anchor_q2d >= 0 ? 1.0 : -1.0};
    for (double sgn : branches) {
      double a = std::max(q2_lo_, q2b - dq);
      double b = std::min(q2_hi_, q2b + dq);
      auto f = [&](double q2) { return (lift(q2, sgn) - x_full).squaredNorm(); };
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = b - gr * (b - a), d = a + gr * (b - a);
      double fc = f(c), fd = f(d);
      for (int it = 0; it < 60; ++it) {
        if (fc < fd) { b = d; d = c; fd = fc; c = b - gr * (b - a); fc = f(c); }
        else { a = c; c = d; fc = fd; d = a + gr * (b - a); fd = f(d); }
      }
      refined = std::min(refined, f(0.5 * (a + b)));
    }
    return std::sqrt(std::min(best_d2, refined));
  }

 private:
  Vec lift(double q2, double branch_sign) const {
    const double s = std::max(0.0, orbit_.c_d - red_->potential(q2));
    const double v = branch_sign * std::sqrt(2.0 * s / red_->mass(q2));
    auto [q, qd] = constraint_lift(*vhc_, n_, q2, v);
    Vec x(2 * n_);
    x << q, qd;
    return x;
  }

  void find_turning_points() {
    const auto& red = *red_;
    const double c = orbit_.c_d;
    const double a0 = orbit_.anchor_q2;
    if (red.potential(a0) > c)
      fail(ErrorCode::invalid_orbit, "anchor lies outside its own energy level set");
    auto bisect = [&](double inside, double outside) {
      for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (inside + outside);
        if (red.potential(mid) < c) inside = mid;
        else outside = mid;
        if (std::abs(outside - inside) < 1e-13) break;
      }
      return 0.5 * (inside + outside);
    };
    const double h = (red.domain_hi() - red.domain_lo()) / 4096.0;
    double x = a0;
    q2_hi_ = red.domain_hi();
    while (x + h <= red.domain_hi()) {
      if (red.potential(x + h) >= c) { q2_hi_ = bisect(x, x + h); break; }
      x += h;
    }
    x = a0;
    q2_lo_ = red.domain_lo();
    while (x - h >= red.domain_lo()) {
      if (red.potential(x - h) >= c) { q2_lo_ = bisect(x, x - h); break; }
      x -= h;
    }
  }

  void build_samples(int total) {
    const int m = total / 2;
    samples_.reserve(2 * m);
    sample_q2_.reserve(2 * m);
    const double mid = 0.5 * (q2_lo_ + q2_hi_);
    const double half = 0.5 * (q2_hi_ - q2_lo_);
    spacing_ = (q2_hi_ - q2_lo_) / m;
    for (double sgn : {+1.0, -1.0}) {
      for (int j = 0; j < m; ++j) {
        double q2;
        if (orbit_.kind == OrbitKind::oscillation) {
          // cosine spacing clusters samples near the turning points
          q2 = mid - half * std::cos(M_PI * j / (m - 1));
        } else {
          q2 = q2_lo_ + (q2_hi_ - q2_lo_) * j / m;
          if (sgn < 0) continue;  // rotations keep one velocity sign
        }
        samples_.push_back(lift(q2, orbit_.kind == OrbitKind::rotation
                                         ? (orbit_.anchor_q2d >= 0 ? 1.0 : -1.0)
                                         : sgn));
        sample_q2_.push_back(q2);
      }
    }
  }

  const ReducedSystem* red_;
  const VhcSpec* vhc_;
  int n_;
  OrbitSpec orbit_;
  double q2_lo_ = 0.0, q2_hi_ = 0.0, spacing_ = 0.0;
  std::vector<Vec> samples_;
  std::vector<double> sample_q2_;
};

inline double orbit_distance(const ReducedSystem& red, const VhcSpec& vhc, int n,
                             const OrbitSpec& orbit, const Vec& x_full, int samples = 2000) {
  return OrbitSampler(red, vhc, n, orbit, samples).distance(x_full);
}

}  // namespace icpm

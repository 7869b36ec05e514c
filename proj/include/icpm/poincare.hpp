#pragma once

#include <atomic>
#include <complex>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "icpm/hybrid.hpp"

namespace icpm {

struct MapOptions {
  double t_max = 60.0;  // horizon for one return
  SimOptions sim;
};

/// One evaluation of the impulse-controlled return map: lift z to the
/// section, apply the impulse jump, flow under the VHC controller to the
/// next crossing. impulse of size zero gives the uncontrolled map.
inline Vec poincare_map(const MechanicalSystem& sys, const VhcSpec& vhc,
                        const SectionSpec& section, const Vec& z, const Vec& impulse,
                        const MapOptions& opt = {}) {
  const int n = sys.n;
  Vec x = lift_section_state(n, z, section.q2_star);
  if (impulse.size() > 0 && impulse.cwiseAbs().maxCoeff() > 0.0) {
    auto [q, qd] = sys.split_state(x);
    Vec qd_plus = apply_impulse_jump(sys, q, qd, impulse);
    if (qd_plus(n - 1) * section.direction < 0.0)
      fail(ErrorCode::section_infeasible,
           "post-impulse passive velocity violates the section direction");
    x.tail(n) = qd_plus;
  }
  auto crossing = integrate_to_section(sys, vhc, section, x, opt.t_max, opt.sim);
  if (!crossing)
    fail(ErrorCode::no_crossing, "trajectory did not return to the section in time");
  return section_state_of(n, crossing->x);
}

inline Vec poincare_map(const MechanicalSystem& sys, const VhcSpec& vhc,
                        const SectionSpec& section, const Vec& z, const MapOptions& opt = {}) {
  return poincare_map(sys, vhc, section, z, Vec::Zero(sys.n - 1), opt);
}

/// Floquet multipliers: eigenvalues sorted by modulus, largest first.
inline Eigen::VectorXcd floquet(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a);
  Eigen::VectorXcd ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(),
            [](const std::complex<double>& l, const std::complex<double>& r) {
              if (std::abs(l) != std::abs(r)) return std::abs(l) > std::abs(r);
              if (l.real() != r.real()) return l.real() > r.real();
              return l.imag() > r.imag();
            });
  return ev;
}

/// Finite-difference linearization of the return map about its fixed point.
struct LinearizedMap {
  Vec z_star;
  Mat A;  // state Jacobian, (2n-1) x (2n-1)
  Mat B;  // impulse Jacobian, (2n-1) x (n-1)
  Eigen::VectorXcd floquet_multipliers;
  double eps1 = 0.0;
  double eps2 = 0.0;
};

struct LinearizeOptions {
  double eps1 = 1e-5;
  double eps2 = 1e-5;
  bool central = false;  // forward differences by default
  int threads = 0;       // 0 = automatic, capped by ICPM_THREADS
  MapOptions map;
};

namespace detail {

inline int resolve_threads(int requested, int jobs) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap <= 0) cap = 1;
  if (const char* env = std::getenv("ICPM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) cap = std::min(cap, v);
  }
  int t = (requested > 0) ? std::min(requested, cap) : cap;
  return std::clamp(t, 1, std::max(1, jobs));
}

/// Run fn(0..jobs-1) on a small thread pool; rethrows the first failure.
inline void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Column-wise finite differences of the map: state probes z* + eps1 e_i for
/// A, unit impulses of size eps2 for B. Probes are independent and run in
/// parallel; assembly is deterministic by column index.
inline LinearizedMap linearize(const MechanicalSystem& sys, const VhcSpec& vhc,
                               const SectionSpec& section, const Vec& z_star,
                               const LinearizeOptions& opt = {}) {
  const int n = sys.n;
  const int d = 2 * n - 1;
  const int m = n - 1;
  LinearizedMap lin;
  lin.z_star = z_star;
  lin.eps1 = opt.eps1;
  lin.eps2 = opt.eps2;
  lin.A.resize(d, d);
  lin.B.resize(d, m);

  auto probe = [&](const Vec& z, const Vec& imp) {
    return poincare_map(sys, vhc, section, z, imp, opt.map);
  };

  const int jobs = d + m;
  auto run_one = [&](int j) {
    try {
      if (j < d) {
        Vec dz = Vec::Zero(d);
        dz(j) = opt.eps1;
        if (opt.central) {
          lin.A.col(j) = (probe(z_star + dz, Vec::Zero(m)) - probe(z_star - dz, Vec::Zero(m))) /
                         (2.0 * opt.eps1);
        } else {
          lin.A.col(j) = (probe(z_star + dz, Vec::Zero(m)) - z_star) / opt.eps1;
        }
      } else {
        const int i = j - d;
        Vec imp = Vec::Zero(m);
        imp(i) = opt.eps2;
        if (opt.central) {
          lin.B.col(i) = (probe(z_star, imp) - probe(z_star, -imp)) / (2.0 * opt.eps2);
        } else {
          lin.B.col(i) = (probe(z_star, imp) - z_star) / opt.eps2;
        }
      }
    } catch (const Error& e) {
      std::ostringstream os;
      if (j < d) os << "state probe " << j;
      else os << "impulse probe " << (j - d);
      os << " failed: " << e.what();
      fail(ErrorCode::linearization_failure, os.str());
    }
  };
  detail::parallel_for(jobs, detail::resolve_threads(opt.threads, jobs), run_one);

  lin.floquet_multipliers = floquet(lin.A);
  return lin;
}

struct FixedPointOptions {
  bool refine = true;
  double tol = 1e-9;
  int max_newton = 5;
  LinearizeOptions lin;
};

/// Fixed point of the return map: analytic lift of the orbit through the
/// section (q1 = Phi(q2*), q2d from the energy level, q1d = Phi' q2d),
/// optionally polished by damped Newton on p(z) - z.
inline Vec find_fixed_point(const MechanicalSystem& sys, const VhcSpec& vhc,
                            const SectionSpec& section, const ReducedSystem& red,
                            const OrbitSpec& orbit, const FixedPointOptions& opt = {}) {
  const int n = sys.n;
  const double q2s = section.q2_star;
  const double surplus = orbit.c_d - red.potential(q2s);
  if (surplus <= 0.0) {
    std::ostringstream os;
    os << "orbit with c_d = " << orbit.c_d << " does not reach the section at q2 = " << q2s;
    fail(ErrorCode::section_mismatch, os.str());
  }
  const double q2d = section.direction * std::sqrt(2.0 * surplus / red.mass(q2s));
  Vec z(2 * n - 1);
  z.head(n - 1) = vhc.phi(q2s);
  z.segment(n - 1, n - 1) = vhc.dphi(q2s) * q2d;
  z(2 * n - 2) = q2d;

  if (!opt.refine) return z;

  Vec residual = poincare_map(sys, vhc, section, z, opt.lin.map) - z;
  if (residual.norm() < opt.tol) return z;

  for (int it = 0; it < opt.max_newton; ++it) {
    LinearizeOptions lo = opt.lin;
    Mat a = linearize(sys, vhc, section, z, lo).A;
    Mat j = a - Mat::Identity(a.rows(), a.cols());
    Vec step = -j.partialPivLu().solve(residual);
    double scale = 1.0;
    for (int half = 0; half < 4; ++half) {
      Vec z_try = z + scale * step;
      Vec r_try = poincare_map(sys, vhc, section, z_try, opt.lin.map) - z_try;
      if (r_try.norm() < residual.norm()) {
        z = z_try;
        residual = r_try;
        break;
      }
      scale *= 0.5;
    }
    if (residual.norm() < opt.tol) return z;
  }
  if (residual.norm() > 1e-7)
    fail(ErrorCode::convergence_failure, "fixed-point refinement stalled");
  return z;
}

}  // namespace icpm

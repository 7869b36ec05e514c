#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "icpm/errors.hpp"

namespace icpm {

struct StabilizabilityReport {
  bool controllable = false;
  bool stabilizable = false;
  int controllability_rank = 0;
  std::vector<std::complex<double>> uncontrollable_modes;  // PBH-deficient eigenvalues
};

/// Controllability via the numeric rank of [B, AB, ..., A^{n-1}B] and
/// stabilizability via a PBH test on every eigenvalue: a mode lambda is
/// uncontrollable when [A - lambda I, B] loses rank. Unstable uncontrollable
/// modes (|lambda| >= 1) rule out stabilizability.
inline StabilizabilityReport stabilizability_check(const Eigen::MatrixXd& a,
                                                   const Eigen::MatrixXd& b,
                                                   double tol_rank = 1e-8) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.rows() != n)
    fail(ErrorCode::invalid_input, "inconsistent system dimensions");
  const int m = static_cast<int>(b.cols());

  StabilizabilityReport rep;
  Eigen::MatrixXd ctrb(n, n * m);
  Eigen::MatrixXd block = b;
  for (int i = 0; i < n; ++i) {
    ctrb.middleCols(i * m, m) = block;
    block = a * block;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctrb);
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol_rank * std::max(smax, 1e-300)) ++rank;
  rep.controllability_rank = rank;
  rep.controllable = (rank == n) && smax > 0.0;

  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  rep.stabilizable = true;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    Eigen::MatrixXcd pbh(n, n + m);
    pbh.leftCols(n) = a.cast<std::complex<double>>() -
                      lambda * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(m) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> psvd(pbh);
    const auto& sv = psvd.singularValues();
    const double pmax = sv(0);
    if (sv(n - 1) <= tol_rank * std::max(pmax, 1e-300)) {
      rep.uncontrollable_modes.push_back(lambda);
      if (std::abs(lambda) >= 1.0) rep.stabilizable = false;
    }
  }
  return rep;
}

/// Discrete-time LQR problem for e(k+1) = A e(k) + B I(k).
struct LqrProblem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;  // symmetric positive semidefinite
  Eigen::MatrixXd R;  // symmetric positive definite
};

inline LqrProblem make_lqr_problem(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return {a, b, Eigen::MatrixXd::Identity(a.rows(), a.cols()),
          Eigen::MatrixXd::Identity(b.cols(), b.cols())};
}

struct DareSolution {
  Eigen::MatrixXd P;  // stabilizing solution
  Eigen::MatrixXd K;  // feedback gain; closed loop is A + B K
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

inline double dare_residual(const LqrProblem& p, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd btxb = p.R + p.B.transpose() * x * p.B;
  Eigen::MatrixXd r = p.A.transpose() * x * p.A - x -
                      p.A.transpose() * x * p.B * btxb.llt().solve(p.B.transpose() * x * p.A) +
                      p.Q;
  return r.norm();
}

}  // namespace detail

/// Solve the discrete algebraic Riccati equation by structured doubling
/// with a fixed-point fallback, and form the gain K = -(R + B'PB)^{-1} B'PA
/// so that the closed loop reads A + B K. Assumes (A, B) stabilizable and
/// (A, Q^{1/2}) detectable; convergence is certified by the residual check.
inline DareSolution dare_solve(const LqrProblem& prob) {
  const int n = static_cast<int>(prob.A.rows());
  const int m = static_cast<int>(prob.B.cols());
  if (prob.B.rows() != n || prob.Q.rows() != n || prob.Q.cols() != n || prob.R.rows() != m ||
      prob.R.cols() != m)
    fail(ErrorCode::invalid_input, "inconsistent LQR dimensions");
  if ((prob.R - prob.R.transpose()).norm() > 1e-10 * std::max(1.0, prob.R.norm()))
    fail(ErrorCode::invalid_weights, "R must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> rllt(prob.R);
  if (rllt.info() != Eigen::Success)
    fail(ErrorCode::invalid_weights, "R must be positive definite");
  if ((prob.Q - prob.Q.transpose()).norm() > 1e-10 * std::max(1.0, prob.Q.norm()))
    fail(ErrorCode::invalid_weights, "Q must be symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qes(prob.Q);
    if (qes.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, prob.Q.norm()))
      fail(ErrorCode::invalid_weights, "Q must be positive semidefinite");
  }

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  DareSolution sol;

  // structured doubling iteration
  Eigen::MatrixXd ak = prob.A;
  Eigen::MatrixXd gk = prob.B * rllt.solve(prob.B.transpose());
  Eigen::MatrixXd hk = prob.Q;
  bool doubling_ok = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> w(eye + gk * hk);
    if (std::abs(w.determinant()) < 1e-300) break;
    Eigen::MatrixXd wia = w.solve(ak);
    Eigen::MatrixXd wig = w.solve(gk);
    Eigen::MatrixXd h_next = hk + ak.transpose() * hk * wia;
    Eigen::MatrixXd g_next = gk + ak * wig * ak.transpose();
    Eigen::MatrixXd a_next = ak * wia;
    const double delta = (h_next - hk).norm();
    ak = a_next;
    gk = g_next;
    hk = 0.5 * (h_next + h_next.transpose());
    sol.iterations = it + 1;
    if (!hk.allFinite()) break;
    if (delta <= 1e-14 * std::max(1.0, hk.norm())) {
      doubling_ok = true;
      break;
    }
  }
  if (doubling_ok) sol.residual = detail::dare_residual(prob, hk);

  if (!doubling_ok || sol.residual > 1e-9) {
    // fixed-point fallback
    Eigen::MatrixXd p = prob.Q;
    int it = 0;
    const int max_it = 10000;
    for (; it < max_it; ++it) {
      Eigen::MatrixXd btpb = prob.R + prob.B.transpose() * p * prob.B;
      Eigen::MatrixXd next =
          prob.A.transpose() * p * prob.A -
          prob.A.transpose() * p * prob.B * btpb.llt().solve(prob.B.transpose() * p * prob.A) +
          prob.Q;
      next = 0.5 * (next + next.transpose());
      const double delta = (next - p).norm();
      p = next;
      if (!p.allFinite()) fail(ErrorCode::numeric_error, "Riccati iteration diverged");
      if (delta <= 1e-14 * std::max(1.0, p.norm())) break;
    }
    if (it >= max_it)
      fail(ErrorCode::numeric_error, "Riccati iteration did not converge");
    hk = p;
    sol.iterations += it + 1;
    sol.residual = detail::dare_residual(prob, hk);
  }

  sol.P = hk;
  Eigen::MatrixXd btpb = prob.R + prob.B.transpose() * sol.P * prob.B;
  Eigen::LLT<Eigen::MatrixXd> gllt(btpb);
  if (gllt.info() != Eigen::Success)
    fail(ErrorCode::invalid_weights, "R + B'PB is not positive definite");
  sol.K = -gllt.solve(prob.B.transpose() * sol.P * prob.A);
  return sol;
}

struct CertifyReport {
  Eigen::VectorXcd eigenvalues;
  double spectral_radius = 0.0;
  bool stable = false;  // all eigenvalues strictly inside the unit circle
};

/// Closed-loop spectrum of A + B K and the Schur stability verdict.
inline CertifyReport certify(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const Eigen::MatrixXd& k) {
  if (b.rows() != a.rows() || k.cols() != a.cols() || k.rows() != b.cols())
    fail(ErrorCode::invalid_input, "inconsistent gain dimensions");
  Eigen::EigenSolver<Eigen::MatrixXd> es(a + b * k);
  CertifyReport rep;
  rep.eigenvalues = es.eigenvalues();
  rep.spectral_radius = rep.eigenvalues.cwiseAbs().maxCoeff();
  rep.stable = rep.spectral_radius < 1.0;
  return rep;
}

}  // namespace icpm

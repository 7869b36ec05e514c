#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "icpm/errors.hpp"

namespace icpm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

/// An n-DOF mechanical system with exactly one passive revolute joint.
///
/// Convention: q = [q1; q2] with the passive coordinate q2 stored LAST.
/// The potential callback stores the term F that enters the Lagrangian as
/// L = T + F, so the physical potential energy is -F and the conserved
/// quantity of the unforced system is T - F.
///
/// Instances are immutable after construction and safe to share across
/// threads; all callbacks must be pure.
struct MechanicalSystem {
  int n = 0;
  std::function<Mat(const Vec&)> mass_matrix;                // q -> M(q), n x n
  std::function<Vec(const Vec&, const Vec&)> bias;           // (q, qd) -> [h1; h2]
  std::function<double(const Vec&)> potential;               // q -> F(q)
  Vec symmetry_center;                                       // q_bar

  int n_active() const { return n - 1; }

  std::pair<Vec, Vec> split_state(const Vec& x) const {
    return {x.head(n), x.tail(n)};
  }
};

struct MassBlocks {
  Mat m11;     // (n-1) x (n-1)
  Vec m12;     // (n-1)
  double m22;  // scalar, > 0
};

/// Blocks of M(q) in the active/passive partition.
inline MassBlocks partition_mass(const MechanicalSystem& sys, const Vec& q) {
  if (!q.allFinite()) fail(ErrorCode::invalid_input, "non-finite configuration");
  if (q.size() != sys.n) fail(ErrorCode::invalid_input, "configuration size mismatch");
  Mat m = sys.mass_matrix(q);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    fail(ErrorCode::model_error, "mass matrix is not symmetric");
  const int na = sys.n - 1;
  MassBlocks b;
  b.m11 = m.topLeftCorner(na, na);
  b.m12 = m.topRightCorner(na, 1);
  b.m22 = m(na, na);
  if (!(b.m22 > 0.0)) fail(ErrorCode::model_error, "passive inertia M22 <= 0");
  return b;
}

/// Coefficients of the input-affine acceleration form
///   q1dd = drift_active + gain_active * u
///   q2dd = drift_passive + gain_passive * u
struct DynamicsTerms {
  Vec drift_active;
  Mat gain_active;  // inverse Schur complement; symmetric positive definite
  double drift_passive = 0.0;
  RowVec gain_passive;
};

inline DynamicsTerms dynamics_terms(const MechanicalSystem& sys, const Vec& q, const Vec& qd) {
  MassBlocks mb = partition_mass(sys, q);
  Vec h = sys.bias(q, qd);
  const int na = sys.n - 1;
  Vec h1 = h.head(na);
  double h2 = h(na);

  Mat schur = mb.m11 - (mb.m12 * mb.m12.transpose()) / mb.m22;
  Eigen::LLT<Mat> llt(schur);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::model_error, "singular Schur complement (mass matrix not SPD)");
  Mat gain = llt.solve(Mat::Identity(na, na));
  gain = 0.5 * (gain + gain.transpose());  // kill factorization round-off asymmetry

  DynamicsTerms t;
  t.gain_active = gain;
  t.drift_active = gain * (mb.m12 * h2 - h1 * mb.m22) / mb.m22;
  t.gain_passive = -(mb.m12.transpose() * gain) / mb.m22;
  t.drift_passive = -(mb.m12.dot(t.drift_active) + h2) / mb.m22;
  return t;
}

/// Forward dynamics: accelerations under input u on the active joints.
inline Vec forward_accel(const MechanicalSystem& sys, const Vec& q, const Vec& qd, const Vec& u) {
  DynamicsTerms t = dynamics_terms(sys, q, qd);
  Vec acc(sys.n);
  acc.head(sys.n - 1) = t.drift_active + t.gain_active * u;
  acc(sys.n - 1) = t.drift_passive + t.gain_passive.dot(u);
  return acc;
}

/// Coriolis/centrifugal plus gravity bias assembled from analytic partials,
///   h_i = sum_jk [dM_ij/dq_k - (1/2) dM_jk/dq_i] qd_j qd_k - dF/dq_i.
/// dm_dq[k] is dM/dq_k.
inline Vec coriolis_gravity_bias(const std::vector<Mat>& dm_dq, const Vec& df_dq, const Vec& qd) {
  const int n = static_cast<int>(qd.size());
  Vec h = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        s += (dm_dq[k](i, j) - 0.5 * dm_dq[i](j, k)) * qd(j) * qd(k);
    h(i) = s - df_dq(i);
  }
  return h;
}

/// Mechanical energy T - F; conserved along unforced trajectories.
inline double mechanical_energy(const MechanicalSystem& sys, const Vec& q, const Vec& qd) {
  return 0.5 * qd.dot(sys.mass_matrix(q) * qd) - sys.potential(q);
}

/// Largest violation of the evenness of M and F about the symmetry center,
/// max(|M(qb+d) - M(qb-d)|, |F(qb+d) - F(qb-d)|), for one offset d.
inline double symmetry_defect(const MechanicalSystem& sys, const Vec& offset) {
  const Vec qp = sys.symmetry_center + offset;
  const Vec qm = sys.symmetry_center - offset;
  double dm = (sys.mass_matrix(qp) - sys.mass_matrix(qm)).cwiseAbs().maxCoeff();
  double df = std::abs(sys.potential(qp) - sys.potential(qm));
  return std::max(dm, df);
}

/// Smallest eigenvalue of M(q); positive for a valid model.
inline double mass_min_eigenvalue(const MechanicalSystem& sys, const Vec& q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sys.mass_matrix(q));
  return es.eigenvalues().minCoeff();
}

}  // namespace icpm

// dynamics.hpp — rigid-body dynamics for a serial revolute chain.
//
// Recursive Newton-Euler for inverse dynamics, composite rigid body for the
// mass matrix, plus the congruence transform that re-expresses the equations
// of motion in actuator coordinates. Gravity enters as a base acceleration,
// so the bias term C(q, qd) = rnea(q, qd, 0) already contains it.
#pragma once

#include <vector>

#include "beltopt/model.hpp"
#include "beltopt/spatial.hpp"

namespace beltopt {

// Spatial inertia of link i in its own frame; a point-mass payload rides on
// the last link at the end-effector offset.
inline Mat6 link_spatial_inertia(const RobotModel& m, int i) {
  const LinkSpec& l = m.links[i];
  Mat6 I = spatial_inertia(l.mass, l.com, l.inertia);
  if (i == m.n_joints() - 1 && m.payload_mass > 0.0) {
    I += spatial_inertia(m.payload_mass, m.ee_offset, Mat3::Zero());
  }
  return I;
}

struct KinematicsResult {
  std::vector<Mat3> R_world;   // link frame orientation
  std::vector<Vec3> p_world;   // joint origin position
  std::vector<Vec3> axis_world;
  Mat3 ee_orientation = Mat3::Identity();
  Vec3 ee_position = Vec3::Zero();
};

inline KinematicsResult fk(const RobotModel& m, const VecX& q) {
  const int n = m.n_joints();
  KinematicsResult k;
  k.R_world.resize(n);
  k.p_world.resize(n);
  k.axis_world.resize(n);
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const LinkSpec& l = m.links[i];
    p = p + R * l.joint_origin_p;
    R = R * l.joint_origin_R * axis_angle(l.joint_axis, q[i]);
    k.p_world[i] = p;
    k.R_world[i] = R;
    k.axis_world[i] = R * l.joint_axis;
  }
  k.ee_orientation = R;
  k.ee_position = p + R * m.ee_offset;
  return k;
}

inline Vec3 ee_position(const RobotModel& m, const VecX& q) { return fk(m, q).ee_position; }

// Positional Jacobian of the end-effector point, 3 x n:
// column i = a_i x (p_ee - p_i) for revolute joint i.
inline MatX ee_jacobian(const RobotModel& m, const VecX& q) {
  const KinematicsResult k = fk(m, q);
  const int n = m.n_joints();
  MatX J(3, n);
  for (int i = 0; i < n; ++i) {
    J.col(i) = k.axis_world[i].cross(k.ee_position - k.p_world[i]);
  }
  return J;
}

// Inverse dynamics: tau such that H(q) qdd + C(q, qd) = tau.
inline VecX rnea(const RobotModel& m, const VecX& q, const VecX& qd, const VecX& qdd) {
  const int n = m.n_joints();
  std::vector<Transform> X(n);
  std::vector<Vec6> S(n), v(n), a(n), f(n);

  Vec6 v0 = Vec6::Zero();
  Vec6 a0 = Vec6::Zero();
  a0.tail<3>() = -m.gravity;  // gravity as an upward base acceleration

  for (int i = 0; i < n; ++i) {
    const LinkSpec& l = m.links[i];
    X[i] = l.joint_transform(q[i]);
    S[i].head<3>() = l.joint_axis;
    S[i].tail<3>().setZero();
    const Vec6 v_parent = (i == 0) ? v0 : v[i - 1];
    const Vec6 a_parent = (i == 0) ? a0 : a[i - 1];
    const Vec6 vj = S[i] * qd[i];
    v[i] = X[i].apply_motion(v_parent) + vj;
    a[i] = X[i].apply_motion(a_parent) + S[i] * qdd[i] + cross_motion(v[i], vj);
    const Mat6 I = link_spatial_inertia(m, i);
    f[i] = I * a[i] + cross_force(v[i], I * v[i]);
  }

  VecX tau(n);
  for (int i = n - 1; i >= 0; --i) {
    tau[i] = S[i].dot(f[i]);
    if (i > 0) f[i - 1] += X[i].apply_force_transpose(f[i]);
  }
  return tau;
}

// Coriolis, centrifugal and gravity terms.
inline VecX bias(const RobotModel& m, const VecX& q, const VecX& qd) {
  return rnea(m, q, qd, VecX::Zero(m.n_joints()));
}

// Joint-space mass matrix via the composite rigid body algorithm.
inline MatX mass_matrix(const RobotModel& m, const VecX& q) {
  const int n = m.n_joints();
  std::vector<Transform> X(n);
  std::vector<Vec6> S(n);
  std::vector<Mat6> Ic(n);
  for (int i = 0; i < n; ++i) {
    X[i] = m.links[i].joint_transform(q[i]);
    S[i].head<3>() = m.links[i].joint_axis;
    S[i].tail<3>().setZero();
    Ic[i] = link_spatial_inertia(m, i);
  }
  MatX H = MatX::Zero(n, n);
  for (int i = n - 1; i >= 0; --i) {
    if (i > 0) Ic[i - 1] += inertia_to_parent(X[i], Ic[i]);
    Vec6 F = Ic[i] * S[i];
    H(i, i) = S[i].dot(F);
    for (int j = i; j > 0;) {
      F = X[j].apply_force_transpose(F);
      --j;
      H(i, j) = H(j, i) = F.dot(S[j]);
    }
  }
  return H;
}

inline VecX forward_dynamics_joint(const RobotModel& m, const VecX& q, const VecX& qd,
                                   const VecX& tau) {
  const MatX H = mass_matrix(m, q);
  const VecX C = bias(m, q, qd);
  return H.llt().solve(tau - C);
}

// Equations of motion in actuator coordinates: with qd_u = G qd and
// tau = G^T tau_u,   H_u qdd_u + C_u = tau_u   where
//   H_u = G^{-T} H G^{-1},  C_u = G^{-T} (C - H G^{-1} g_u).
// For a constant G the velocity-product term g_u is identically zero.
struct ActuationTerms {
  MatX H_u;
  VecX C_u;
  VecX g_u;
};

inline ActuationTerms to_actuation(const MatX& H, const VecX& C, const MatX& G_inv,
                                   const VecX& g_u = VecX()) {
  ActuationTerms t;
  t.H_u = G_inv.transpose() * H * G_inv;
  t.g_u = g_u.size() ? g_u : VecX::Zero(C.size());
  t.C_u = G_inv.transpose() * (C - H * (G_inv * t.g_u));
  return t;
}

// Joint accelerations under motor torques u, computed through the
// actuator-coordinate equations of motion.
inline VecX forward_dynamics_actuation(const RobotModel& m, const TransmissionSpec& t,
                                       const VecX& q, const VecX& qd, const VecX& u) {
  const MatX H = mass_matrix(m, q);
  const VecX C = bias(m, q, qd);
  const ActuationTerms at = to_actuation(H, C, t.G_inv);
  const VecX qdd_u = at.H_u.llt().solve(u - at.C_u);
  return t.G_inv * qdd_u;
}

inline double kinetic_energy(const RobotModel& m, const VecX& q, const VecX& qd) {
  return 0.5 * qd.dot(mass_matrix(m, q) * qd);
}

// Gravitational potential, payload included; the zero level is the base.
inline double potential_energy(const RobotModel& m, const VecX& q) {
  const KinematicsResult k = fk(m, q);
  double V = 0.0;
  for (int i = 0; i < m.n_joints(); ++i) {
    const Vec3 p_com = k.p_world[i] + k.R_world[i] * m.links[i].com;
    V -= m.links[i].mass * m.gravity.dot(p_com);
  }
  if (m.payload_mass > 0.0) V -= m.payload_mass * m.gravity.dot(k.ee_position);
  return V;
}

}  // namespace beltopt

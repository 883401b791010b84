// spatial.hpp — 6D spatial-vector algebra for rigid-body dynamics.
//
// Conventions follow the usual [angular; linear] stacking. A Transform
// {E, r} maps motion vectors from a parent frame A to a child frame B
// whose origin sits at r (A coordinates) with orientation E (E maps
// A coordinates to B coordinates).
#pragma once

#include <Eigen/Dense>

namespace beltopt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return s;
}

// Rodrigues rotation about a unit axis.
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

struct Transform {
  Mat3 E = Mat3::Identity();  // orientation of B relative to A (A->B coords)
  Vec3 r = Vec3::Zero();      // origin of B expressed in A

  // v_B = X v_A for motion vectors
  Vec6 apply_motion(const Vec6& v) const {
    Vec6 out;
    out.head<3>() = E * v.head<3>();
    out.tail<3>() = E * (v.tail<3>() - r.cross(v.head<3>()));
    return out;
  }

  // f_A = X^T f_B: pull a force expressed in B back to A
  Vec6 apply_force_transpose(const Vec6& f) const {
    Vec6 out;
    const Vec3 n = E.transpose() * f.head<3>();
    const Vec3 l = E.transpose() * f.tail<3>();
    out.head<3>() = n + r.cross(l);
    out.tail<3>() = l;
    return out;
  }

  // Dense 6x6 motion matrix, used for inertia congruences.
  Mat6 motion_matrix() const {
    Mat6 x = Mat6::Zero();
    x.topLeftCorner<3, 3>() = E;
    x.bottomRightCorner<3, 3>() = E;
    x.bottomLeftCorner<3, 3>() = -E * skew(r);
    return x;
  }
};

// Motion cross product v x m
inline Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  Vec6 out;
  const Vec3 w = v.head<3>(), l = v.tail<3>();
  out.head<3>() = w.cross(m.head<3>());
  out.tail<3>() = w.cross(m.tail<3>()) + l.cross(m.head<3>());
  return out;
}

// Force cross product v x* f
inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  Vec6 out;
  const Vec3 w = v.head<3>(), l = v.tail<3>();
  out.head<3>() = w.cross(f.head<3>()) + l.cross(f.tail<3>());
  out.tail<3>() = w.cross(f.tail<3>());
  return out;
}

// Spatial inertia of a body with mass m, COM c and rotational inertia
// about the COM Ic, all expressed at the body frame origin.
inline Mat6 spatial_inertia(double mass, const Vec3& com, const Mat3& inertia_com) {
  const Mat3 c = skew(com);
  Mat6 I;
  I.topLeftCorner<3, 3>() = inertia_com + mass * c * c.transpose();
  I.topRightCorner<3, 3>() = mass * c;
  I.bottomLeftCorner<3, 3>() = mass * c.transpose();
  I.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
  return I;
}

// Express a child-frame spatial inertia in the parent frame,
// X being the child<-parent transform: I_A = X^T I_B X.
inline Mat6 inertia_to_parent(const Transform& X, const Mat6& I_child) {
  const Mat6 x = X.motion_matrix();
  return x.transpose() * I_child * x;
}

}  // namespace beltopt

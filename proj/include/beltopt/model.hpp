// model.hpp — robot description, parallel belt transmission, limit data.
//
// The robot is a serial chain of revolute links; the belt transmission is
// captured by a constant coupling matrix G with qd_u = G * qd (motor
// velocities from joint velocities) and tau = G^T * tau_u (joint torques
// from motor torques).
#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "beltopt/spatial.hpp"

namespace beltopt {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidDesignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularTransmissionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One revolute link of the chain. joint_origin_* give the pose of the
// joint frame in the parent joint frame at zero joint angle.
struct LinkSpec {
  std::string name;
  int parent = -1;               // -1 = base
  Vec3 joint_axis = Vec3::UnitZ();
  Mat3 joint_origin_R = Mat3::Identity();
  Vec3 joint_origin_p = Vec3::Zero();
  double mass = 0.0;             // kg
  Vec3 com = Vec3::Zero();       // m, in the link frame
  Mat3 inertia = Mat3::Zero();   // kg m^2, about the COM

  // Child<-parent motion transform at joint angle q.
  Transform joint_transform(double q) const {
    Transform X;
    X.E = (joint_origin_R * axis_angle(joint_axis, q)).transpose();
    X.r = joint_origin_p;
    return X;
  }
};

struct RobotModel {
  std::vector<LinkSpec> links;
  Vec3 gravity{0.0, 0.0, -9.81};       // m/s^2
  VecX q_min, q_max;                   // rad, joint position box
  VecX qd_u_min, qd_u_max;             // rad/s, actuator velocity box
  VecX tau_u_min, tau_u_max;           // Nm, motor torque box
  double payload_mass = 0.0;           // kg, point mass at the EE frame
  Vec3 ee_offset = Vec3::Zero();       // EE frame origin in the last link frame

  int n_joints() const { return static_cast<int>(links.size()); }

  RobotModel with_payload(double mass) const {
    RobotModel m = *this;
    m.payload_mass = mass;
    return m;
  }
};

// --- coupling matrix -------------------------------------------------------

// G for gear ratios [g1, g2, g3, g4]:
//
//   [ g1  0   0   0  ]
//   [ g2  g2  0   0  ]
//   [ 1   g3  g4  g4 ]
//   [ 1   g3  g4 -g4 ]
//
// Rows 3/4 are the differential wrist: the two motors drive joint 3
// through their sum and joint 4 through their difference.
inline Mat4 build_G(const Vec4& gear_ratios) {
  for (int i = 0; i < 4; ++i) {
    if (!(gear_ratios[i] > 0.0)) {
      std::ostringstream os;
      os << "invalid design: gear ratio g" << (i + 1) << " = " << gear_ratios[i]
         << " must be positive";
      throw InvalidDesignError(os.str());
    }
  }
  const double g1 = gear_ratios[0], g2 = gear_ratios[1];
  const double g3 = gear_ratios[2], g4 = gear_ratios[3];
  Mat4 G;
  G << g1, 0.0, 0.0, 0.0,
       g2, g2, 0.0, 0.0,
       1.0, g3, g4, g4,
       1.0, g3, g4, -g4;
  return G;
}

struct TransmissionSpec {
  Vec4 gear_ratios{6.0, 3.0, 1.0, 1.0};
  Vec4 bounds_lo{1.0, 1.0, 1.0, 1.0};
  Vec4 bounds_hi{9.0, 9.0, 3.0, 3.0};
  Mat4 G = Mat4::Identity();
  Mat4 G_inv = Mat4::Identity();
  Mat4 G_inv_T = Mat4::Identity();

  static TransmissionSpec from_gear_ratios(const Vec4& g,
                                           const Vec4& lo = Vec4(1.0, 1.0, 1.0, 1.0),
                                           const Vec4& hi = Vec4(9.0, 9.0, 3.0, 3.0)) {
    TransmissionSpec t;
    t.gear_ratios = g;
    t.bounds_lo = lo;
    t.bounds_hi = hi;
    t.G = build_G(g);
    Eigen::FullPivLU<Mat4> lu(t.G);
    if (!lu.isInvertible()) {
      throw SingularTransmissionError("singular transmission: G is not invertible");
    }
    t.G_inv = lu.inverse();
    t.G_inv_T = t.G_inv.transpose();
    return t;
  }

  static TransmissionSpec identity() {
    TransmissionSpec t;
    t.gear_ratios = Vec4::Ones();
    t.G = Mat4::Identity();
    t.G_inv = Mat4::Identity();
    t.G_inv_T = Mat4::Identity();
    return t;
  }

  bool within_bounds() const {
    return (gear_ratios.array() >= bounds_lo.array()).all() &&
           (gear_ratios.array() <= bounds_hi.array()).all();
  }

  // g3 <= g2 < g1
  bool ordering_ok() const {
    return gear_ratios[2] <= gear_ratios[1] && gear_ratios[1] < gear_ratios[0];
  }
};

struct JointLimitBoxes {
  VecX tau_min, tau_max;  // joint torque box, G^T tau_u
  VecX qd_min, qd_max;    // joint velocity box, G^{-1} qd_u
};

// Joint-space boxes induced by the actuator limits. The products are taken
// exactly as the joint-space formulation uses them, so symmetric motor
// bounds collapse the differential joint's torque range to [0, 0].
inline JointLimitBoxes joint_limits_from_actuation(const MatX& G,
                                                   const VecX& tau_u_min,
                                                   const VecX& tau_u_max,
                                                   const VecX& qd_u_min,
                                                   const VecX& qd_u_max) {
  Eigen::FullPivLU<MatX> lu(G);
  if (!lu.isInvertible()) {
    throw SingularTransmissionError("singular transmission: G is not invertible");
  }
  JointLimitBoxes b;
  b.tau_min = G.transpose() * tau_u_min;
  b.tau_max = G.transpose() * tau_u_max;
  const MatX G_inv = lu.inverse();
  b.qd_min = G_inv * qd_u_min;
  b.qd_max = G_inv * qd_u_max;
  return b;
}

// --- model file ------------------------------------------------------------

constexpr int kModelSchemaVersion = 1;

struct Diagnostic {
  std::string field;
  std::string message;
};

struct ModelFile {
  RobotModel robot;
  TransmissionSpec transmission;
};

struct ValidationError : std::runtime_error {
  std::vector<Diagnostic> diagnostics;
  explicit ValidationError(std::vector<Diagnostic> diags)
      : std::runtime_error(format(diags)), diagnostics(std::move(diags)) {}

  static std::string format(const std::vector<Diagnostic>& diags) {
    std::ostringstream os;
    os << "model validation failed with " << diags.size() << " violation(s):";
    for (const auto& d : diags) os << "\n  " << d.field << ": " << d.message;
    return os.str();
  }
};

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline VecX vecx_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected array");
  VecX v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

inline Mat3 mat3_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ParseError(where + ": expected 3x3 array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) throw ParseError(where + ": expected 3x3 array");
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// Fixed-axis XYZ roll-pitch-yaw.
inline Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace detail

inline ModelFile model_from_json(const nlohmann::json& j) {
  ModelFile mf;
  RobotModel& m = mf.robot;

  if (!j.contains("schema_version")) throw ParseError("missing schema_version");
  if (j.at("schema_version").get<int>() != kModelSchemaVersion) {
    throw ParseError("unsupported schema_version " + j.at("schema_version").dump());
  }
  if (!j.contains("links") || !j.at("links").is_array() || j.at("links").empty()) {
    throw ParseError("missing or empty links array");
  }

  m.gravity = detail::vec3_from_json(j.at("gravity"), "gravity");
  int idx = 0;
  for (const auto& lj : j.at("links")) {
    LinkSpec l;
    l.name = lj.value("name", "link" + std::to_string(idx));
    l.parent = lj.value("parent", idx - 1);
    l.joint_axis = detail::vec3_from_json(lj.at("joint_axis"), l.name + ".joint_axis");
    if (lj.contains("joint_origin")) {
      const auto& oj = lj.at("joint_origin");
      if (oj.contains("translation")) {
        l.joint_origin_p = detail::vec3_from_json(oj.at("translation"), l.name + ".joint_origin");
      }
      if (oj.contains("rpy")) {
        l.joint_origin_R = detail::rpy_to_matrix(detail::vec3_from_json(oj.at("rpy"), l.name + ".rpy"));
      }
    }
    l.mass = lj.at("mass").get<double>();
    l.com = detail::vec3_from_json(lj.at("com"), l.name + ".com");
    l.inertia = detail::mat3_from_json(lj.at("inertia"), l.name + ".inertia");
    m.links.push_back(std::move(l));
    ++idx;
  }

  if (j.contains("end_effector")) {
    m.ee_offset = detail::vec3_from_json(j.at("end_effector").at("translation"),
                                         "end_effector.translation");
  }

  const auto& lim = j.at("limits");
  m.q_min = detail::vecx_from_json(lim.at("q_min"), "limits.q_min");
  m.q_max = detail::vecx_from_json(lim.at("q_max"), "limits.q_max");
  m.qd_u_min = detail::vecx_from_json(lim.at("qd_u_min"), "limits.qd_u_min");
  m.qd_u_max = detail::vecx_from_json(lim.at("qd_u_max"), "limits.qd_u_max");
  m.tau_u_min = detail::vecx_from_json(lim.at("tau_u_min"), "limits.tau_u_min");
  m.tau_u_max = detail::vecx_from_json(lim.at("tau_u_max"), "limits.tau_u_max");

  m.payload_mass = j.value("payload_mass", 0.0);

  const auto& tj = j.at("transmission");
  TransmissionSpec& t = mf.transmission;
  const VecX g = detail::vecx_from_json(tj.at("gear_ratios"), "transmission.gear_ratios");
  if (g.size() != 4) throw ParseError("transmission.gear_ratios: expected 4 entries");
  t.gear_ratios = g;
  if (tj.contains("bounds_lo")) {
    t.bounds_lo = detail::vecx_from_json(tj.at("bounds_lo"), "transmission.bounds_lo");
  }
  if (tj.contains("bounds_hi")) {
    t.bounds_hi = detail::vecx_from_json(tj.at("bounds_hi"), "transmission.bounds_hi");
  }
  return mf;
}

// All invariant checks; returns every violation, not just the first.
inline std::vector<Diagnostic> validate_model(const ModelFile& mf) {
  std::vector<Diagnostic> diags;
  const RobotModel& m = mf.robot;
  const int n = m.n_joints();

  auto check_box = [&](const VecX& lo, const VecX& hi, const std::string& name, int dim) {
    if (lo.size() != dim || hi.size() != dim) {
      diags.push_back({name, "expected " + std::to_string(dim) + " entries"});
      return;
    }
    for (int i = 0; i < dim; ++i) {
      if (!(lo[i] < hi[i])) {
        diags.push_back({name + "[" + std::to_string(i) + "]",
                         "lower bound must be strictly below upper bound"});
      }
    }
  };

  for (int i = 0; i < n; ++i) {
    const LinkSpec& l = m.links[i];
    const std::string path = "links[" + std::to_string(i) + "] (" + l.name + ")";
    if (l.parent != i - 1) {
      diags.push_back({path + ".parent", "serial chain requires parent = index - 1"});
    }
    if (std::abs(l.joint_axis.norm() - 1.0) > 1e-12) {
      diags.push_back({path + ".joint_axis", "axis must have unit norm"});
    }
    if (!(l.mass > 0.0)) {
      diags.push_back({path + ".mass", "mass must be positive"});
    }
    if ((l.inertia - l.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      diags.push_back({path + ".inertia", "inertia tensor must be symmetric"});
    } else {
      Eigen::SelfAdjointEigenSolver<Mat3> es(l.inertia);
      if (es.eigenvalues().minCoeff() < -1e-12) {
        diags.push_back({path + ".inertia", "inertia tensor must be positive semidefinite"});
      }
    }
  }

  check_box(m.q_min, m.q_max, "limits.q", n);
  check_box(m.qd_u_min, m.qd_u_max, "limits.qd_u", n);
  check_box(m.tau_u_min, m.tau_u_max, "limits.tau_u", n);

  if (!m.gravity.allFinite()) diags.push_back({"gravity", "entries must be finite"});
  if (m.payload_mass < 0.0) diags.push_back({"payload_mass", "must be >= 0"});

  const TransmissionSpec& t = mf.transmission;
  for (int i = 0; i < 4; ++i) {
    if (t.gear_ratios[i] < t.bounds_lo[i] || t.gear_ratios[i] > t.bounds_hi[i]) {
      diags.push_back({"transmission.gear_ratios[" + std::to_string(i) + "]",
                       "outside bounds [" + std::to_string(t.bounds_lo[i]) + ", " +
                           std::to_string(t.bounds_hi[i]) + "]"});
    }
  }
  if (!t.ordering_ok()) {
    diags.push_back({"transmission.gear_ratios", "ordering constraint g3 <= g2 < g1 violated"});
  }
  return diags;
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file " + path + ": " + e.what());
  }
  ModelFile mf;
  try {
    mf = model_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file " + path + ": " + e.what());
  }
  auto diags = validate_model(mf);
  if (!diags.empty()) throw ValidationError(std::move(diags));
  mf.transmission = TransmissionSpec::from_gear_ratios(
      mf.transmission.gear_ratios, mf.transmission.bounds_lo, mf.transmission.bounds_hi);
  return mf;
}

}  // namespace beltopt

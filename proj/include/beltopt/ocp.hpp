// ocp.hpp — direct transcription of the point-to-point motion problem.
//
// The horizon [0, T] is split into N steps; decision variables are all node
// states followed by all step controls, z = [x_0 .. x_N, u_0 .. u_{N-1}].
// Equality constraints are the N dynamics defects plus the two boundary
// conditions. Box constraints on q, qd and u are plain variable bounds.
// The problem can be posed in joint space (controls are joint torques,
// bounded by the transmission-mapped boxes) or in actuation space (controls
// are motor torques, bounded by the raw motor limits).
#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <json.hpp>

#include "beltopt/dynamics.hpp"
#include "beltopt/model.hpp"

namespace beltopt {

using SpMat = Eigen::SparseMatrix<double>;

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Space { joint, actuation };
enum class Integrator { semi_implicit_euler, rk4 };

inline std::string to_string(Space s) { return s == Space::joint ? "joint" : "actuation"; }
inline Space space_from_string(const std::string& s) {
  if (s == "joint") return Space::joint;
  if (s == "actuation") return Space::actuation;
  throw std::invalid_argument("unknown space '" + s + "' (expected joint|actuation)");
}

struct OcProblemSpec {
  Space space = Space::joint;
  double T = 0.7;   // s
  int N = 50;
  VecX Q_diag;      // 2n state weights
  VecX R_diag;      // m control weights
  VecX rho_diag;    // Cartesian penalty weights, one per penalized coordinate
  std::vector<int> cart_coords;  // end-effector coordinate indices (0=x,1=y,2=z)
  VecX cart_lo, cart_hi;         // m, per penalized coordinate
  bool cart_penalty_terminal = true;  // include the Cartesian penalty at node N
  VecX x_init, x_final;          // 2n boundary states
  Integrator integrator = Integrator::semi_implicit_euler;

  double h() const { return T / N; }
};

// Rest-to-rest swing used by the demos and the study defaults.
inline OcProblemSpec default_ocp_spec(Space space = Space::joint) {
  OcProblemSpec s;
  s.space = space;
  s.Q_diag = VecX::Constant(8, 1e-2);
  s.R_diag = VecX::Constant(4, 1e-3);
  s.rho_diag = VecX::Constant(2, 1e3);
  s.cart_coords = {0, 2};
  s.cart_lo = (VecX(2) << -0.7, -0.2).finished();
  s.cart_hi = (VecX(2) << 0.7, 0.6).finished();
  s.x_init = (VecX(8) << 0.0, 0.6, -1.2, 0.0, 0.0, 0.0, 0.0, 0.0).finished();
  s.x_final = (VecX(8) << 1.2, 0.2, -0.8, 0.0, 0.0, 0.0, 0.0, 0.0).finished();
  return s;
}

struct Trajectory {
  Space space = Space::joint;
  VecX times;      // N+1
  MatX states;     // (N+1) x 2n
  MatX controls;   // N x m

  int nodes() const { return static_cast<int>(times.size()); }
};

// --- integrator -------------------------------------------------------------

namespace detail {

inline VecX accel(const RobotModel& model, const TransmissionSpec& trans, Space space,
                  const VecX& q, const VecX& qd, const VecX& u) {
  return space == Space::joint ? forward_dynamics_joint(model, q, qd, u)
                               : forward_dynamics_actuation(model, trans, q, qd, u);
}

}  // namespace detail

// One integration step x -> x(+h) under zero-order-hold control u.
inline VecX step(const RobotModel& model, const TransmissionSpec& trans, Space space,
                 const VecX& x, const VecX& u, double h,
                 Integrator integrator = Integrator::semi_implicit_euler) {
  const int n = model.n_joints();
  const VecX q = x.head(n), qd = x.tail(n);
  VecX out(2 * n);
  if (integrator == Integrator::semi_implicit_euler) {
    const VecX qdd = detail::accel(model, trans, space, q, qd, u);
    out.tail(n) = qd + h * qdd;
    out.head(n) = q + h * out.tail(n);
  } else {
    auto rhs = [&](const VecX& xs) {
      VecX dx(2 * n);
      dx.head(n) = xs.tail(n);
      dx.tail(n) = detail::accel(model, trans, space, xs.head(n), xs.tail(n), u);
      return dx;
    };
    const VecX k1 = rhs(x);
    const VecX k2 = rhs(x + 0.5 * h * k1);
    const VecX k3 = rhs(x + 0.5 * h * k2);
    const VecX k4 = rhs(x + h * k3);
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!out.allFinite()) {
    throw NumericalError("integration step produced a non-finite state");
  }
  return out;
}

// Central-difference sensitivities of one step: A = dx+/dx (2n x 2n),
// B = dx+/du (2n x m).
inline void step_jacobian(const RobotModel& model, const TransmissionSpec& trans, Space space,
                          const VecX& x, const VecX& u, double h, Integrator integrator,
                          MatX& A, MatX& B, double fd_step = 1e-6) {
  const int nx = static_cast<int>(x.size());
  const int nu = static_cast<int>(u.size());
  A.resize(nx, nx);
  B.resize(nx, nu);
  VecX xp = x, up = u;
  for (int i = 0; i < nx; ++i) {
    xp[i] = x[i] + fd_step;
    const VecX fplus = step(model, trans, space, xp, u, h, integrator);
    xp[i] = x[i] - fd_step;
    const VecX fminus = step(model, trans, space, xp, u, h, integrator);
    xp[i] = x[i];
    A.col(i) = (fplus - fminus) / (2.0 * fd_step);
  }
  for (int i = 0; i < nu; ++i) {
    up[i] = u[i] + fd_step;
    const VecX fplus = step(model, trans, space, x, up, h, integrator);
    up[i] = u[i] - fd_step;
    const VecX fminus = step(model, trans, space, x, up, h, integrator);
    up[i] = u[i];
    B.col(i) = (fplus - fminus) / (2.0 * fd_step);
  }
}

// --- cost -------------------------------------------------------------------

// Signed violation of the Cartesian box for the penalized coordinates:
// zero inside, distance to the nearer face outside.
inline VecX cart_violation(const RobotModel& model, const OcProblemSpec& spec, const VecX& q) {
  const int nc = static_cast<int>(spec.cart_coords.size());
  VecX c = VecX::Zero(nc);
  if (nc == 0) return c;
  const Vec3 p = ee_position(model, q);
  for (int i = 0; i < nc; ++i) {
    const double v = p[spec.cart_coords[i]];
    if (v > spec.cart_hi[i]) c[i] = v - spec.cart_hi[i];
    else if (v < spec.cart_lo[i]) c[i] = v - spec.cart_lo[i];
  }
  return c;
}

inline double cost(const RobotModel& model, const OcProblemSpec& spec, const Trajectory& traj) {
  const int N = spec.N;
  const int n = model.n_joints();
  if (traj.states.rows() != N + 1 || traj.controls.rows() != N) {
    throw std::invalid_argument("trajectory node count does not match problem spec");
  }
  if (traj.states.cols() != 2 * n || traj.controls.cols() != spec.R_diag.size()) {
    throw std::invalid_argument("trajectory dimensions do not match problem spec");
  }
  double J = 0.0;
  for (int k = 0; k < N; ++k) {
    const VecX x = traj.states.row(k);
    const VecX u = traj.controls.row(k);
    J += x.dot(spec.Q_diag.asDiagonal() * x);
    J += u.dot(spec.R_diag.asDiagonal() * u);
  }
  const int pen_last = spec.cart_penalty_terminal ? N : N - 1;
  for (int k = 0; k <= pen_last; ++k) {
    const VecX x = traj.states.row(k);
    const VecX c = cart_violation(model, spec, x.head(n));
    J += c.dot(spec.rho_diag.asDiagonal() * c);
  }
  return J;
}

// --- transcription ----------------------------------------------------------

// The transcribed NLP. Evaluation callables are pure; one Nlp instance can
// be shared by concurrent readers but is typically built per candidate.
class Nlp {
 public:
  Nlp(const RobotModel& model, const TransmissionSpec& trans, const OcProblemSpec& spec)
      : model_(model), trans_(trans), spec_(spec), n_(model.n_joints()),
        m_(static_cast<int>(spec.R_diag.size())), N_(spec.N) {
    if (spec_.x_init.size() != 2 * n_ || spec_.x_final.size() != 2 * n_) {
      throw std::invalid_argument("boundary states must have dimension 2n");
    }
    n_vars_ = (N_ + 1) * 2 * n_ + N_ * m_;
    n_eq_ = N_ * 2 * n_ + 4 * n_;

    const JointLimitBoxes boxes = joint_limits_from_actuation(
        trans_.G, model_.tau_u_min, model_.tau_u_max, model_.qd_u_min, model_.qd_u_max);
    qd_lo_ = boxes.qd_min.cwiseMin(boxes.qd_max);
    qd_hi_ = boxes.qd_min.cwiseMax(boxes.qd_max);
    if (spec_.space == Space::joint) {
      u_lo_ = boxes.tau_min.cwiseMin(boxes.tau_max);
      u_hi_ = boxes.tau_min.cwiseMax(boxes.tau_max);
    } else {
      u_lo_ = model_.tau_u_min;
      u_hi_ = model_.tau_u_max;
    }

    check_boundary_state(spec_.x_init, "x_init");
    check_boundary_state(spec_.x_final, "x_final");

    z_lo_.resize(n_vars_);
    z_hi_.resize(n_vars_);
    for (int k = 0; k <= N_; ++k) {
      z_lo_.segment(x_index(k), n_) = model_.q_min;
      z_hi_.segment(x_index(k), n_) = model_.q_max;
      z_lo_.segment(x_index(k) + n_, n_) = qd_lo_;
      z_hi_.segment(x_index(k) + n_, n_) = qd_hi_;
    }
    for (int k = 0; k < N_; ++k) {
      z_lo_.segment(u_index(k), m_) = u_lo_;
      z_hi_.segment(u_index(k), m_) = u_hi_;
    }
  }

  int n_vars() const { return n_vars_; }
  int n_eq() const { return n_eq_; }
  int n_joints() const { return n_; }
  int n_controls() const { return m_; }
  int steps() const { return N_; }
  const VecX& z_lo() const { return z_lo_; }
  const VecX& z_hi() const { return z_hi_; }
  const RobotModel& model() const { return model_; }
  const TransmissionSpec& transmission() const { return trans_; }
  const OcProblemSpec& spec() const { return spec_; }

  int x_index(int k) const { return k * 2 * n_; }
  int u_index(int k) const { return (N_ + 1) * 2 * n_ + k * m_; }

  VecX pack(const Trajectory& traj) const {
    VecX z(n_vars_);
    for (int k = 0; k <= N_; ++k) z.segment(x_index(k), 2 * n_) = traj.states.row(k);
    for (int k = 0; k < N_; ++k) z.segment(u_index(k), m_) = traj.controls.row(k);
    return z;
  }

  Trajectory unpack(const VecX& z) const {
    Trajectory traj;
    traj.space = spec_.space;
    traj.times = VecX::LinSpaced(N_ + 1, 0.0, spec_.T);
    traj.states.resize(N_ + 1, 2 * n_);
    traj.controls.resize(N_, m_);
    for (int k = 0; k <= N_; ++k) traj.states.row(k) = z.segment(x_index(k), 2 * n_);
    for (int k = 0; k < N_; ++k) traj.controls.row(k) = z.segment(u_index(k), m_);
    return traj;
  }

  double objective(const VecX& z) const {
    double J = 0.0;
    for (int k = 0; k < N_; ++k) {
      const auto x = z.segment(x_index(k), 2 * n_);
      const auto u = z.segment(u_index(k), m_);
      J += x.dot(spec_.Q_diag.asDiagonal() * x);
      J += u.dot(spec_.R_diag.asDiagonal() * u);
    }
    const int pen_last = spec_.cart_penalty_terminal ? N_ : N_ - 1;
    for (int k = 0; k <= pen_last; ++k) {
      const VecX c = cart_violation(model_, spec_, z.segment(x_index(k), n_));
      J += c.dot(spec_.rho_diag.asDiagonal() * c);
    }
    return J;
  }

  VecX objective_gradient(const VecX& z) const {
    VecX g = VecX::Zero(n_vars_);
    for (int k = 0; k < N_; ++k) {
      const auto x = z.segment(x_index(k), 2 * n_);
      const auto u = z.segment(u_index(k), m_);
      g.segment(x_index(k), 2 * n_) = 2.0 * (spec_.Q_diag.asDiagonal() * x);
      g.segment(u_index(k), m_) = 2.0 * (spec_.R_diag.asDiagonal() * u);
    }
    const int pen_last = spec_.cart_penalty_terminal ? N_ : N_ - 1;
    for (int k = 0; k <= pen_last; ++k) {
      const VecX q = z.segment(x_index(k), n_);
      const VecX c = cart_violation(model_, spec_, q);
      if (c.isZero(0.0)) continue;
      const MatX Jee = ee_jacobian(model_, q);
      for (size_t i = 0; i < spec_.cart_coords.size(); ++i) {
        if (c[static_cast<int>(i)] == 0.0) continue;
        g.segment(x_index(k), n_) += 2.0 * spec_.rho_diag[static_cast<int>(i)] *
                                     c[static_cast<int>(i)] *
                                     Jee.row(spec_.cart_coords[i]).transpose();
      }
    }
    return g;
  }

  // Gauss-Newton model of the objective Hessian (exact for the quadratic
  // terms, first-order for the Cartesian penalty).
  SpMat objective_gn_hessian(const VecX& z) const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n_vars_ + N_ * n_ * n_);
    for (int k = 0; k < N_; ++k) {
      for (int i = 0; i < 2 * n_; ++i) {
        trips.emplace_back(x_index(k) + i, x_index(k) + i, 2.0 * spec_.Q_diag[i]);
      }
      for (int i = 0; i < m_; ++i) {
        trips.emplace_back(u_index(k) + i, u_index(k) + i, 2.0 * spec_.R_diag[i]);
      }
    }
    const int pen_last = spec_.cart_penalty_terminal ? N_ : N_ - 1;
    for (int k = 0; k <= pen_last; ++k) {
      const VecX q = z.segment(x_index(k), n_);
      const VecX c = cart_violation(model_, spec_, q);
      if (c.isZero(0.0)) continue;
      const MatX Jee = ee_jacobian(model_, q);
      MatX Hk = MatX::Zero(n_, n_);
      for (size_t i = 0; i < spec_.cart_coords.size(); ++i) {
        if (c[static_cast<int>(i)] == 0.0) continue;
        const VecX row = Jee.row(spec_.cart_coords[i]).transpose();
        Hk += 2.0 * spec_.rho_diag[static_cast<int>(i)] * row * row.transpose();
      }
      for (int r = 0; r < n_; ++r) {
        for (int cidx = 0; cidx < n_; ++cidx) {
          if (Hk(r, cidx) != 0.0) trips.emplace_back(x_index(k) + r, x_index(k) + cidx, Hk(r, cidx));
        }
      }
    }
    SpMat H(n_vars_, n_vars_);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  }

  // Stacked equalities: defect rows x_{k+1} - f(x_k, u_k) for k = 0..N-1,
  // then x_0 - x_init, then x_N - x_final.
  VecX constraints(const VecX& z) const {
    VecX c(n_eq_);
    const double h = spec_.h();
    for (int k = 0; k < N_; ++k) {
      const VecX f = step(model_, trans_, spec_.space, z.segment(x_index(k), 2 * n_),
                          z.segment(u_index(k), m_), h, spec_.integrator);
      c.segment(k * 2 * n_, 2 * n_) = z.segment(x_index(k + 1), 2 * n_) - f;
    }
    c.segment(N_ * 2 * n_, 2 * n_) = z.segment(x_index(0), 2 * n_) - spec_.x_init;
    c.segment(N_ * 2 * n_ + 2 * n_, 2 * n_) = z.segment(x_index(N_), 2 * n_) - spec_.x_final;
    return c;
  }

  SpMat constraint_jacobian(const VecX& z) const {
    const double h = spec_.h();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(N_ * (2 * n_) * (2 * n_ + m_ + 1) + 4 * n_);
    MatX A, B;
    for (int k = 0; k < N_; ++k) {
      step_jacobian(model_, trans_, spec_.space, z.segment(x_index(k), 2 * n_),
                    z.segment(u_index(k), m_), h, spec_.integrator, A, B);
      const int row0 = k * 2 * n_;
      for (int r = 0; r < 2 * n_; ++r) {
        for (int cc = 0; cc < 2 * n_; ++cc) {
          if (A(r, cc) != 0.0) trips.emplace_back(row0 + r, x_index(k) + cc, -A(r, cc));
        }
        for (int cc = 0; cc < m_; ++cc) {
          if (B(r, cc) != 0.0) trips.emplace_back(row0 + r, u_index(k) + cc, -B(r, cc));
        }
        trips.emplace_back(row0 + r, x_index(k + 1) + r, 1.0);
      }
    }
    for (int i = 0; i < 2 * n_; ++i) {
      trips.emplace_back(N_ * 2 * n_ + i, x_index(0) + i, 1.0);
      trips.emplace_back(N_ * 2 * n_ + 2 * n_ + i, x_index(N_) + i, 1.0);
    }
    SpMat J(n_eq_, n_vars_);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
  }

  // Re-simulates from x_init using only the controls in z and reports the
  // largest deviation from the stored node states.
  double rollout_deviation(const VecX& z) const {
    const double h = spec_.h();
    VecX x = spec_.x_init;
    double dev = (x - z.segment(x_index(0), 2 * n_)).cwiseAbs().maxCoeff();
    for (int k = 0; k < N_; ++k) {
      x = step(model_, trans_, spec_.space, x, z.segment(u_index(k), m_), h, spec_.integrator);
      dev = std::max(dev, (x - z.segment(x_index(k + 1), 2 * n_)).cwiseAbs().maxCoeff());
    }
    return dev;
  }

 private:
  void check_boundary_state(const VecX& x, const std::string& name) const {
    const double tol = 1e-9;
    for (int i = 0; i < n_; ++i) {
      if (x[i] < model_.q_min[i] - tol || x[i] > model_.q_max[i] + tol) {
        throw std::invalid_argument(name + ": q[" + std::to_string(i) +
                                    "] outside the joint position box");
      }
      if (x[n_ + i] < qd_lo_[i] - tol || x[n_ + i] > qd_hi_[i] + tol) {
        throw std::invalid_argument(name + ": qd[" + std::to_string(i) +
                                    "] outside the joint velocity box");
      }
    }
  }

  RobotModel model_;
  TransmissionSpec trans_;
  OcProblemSpec spec_;
  int n_, m_, N_;
  int n_vars_ = 0, n_eq_ = 0;
  VecX z_lo_, z_hi_;
  VecX qd_lo_, qd_hi_, u_lo_, u_hi_;
};

inline Nlp build_nlp(const RobotModel& model, const TransmissionSpec& trans,
                     const OcProblemSpec& spec) {
  return Nlp(model, trans, spec);
}

// Linear state interpolation with bound-clipped gravity-compensation controls.
inline Trajectory initial_guess(const RobotModel& model, const TransmissionSpec& trans,
                                const OcProblemSpec& spec) {
  const int n = model.n_joints();
  const int m = static_cast<int>(spec.R_diag.size());
  const Nlp nlp(model, trans, spec);
  Trajectory traj;
  traj.space = spec.space;
  traj.times = VecX::LinSpaced(spec.N + 1, 0.0, spec.T);
  traj.states.resize(spec.N + 1, 2 * n);
  traj.controls.resize(spec.N, m);
  for (int k = 0; k <= spec.N; ++k) {
    const double a = static_cast<double>(k) / spec.N;
    traj.states.row(k) = (1.0 - a) * spec.x_init + a * spec.x_final;
  }
  for (int k = 0; k < spec.N; ++k) {
    const VecX q = traj.states.row(k).head(n);
    VecX u = bias(model, q, VecX::Zero(n));
    if (spec.space == Space::actuation) u = trans.G_inv_T * u;
    const VecX lo = nlp.z_lo().segment(nlp.u_index(k), m);
    const VecX hi = nlp.z_hi().segment(nlp.u_index(k), m);
    traj.controls.row(k) = u.cwiseMax(lo).cwiseMin(hi);
  }
  return traj;
}

// --- serialization ----------------------------------------------------------

inline nlohmann::ordered_json trajectory_to_json(const Trajectory& traj,
                                                 const OcProblemSpec& spec) {
  nlohmann::ordered_json j;
  j["space"] = to_string(traj.space);
  j["times"] = std::vector<double>(traj.times.data(), traj.times.data() + traj.times.size());
  auto mat_to_rows = [](const MatX& M) {
    std::vector<std::vector<double>> rows(M.rows(), std::vector<double>(M.cols()));
    for (int r = 0; r < M.rows(); ++r) {
      for (int c = 0; c < M.cols(); ++c) rows[r][c] = M(r, c);
    }
    return rows;
  };
  j["states"] = mat_to_rows(traj.states);
  j["controls"] = mat_to_rows(traj.controls);
  nlohmann::ordered_json sj;
  sj["space"] = to_string(spec.space);
  sj["T"] = spec.T;
  sj["N"] = spec.N;
  sj["Q_diag"] = std::vector<double>(spec.Q_diag.data(), spec.Q_diag.data() + spec.Q_diag.size());
  sj["R_diag"] = std::vector<double>(spec.R_diag.data(), spec.R_diag.data() + spec.R_diag.size());
  sj["rho_diag"] =
      std::vector<double>(spec.rho_diag.data(), spec.rho_diag.data() + spec.rho_diag.size());
  sj["cart_coords"] = spec.cart_coords;
  sj["cart_lo"] =
      std::vector<double>(spec.cart_lo.data(), spec.cart_lo.data() + spec.cart_lo.size());
  sj["cart_hi"] =
      std::vector<double>(spec.cart_hi.data(), spec.cart_hi.data() + spec.cart_hi.size());
  sj["cart_penalty_terminal"] = spec.cart_penalty_terminal;
  sj["x_init"] =
      std::vector<double>(spec.x_init.data(), spec.x_init.data() + spec.x_init.size());
  sj["x_final"] =
      std::vector<double>(spec.x_final.data(), spec.x_final.data() + spec.x_final.size());
  sj["integrator"] =
      spec.integrator == Integrator::semi_implicit_euler ? "semi_implicit_euler" : "rk4";
  j["problem"] = sj;
  return j;
}

inline OcProblemSpec ocp_spec_from_json(const nlohmann::json& j) {
  OcProblemSpec s;
  s.space = space_from_string(j.at("space").get<std::string>());
  s.T = j.at("T").get<double>();
  s.N = j.at("N").get<int>();
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return VecX(Eigen::Map<const VecX>(v.data(), static_cast<int>(v.size())));
  };
  s.Q_diag = vec(j.at("Q_diag"));
  s.R_diag = vec(j.at("R_diag"));
  s.rho_diag = vec(j.at("rho_diag"));
  s.cart_coords = j.at("cart_coords").get<std::vector<int>>();
  s.cart_lo = vec(j.at("cart_lo"));
  s.cart_hi = vec(j.at("cart_hi"));
  s.cart_penalty_terminal = j.at("cart_penalty_terminal").get<bool>();
  s.x_init = vec(j.at("x_init"));
  s.x_final = vec(j.at("x_final"));
  const std::string integ = j.at("integrator").get<std::string>();
  if (integ == "semi_implicit_euler") s.integrator = Integrator::semi_implicit_euler;
  else if (integ == "rk4") s.integrator = Integrator::rk4;
  else throw ParseError("unknown integrator '" + integ + "'");
  return s;
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory traj;
  traj.space = space_from_string(j.at("space").get<std::string>());
  const auto times = j.at("times").get<std::vector<double>>();
  traj.times = Eigen::Map<const VecX>(times.data(), static_cast<int>(times.size()));
  auto rows_to_mat = [](const nlohmann::json& rows) {
    MatX M(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (int r = 0; r < M.rows(); ++r) {
      for (int c = 0; c < M.cols(); ++c) M(r, c) = rows[r][c].get<double>();
    }
    return M;
  };
  traj.states = rows_to_mat(j.at("states"));
  traj.controls = rows_to_mat(j.at("controls"));
  return traj;
}

// One row per node: t, q.., qd.., u.. (the last node has no control; its
// control cells are left empty).
inline std::string trajectory_to_csv(const Trajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  const int n2 = static_cast<int>(traj.states.cols());
  const int n = n2 / 2;
  const int m = static_cast<int>(traj.controls.cols());
  os << "t";
  for (int i = 0; i < n; ++i) os << ",q" << (i + 1);
  for (int i = 0; i < n; ++i) os << ",qd" << (i + 1);
  for (int i = 0; i < m; ++i) os << ",u" << (i + 1);
  os << "\n";
  for (int k = 0; k < traj.nodes(); ++k) {
    os << traj.times[k];
    for (int c = 0; c < n2; ++c) os << "," << traj.states(k, c);
    for (int c = 0; c < m; ++c) {
      os << ",";
      if (k < traj.controls.rows()) os << traj.controls(k, c);
    }
    os << "\n";
  }
  return os.str();
}

inline Trajectory trajectory_from_csv(const std::string& text, Space space) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty trajectory CSV");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  int n = 0, m = 0;
  for (const auto& h : header) {
    if (h.rfind("qd", 0) == 0) ++n;
    else if (h.rfind("u", 0) == 0) ++m;
  }
  if (n == 0 || header.size() != 1 + 2 * static_cast<size_t>(n) + static_cast<size_t>(m)) {
    throw ParseError("malformed trajectory CSV header");
  }
  std::vector<double> times;
  std::vector<std::vector<double>> states, controls;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    cells.resize(header.size());
    times.push_back(std::stod(cells[0]));
    std::vector<double> x(2 * n);
    for (int i = 0; i < 2 * n; ++i) x[i] = std::stod(cells[1 + i]);
    states.push_back(std::move(x));
    if (!cells[1 + 2 * n].empty()) {
      std::vector<double> u(m);
      for (int i = 0; i < m; ++i) u[i] = std::stod(cells[1 + 2 * n + i]);
      controls.push_back(std::move(u));
    }
  }
  Trajectory traj;
  traj.space = space;
  traj.times = Eigen::Map<const VecX>(times.data(), static_cast<int>(times.size()));
  traj.states.resize(states.size(), 2 * n);
  for (size_t r = 0; r < states.size(); ++r) {
    for (int c = 0; c < 2 * n; ++c) traj.states(static_cast<int>(r), c) = states[r][c];
  }
  traj.controls.resize(controls.size(), m);
  for (size_t r = 0; r < controls.size(); ++r) {
    for (int c = 0; c < m; ++c) traj.controls(static_cast<int>(r), c) = controls[r][c];
  }
  return traj;
}

}  // namespace beltopt

#include <catch_amalgamated.hpp>

#include <random>

#include "beltopt/dynamics.hpp"
#include "beltopt/model.hpp"
#include "beltopt/ocp.hpp"

using namespace beltopt;

namespace {

ModelFile load_default() { return load_model(std::string(BELTOPT_MODELS_DIR) + "/arm4.json"); }

// One revolute link swinging about -Y through a COM at (l, 0, 0): positive q
// raises the COM, V = m g l sin(q).
RobotModel pendulum(double mass, double l_com, double inertia_iso, double ee_len) {
  RobotModel m;
  LinkSpec l;
  l.name = "rod";
  l.parent = -1;
  l.joint_axis = Vec3(0.0, -1.0, 0.0);
  l.mass = mass;
  l.com = Vec3(l_com, 0.0, 0.0);
  l.inertia = inertia_iso * Mat3::Identity();
  m.links.push_back(l);
  m.gravity = Vec3(0.0, 0.0, -9.81);
  m.ee_offset = Vec3(ee_len, 0.0, 0.0);
  m.q_min = VecX::Constant(1, -10.0);
  m.q_max = VecX::Constant(1, 10.0);
  m.qd_u_min = VecX::Constant(1, -100.0);
  m.qd_u_max = VecX::Constant(1, 100.0);
  m.tau_u_min = VecX::Constant(1, -50.0);
  m.tau_u_max = VecX::Constant(1, 50.0);
  return m;
}

VecX random_q(std::mt19937_64& rng, int n, double lo = -1.5, double hi = 1.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  VecX q(n);
  for (int i = 0; i < n; ++i) q[i] = u(rng);
  return q;
}

}  // namespace

TEST_CASE("pendulum closed forms") {
  const double mass = 0.8, l = 0.3, I0 = 2e-3;
  const RobotModel m = pendulum(mass, l, I0, 0.5);

  SECTION("mass matrix is the constant m l^2 + I") {
    for (double q : {0.0, 0.4, -1.1, 2.0}) {
      const MatX H = mass_matrix(m, VecX::Constant(1, q));
      REQUIRE(std::abs(H(0, 0) - (mass * l * l + I0)) < 1e-12);
    }
  }
  SECTION("free fall from horizontal") {
    const VecX qdd = forward_dynamics_joint(m, VecX::Zero(1), VecX::Zero(1), VecX::Zero(1));
    const double expected = -mass * 9.81 * l / (mass * l * l + I0);
    REQUIRE(std::abs(qdd[0] - expected) < 1e-10);
  }
  SECTION("end-effector rotates about the joint axis") {
    const Vec3 home = ee_position(m, VecX::Zero(1));
    REQUIRE((home - Vec3(0.5, 0.0, 0.0)).norm() < 1e-12);
    const Vec3 up = ee_position(m, VecX::Constant(1, M_PI / 2.0));
    REQUIRE((up - Vec3(0.0, 0.0, 0.5)).norm() < 1e-12);
  }
  SECTION("static torque equals the potential gradient") {
    for (double q : {0.0, 0.7, -0.9}) {
      const VecX tau = rnea(m, VecX::Constant(1, q), VecX::Zero(1), VecX::Zero(1));
      REQUIRE(std::abs(tau[0] - mass * 9.81 * l * std::cos(q)) < 1e-10);
    }
  }
}

TEST_CASE("zero gravity and zero motion gives zero torque") {
  ModelFile mf = load_default();
  mf.robot.gravity.setZero();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const VecX q = random_q(rng, 4);
    const VecX tau = rnea(mf.robot, q, VecX::Zero(4), VecX::Zero(4));
    REQUIRE(tau.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mass matrix matches the inverse-dynamics column probe") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const VecX q = random_q(rng, 4);
    const MatX H = mass_matrix(mf.robot, q);
    const VecX c0 = rnea(mf.robot, q, VecX::Zero(4), VecX::Zero(4));
    for (int i = 0; i < 4; ++i) {
      const VecX col = rnea(mf.robot, q, VecX::Zero(4), VecX::Unit(4, i)) - c0;
      REQUIRE((H.col(i) - col).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("mass matrix is symmetric positive definite") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const VecX q = random_q(rng, 4, -2.5, 2.5);
    const MatX H = mass_matrix(mf.robot, q);
    REQUIRE((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(H);
    REQUIRE(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("rnea recomposes as H qdd + C") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const VecX q = random_q(rng, 4);
    VecX qd(4), qdd(4);
    for (int i = 0; i < 4; ++i) {
      qd[i] = u(rng);
      qdd[i] = u(rng);
    }
    const VecX tau = rnea(mf.robot, q, qd, qdd);
    const VecX recomposed = mass_matrix(mf.robot, q) * qdd + bias(mf.robot, q, qd);
    const double scale = std::max(1.0, tau.cwiseAbs().maxCoeff());
    REQUIRE((tau - recomposed).cwiseAbs().maxCoeff() / scale < 1e-9);
  }
}

TEST_CASE("static torque equals the finite-difference potential gradient") {
  ModelFile mf = load_default();
  mf.robot.payload_mass = 0.7;  // exercise the payload term too
  std::mt19937_64 rng(15);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const VecX q = random_q(rng, 4);
    const VecX tau = rnea(mf.robot, q, VecX::Zero(4), VecX::Zero(4));
    for (int i = 0; i < 4; ++i) {
      VecX qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const double fd = (potential_energy(mf.robot, qp) - potential_energy(mf.robot, qm)) / (2 * h);
      const double scale = std::max(1.0, std::abs(tau[i]));
      REQUIRE(std::abs(tau[i] - fd) / scale < 1e-6);
    }
  }
}

TEST_CASE("forward dynamics round-trips through inverse dynamics") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const VecX q = random_q(rng, 4);
    VecX qd(4), tau(4);
    for (int i = 0; i < 4; ++i) {
      qd[i] = u(rng);
      tau[i] = u(rng);
    }
    const VecX qdd = forward_dynamics_joint(mf.robot, q, qd, tau);
    const VecX tau_back = rnea(mf.robot, q, qd, qdd);
    REQUIRE((tau - tau_back).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("bias-cancelling torque holds the arm still") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const VecX q = random_q(rng, 4);
    const VecX qd = random_q(rng, 4, -2.0, 2.0);
    const VecX qdd = forward_dynamics_joint(mf.robot, q, qd, bias(mf.robot, q, qd));
    REQUIRE(qdd.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("actuation-space terms") {
  const ModelFile mf = load_default();
  const TransmissionSpec t = TransmissionSpec::from_gear_ratios(Vec4(6.0, 3.0, 1.0, 1.0));
  std::mt19937_64 rng(18);

  SECTION("identity transmission changes nothing") {
    const TransmissionSpec id = TransmissionSpec::identity();
    const VecX q = random_q(rng, 4);
    const MatX H = mass_matrix(mf.robot, q);
    const VecX C = bias(mf.robot, q, random_q(rng, 4));
    const ActuationTerms at = to_actuation(H, C, id.G_inv);
    REQUIRE((at.H_u - H).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((at.C_u - C).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("H_u stays positive definite and congruence holds") {
    for (int trial = 0; trial < 100; ++trial) {
      const VecX q = random_q(rng, 4);
      const MatX H = mass_matrix(mf.robot, q);
      const ActuationTerms at = to_actuation(H, bias(mf.robot, q, VecX::Zero(4)), t.G_inv);
      Eigen::SelfAdjointEigenSolver<MatX> es(at.H_u);
      REQUIRE(es.eigenvalues().minCoeff() > 0.0);
      REQUIRE((t.G.transpose() * at.H_u * t.G - H).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SECTION("velocity-product term folds into the bias") {
    const VecX q = random_q(rng, 4);
    const MatX H = mass_matrix(mf.robot, q);
    const VecX C = bias(mf.robot, q, random_q(rng, 4));
    const VecX g_u = random_q(rng, 4);
    const ActuationTerms at = to_actuation(H, C, t.G_inv, g_u);
    const VecX expected = t.G_inv_T * (C - H * (t.G_inv * g_u));
    REQUIRE((at.C_u - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cross-space equivalence of forward dynamics") {
  const ModelFile mf = load_default();
  const TransmissionSpec t = TransmissionSpec::from_gear_ratios(Vec4(6.0, 3.0, 1.0, 1.0));
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.7, 1.7);
  double max_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const VecX q = random_q(rng, 4);
    const VecX qd = random_q(rng, 4, -3.0, 3.0);
    VecX tau_u(4);
    for (int i = 0; i < 4; ++i) tau_u[i] = u(rng);
    const VecX qdd_act = forward_dynamics_actuation(mf.robot, t, q, qd, tau_u);
    const VecX qdd_joint = forward_dynamics_joint(mf.robot, q, qd, t.G.transpose() * tau_u);
    max_err = std::max(max_err, (qdd_act - qdd_joint).cwiseAbs().maxCoeff());
  }
  REQUIRE(max_err < 1e-9);
}

TEST_CASE("transmission-mapped bias cancellation") {
  const ModelFile mf = load_default();
  const TransmissionSpec t = TransmissionSpec::from_gear_ratios(Vec4(6.0, 3.0, 1.0, 1.0));
  std::mt19937_64 rng(20);
  const VecX q = random_q(rng, 4);
  const VecX qd = random_q(rng, 4, -2.0, 2.0);
  const VecX tau_u = t.G_inv_T * bias(mf.robot, q, qd);
  const VecX qdd = forward_dynamics_actuation(mf.robot, t, q, qd, tau_u);
  REQUIRE(qdd.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("payload adds inertia and gravity load") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const VecX q = random_q(rng, 4);
    const MatX H0 = mass_matrix(mf.robot.with_payload(0.0), q);
    const MatX H3 = mass_matrix(mf.robot.with_payload(3.0), q);
    Eigen::SelfAdjointEigenSolver<MatX> es(H3 - H0);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-12);

    const double c0 = bias(mf.robot.with_payload(0.0), q, VecX::Zero(4)).norm();
    const double c1 = bias(mf.robot.with_payload(1.0), q, VecX::Zero(4)).norm();
    const double c3 = bias(mf.robot.with_payload(3.0), q, VecX::Zero(4)).norm();
    REQUIRE(c1 >= c0 - 1e-12);
    REQUIRE(c3 >= c1 - 1e-12);
  }
}

TEST_CASE("home pose of the default model") {
  const ModelFile mf = load_default();
  const Vec3 home = ee_position(mf.robot, VecX::Zero(4));
  REQUIRE((home - Vec3(0.60, 0.0, 0.10)).norm() < 1e-12);
}

TEST_CASE("analytic Jacobian matches finite differences of fk") {
  const ModelFile mf = load_default();
  std::mt19937_64 rng(22);
  const double h = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const VecX q = random_q(rng, 4);
    const MatX J = ee_jacobian(mf.robot, q);
    for (int i = 0; i < 4; ++i) {
      VecX qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Vec3 fd = (ee_position(mf.robot, qp) - ee_position(mf.robot, qm)) / (2 * h);
      REQUIRE((J.col(i) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("kinetic energy is conserved without gravity or torque") {
  ModelFile mf = load_default();
  mf.robot.gravity.setZero();
  const TransmissionSpec t = TransmissionSpec::from_gear_ratios(Vec4(6.0, 3.0, 1.0, 1.0));
  VecX x(8);
  x << 0.2, 0.5, -0.9, 0.3, 0.8, -0.5, 0.6, -0.4;
  const double e0 = kinetic_energy(mf.robot, x.head(4), x.tail(4));
  const double h = 1e-4;
  const int steps = static_cast<int>(0.7 / h);
  for (int k = 0; k < steps; ++k) {
    x = step(mf.robot, t, Space::joint, x, VecX::Zero(4), h, Integrator::rk4);
  }
  const double e1 = kinetic_energy(mf.robot, x.head(4), x.tail(4));
  REQUIRE(std::abs(e1 - e0) / e0 < 1e-6);
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "crutchgait/dynamics.hpp"
#include "crutchgait/kinematics.hpp"
#include "support.hpp"

namespace crutchgait {
namespace {

using testing::oracle_mass_matrix;
using testing::oracle_potential;
using testing::random_configuration;
using testing::random_vector;
using testing::rk4_pendulum;
using testing::settle_standing;

RobotModel subject() { return build_subject_model(ModelConfig{}); }

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// ---- mass matrix ----------------------------------------------------------------

TEST(MassMatrix, PendulumScalarEntry) {
  const double m = 2.0, l = 1.5, i = 0.3;
  const RobotModel p = testing::pendulum(m, l, i);
  for (double th : {0.0, 0.7, -2.0}) {
    const Eigen::MatrixXd mm = mass_matrix(p, Eigen::VectorXd::Constant(1, th));
    ASSERT_EQ(mm.rows(), 1);
    EXPECT_NEAR(mm(0, 0), m * (l / 2) * (l / 2) + i, 1e-14);
  }
}

TEST(MassMatrix, SymmetricForRandomConfigurations) {
  const RobotModel m = subject();
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd mm = mass_matrix(m, random_configuration(m, rng));
    EXPECT_LT((mm - mm.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(MassMatrix, PositiveDefiniteForRandomDirections) {
  const RobotModel m = subject();
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd mm = mass_matrix(m, random_configuration(m, rng));
    for (int t = 0; t < 100; ++t) {
      const Eigen::VectorXd x = random_vector(m.dof(), rng);
      if (x.norm() == 0.0) continue;
      EXPECT_GT(x.dot(mm * x), 0.0);
    }
  }
}

TEST(MassMatrix, MatchesFiniteDifferenceJacobianAssembly) {
  const RobotModel m = subject();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd q = random_configuration(m, rng);
    const Eigen::MatrixXd diff = mass_matrix(m, q) - oracle_mass_matrix(m, q);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-6);
  }
}

// ---- bias forces --------------------------------------------------------------------

Eigen::VectorXd potential_gradient(const RobotModel& m, const Eigen::VectorXd& q, double h = 1e-5) {
  Eigen::VectorXd g(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    Eigen::VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    g[i] = (oracle_potential(m, qp) - oracle_potential(m, qm)) / (2.0 * h);
  }
  return g;
}

TEST(BiasForces, ZeroVelocityIsPureGravity) {
  const RobotModel m = subject();
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd q = random_configuration(m, rng);
    const Eigen::VectorXd h = bias_forces(m, q, Eigen::VectorXd::Zero(m.dof()));
    EXPECT_LT((h - potential_gradient(m, q)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(BiasForces, ZeroGravityZeroVelocityIsZero) {
  ModelConfig cfg;
  cfg.gravity = 0.0;
  const RobotModel m = build_subject_model(cfg);
  std::mt19937_64 rng(5);
  const Eigen::VectorXd h =
      bias_forces(m, random_configuration(m, rng), Eigen::VectorXd::Zero(m.dof()));
  EXPECT_EQ(h.cwiseAbs().maxCoeff(), 0.0);
}

/// Lagrangian identity h = Ṁ q̇ - ∂T/∂q + ∂V/∂q with T = ½ q̇ᵀ M q̇, every
/// derivative taken by central differences.
Eigen::VectorXd lagrangian_bias(const RobotModel& m, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qd) {
  const double h = 1e-6;
  const Eigen::MatrixXd m_dot =
      (mass_matrix(m, q + h * qd) - mass_matrix(m, q - h * qd)) / (2.0 * h);
  Eigen::VectorXd dt_dq(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    Eigen::VectorXd qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Eigen::MatrixXd dm = (mass_matrix(m, qp) - mass_matrix(m, qm)) / (2.0 * h);
    dt_dq[i] = 0.5 * qd.dot(dm * qd);
  }
  return m_dot * qd - dt_dq + potential_gradient(m, q);
}

TEST(BiasForces, MatchesLagrangianIdentity) {
  const RobotModel m = subject();
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd q = random_configuration(m, rng);
    const Eigen::VectorXd qd = random_vector(m.dof(), rng, 2.0);
    const Eigen::VectorXd diff = bias_forces(m, q, qd) - lagrangian_bias(m, q, qd);
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(BiasForces, DoublePendulumMatchesLagrangianIdentity) {
  const RobotModel m = testing::double_pendulum();
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd q = random_vector(2, rng, 3.0);
    const Eigen::VectorXd qd = random_vector(2, rng, 3.0);
    EXPECT_LT((bias_forces(m, q, qd) - lagrangian_bias(m, q, qd)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

// ---- contact ----------------------------------------------------------------------------

/// Fixed base at the origin carrying one sphere whose centre sits at
/// height `center_z`.
RobotModel sphere_on_base(double center_z) {
  RobotModel m = testing::pendulum();
  ContactSphere s;
  s.name = "probe";
  s.link = 0;
  s.center = {0.0, center_z};
  s.radius = 0.02;
  s.stiffness = 1e4;
  s.damping = 100.0;
  m.contact_spheres.push_back(s);
  m.validate();
  return m;
}

TEST(Contact, SphereAboveGroundHasNoForce) {
  const RobotModel m = sphere_on_base(0.05 + 0.02);
  const auto c = contact_forces(m, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].normal, 0.0);
  EXPECT_EQ(c[0].tangential, 0.0);
  EXPECT_EQ(c[0].compression, 0.0);
}

TEST(Contact, CentimetreCompressionGivesHundredNewtons) {
  const RobotModel m = sphere_on_base(0.02 - 0.01);
  const auto c = contact_forces(m, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(c[0].compression, 0.01, 1e-15);
  EXPECT_NEAR(c[0].normal, 100.0, 1e-10);
}

TEST(Contact, StaticStanceSupportsBodyWeight) {
  const RobotModel m = subject();
  const SimState s = settle_standing(m, 400);
  const auto c = contact_forces(m, s.q, s.qd);
  double total = 0.0;
  for (const auto& f : c) total += f.normal;
  const double weight = m.total_mass() * m.gravity;
  EXPECT_NEAR(total / weight, 1.0, 0.01);
  EXPECT_GT(c[sphere_id::kFootL].normal, 0.25 * weight);
  EXPECT_GT(c[sphere_id::kFootR].normal, 0.25 * weight);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].normal < 1.0) continue;
    const double k = m.contact_spheres[i].stiffness;
    EXPECT_NEAR(s.contact_disp[i], c[i].normal / k, 0.01 * c[i].normal / k) << i;
  }
}

TEST(ContactProperty, ComplementarityAndFrictionCone) {
  const RobotModel m = subject();
  const Eigen::VectorXd q0 = standing_pose(m);
  std::mt19937_64 rng(8);
  int touching = 0;
  for (int k = 0; k < 500; ++k) {
    Eigen::VectorXd q = q0 + random_vector(m.dof(), rng, 0.05);
    const Eigen::VectorXd qd = random_vector(m.dof(), rng, 0.5);
    for (const auto& c : contact_forces(m, q, qd)) {
      EXPECT_GE(c.compression, 0.0);
      EXPECT_GE(c.normal, 0.0);
      if (c.compression == 0.0) EXPECT_EQ(c.normal, 0.0);
      EXPECT_LE(std::abs(c.tangential), m.friction * c.normal * (1.0 + 1e-12));
      touching += c.normal > 0.0;
    }
  }
  EXPECT_GT(touching, 100);
}

// ---- stepping -------------------------------------------------------------------------------

TEST(Step, FreeFallComAcceleratesAtMinusG) {
  const RobotModel m = subject();
  SimState s = SimState::zero(m);
  s.q[1] = 5.0;
  const double dt = 0.005;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.joint_count());
  const SimState n = step(m, s, as_span(zero), dt);
  const Vec2 v = com_velocity(m, forward_kinematics(m, n.q, n.qd));
  EXPECT_NEAR(v.y() / dt, -m.gravity, 1e-9);
  EXPECT_NEAR(v.x() / dt, 0.0, 1e-9);
  const Eigen::VectorXd a = free_acceleration(m, s.q, s.qd, zero);
  EXPECT_NEAR(a[1], -m.gravity, 1e-9);
  EXPECT_LT(a.tail(m.joint_count()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Step, PendulumTracksHighOrderIntegrator) {
  const double mass = 1.0, len = 1.0, inertia = 1.0 / 12.0, g = 9.81;
  const RobotModel p = testing::pendulum(mass, len, inertia, g);
  SimState s = SimState::zero(p);
  s.q[0] = 0.5;
  const double zero[1] = {0.0};
  for (int i = 0; i < 1000; ++i) s = step(p, s, zero, 1e-3);
  const double lc = 0.5 * len;
  const double k = mass * g * lc / (mass * lc * lc + inertia);
  EXPECT_NEAR(s.q[0], rk4_pendulum(0.5, 0.0, k, 1.0, 1e-5), 1e-3);
  EXPECT_NEAR(s.time, 1.0, 1e-12);
}

TEST(Step, VelocityUpdatesBeforePosition) {
  const RobotModel p = testing::pendulum();
  SimState s = SimState::zero(p);
  s.q[0] = 0.3;
  const double dt = 1e-3;
  const double zero[1] = {0.0};
  const double acc = free_acceleration(p, s.q, s.qd, Eigen::VectorXd::Zero(1))[0];
  const SimState n = step(p, s, zero, dt);
  EXPECT_NEAR(n.qd[0], dt * acc, 1e-15);
  EXPECT_NEAR(n.q[0], 0.3 + dt * n.qd[0], 1e-15);
}

double energy_drift(const RobotModel& m, SimState s, double dt, double t_end) {
  const double e0 = total_energy(m, s);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.joint_count());
  double worst = 0.0;
  const int n = static_cast<int>(std::lround(t_end / dt));
  for (int i = 0; i < n; ++i) {
    s = step(m, s, as_span(zero), dt);
    worst = std::max(worst, std::abs(total_energy(m, s) - e0));
  }
  return worst / std::abs(e0);
}

TEST(StepProperty, DoublePendulumEnergyDrift) {
  const RobotModel m = testing::double_pendulum();
  SimState s = SimState::zero(m);
  s.q << 0.6, -0.4;
  EXPECT_LT(energy_drift(m, s, 1e-3, 1.0), 0.005);
}

TEST(StepProperty, FloatingModelEnergyDriftWithoutContact) {
  ModelConfig cfg;
  cfg.joint_damping = 0.0;
  cfg.limit_stiffness = 0.0;
  const RobotModel m = build_subject_model(cfg);
  std::mt19937_64 rng(10);
  SimState s = SimState::zero(m);
  s.q = random_configuration(m, rng);
  s.q[1] = 10.0;
  s.qd = random_vector(m.dof(), rng, 1.0);
  EXPECT_LT(energy_drift(m, s, 1e-3, 1.0), 0.005);
}

SimState mirror_state(const RobotModel& m, const SimState& s) {
  SimState r = s;
  r.q = mirror_generalized(m, s.q);
  r.qd = mirror_generalized(m, s.qd);
  for (int c = 0; c < sphere_id::kCount; ++c) {
    r.contact_disp[mirror_sphere(c)] = s.contact_disp[c];
    r.contact_rate[mirror_sphere(c)] = s.contact_rate[c];
  }
  for (int j = 0; j < m.joint_count(); ++j) r.last_torques[mirror_joint(j)] = s.last_torques[j];
  return r;
}

TEST(StepProperty, MirroredStateStepsToMirroredResult) {
  const RobotModel m = subject();
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    SimState s = SimState::zero(m);
    s.q = standing_pose(m) + random_vector(m.dof(), rng, 0.03);
    s.qd = random_vector(m.dof(), rng, 0.3);
    refresh_contacts(m, s);
    Eigen::VectorXd tau = random_vector(m.joint_count(), rng, 50.0);
    Eigen::VectorXd tau_m(m.joint_count());
    for (int j = 0; j < m.joint_count(); ++j) tau_m[mirror_joint(j)] = tau[j];

    const SimState a = mirror_state(m, step(m, s, as_span(tau), 0.005));
    const SimState b = step(m, mirror_state(m, s), as_span(tau_m), 0.005);
    EXPECT_LT((a.q - b.q).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.qd - b.qd).cwiseAbs().maxCoeff(), 1e-9);
    for (int c = 0; c < sphere_id::kCount; ++c) {
      EXPECT_NEAR(a.contact_disp[c], b.contact_disp[c], 1e-9);
    }
    EXPECT_EQ(a.last_torques, b.last_torques);
  }
}

TEST(StepProperty, IdenticalInputsGiveBitwiseIdenticalStates) {
  const RobotModel m = subject();
  std::mt19937_64 rng(12);
  for (int k = 0; k < 20; ++k) {
    SimState s = SimState::zero(m);
    s.q = standing_pose(m) + random_vector(m.dof(), rng, 0.03);
    s.qd = random_vector(m.dof(), rng, 0.3);
    refresh_contacts(m, s);
    const Eigen::VectorXd tau = random_vector(m.joint_count(), rng, 80.0);
    EXPECT_TRUE(step(m, s, as_span(tau), 0.005) == step(m, s, as_span(tau), 0.005));
  }
}

TEST(Step, TorquesAreClampedToLimits) {
  const RobotModel m = subject();
  SimState s = SimState::zero(m);
  s.q = standing_pose(m);
  refresh_contacts(m, s);
  Eigen::VectorXd tau = Eigen::VectorXd::Constant(m.joint_count(), 1e6);
  tau[0] = -1e6;
  const SimState n = step(m, s, as_span(tau), 0.005);
  const Eigen::VectorXd lim = m.torque_limits();
  EXPECT_EQ(n.last_torques[0], -lim[0]);
  for (int j = 1; j < m.joint_count(); ++j) EXPECT_EQ(n.last_torques[j], lim[j]);
}

TEST(Step, RejectsBadArguments) {
  const RobotModel m = subject();
  const SimState s = SimState::zero(m);
  const Eigen::VectorXd three = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd ten = Eigen::VectorXd::Zero(10);
  EXPECT_THROW(step(m, s, as_span(three), 0.005), std::invalid_argument);
  EXPECT_THROW(step(m, s, as_span(ten), 0.0), std::invalid_argument);
}

TEST(Step, NonFiniteStateSignalsDivergence) {
  const RobotModel m = subject();
  SimState s = SimState::zero(m);
  s.q[1] = 3.0;
  s.qd[4] = std::nan("");
  const Eigen::VectorXd ten = Eigen::VectorXd::Zero(10);
  EXPECT_THROW(step(m, s, as_span(ten), 0.005), DivergenceError);
}

TEST(Step, SoftLimitPushesBackIntoRange) {
  const RobotModel m = subject();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(m.dof());
  const int knee = joint_id::kKneeL;
  q[m.joint_dof(knee)] = m.joints[knee].lower - 0.1;
  const Eigen::VectorXd lim = limit_torques(m, q);
  EXPECT_NEAR(lim[knee], m.limit_stiffness * 0.1, 1e-12);
  EXPECT_EQ(lim[joint_id::kKneeR], 0.0);
}

TEST(TrajectoryWriter, HeaderAndRowWidth) {
  const RobotModel m = subject();
  std::ostringstream os;
  TrajectoryWriter w(os);
  SimState s = SimState::zero(m);
  s.q = standing_pose(m);
  refresh_contacts(m, s);
  w.write(s);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  std::string expected = "time,qx,qz,pitch";
  for (int j = 0; j < 10; ++j) expected += ",j" + std::to_string(j);
  for (int j = 0; j < 10; ++j) expected += ",dj" + std::to_string(j);
  expected += ",d_fl,d_fr,d_cl,d_cr";
  for (int j = 0; j < 10; ++j) expected += ",tau" + std::to_string(j);
  EXPECT_EQ(header, expected);
  EXPECT_EQ(split_csv_line(row).size(), split_csv_line(header).size());
}

}  // namespace
}  // namespace crutchgait

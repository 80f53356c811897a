#pragma once

// Shared fixtures for the test suites: hand-built models, independent
// kinematics oracles and small random generators.

#include <Eigen/Dense>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "crutchgait/dynamics.hpp"
#include "crutchgait/kinematics.hpp"
#include "crutchgait/model.hpp"

namespace crutchgait::testing {

/// Fixed-base uniform rod hanging from the origin, CoM at `length / 2`.
inline RobotModel pendulum(double mass = 1.0, double length = 1.0,
                           double inertia = 1.0 / 12.0, double gravity = 9.81) {
  RobotModel p;
  p.floating_base = false;
  p.gravity = gravity;
  Link base;
  base.name = "world";
  p.links.push_back(base);
  Link rod;
  rod.name = "rod";
  rod.parent = 0;
  rod.joint = 0;
  rod.axis = {0.0, -1.0};
  rod.length = length;
  rod.mass = mass;
  rod.human_mass = mass;
  rod.com_offset = 0.5 * length;
  rod.inertia_about_com = inertia;
  p.links.push_back(rod);
  Joint j;
  j.name = "pivot";
  j.parent_link = 0;
  j.child_link = 1;
  j.torque_limit = 100.0;
  p.joints.push_back(j);
  p.validate();
  return p;
}

/// Fixed-base double pendulum of two unit rods.
inline RobotModel double_pendulum() {
  RobotModel p = pendulum();
  Link lower = p.links[1];
  lower.name = "lower";
  lower.parent = 1;
  lower.joint = 1;
  p.links.push_back(lower);
  Joint j;
  j.name = "elbow";
  j.parent_link = 1;
  j.child_link = 2;
  j.origin = {0.0, -1.0};
  j.torque_limit = 100.0;
  p.joints.push_back(j);
  p.validate();
  return p;
}

// ---- independent kinematics oracle ---------------------------------------
// Walks the tree with explicit trigonometry instead of the library's
// LinkFrames machinery.

struct OraclePose {
  std::vector<double> angle;
  std::vector<Eigen::Vector2d> origin;
};

inline Eigen::Vector2d oracle_rotate(double a, const Eigen::Vector2d& v) {
  // Rotation about +y in the x-z plane: x' = x cos a + z sin a,
  // z' = -x sin a + z cos a.
  return {v.x() * std::cos(a) + v.y() * std::sin(a),
          -v.x() * std::sin(a) + v.y() * std::cos(a)};
}

inline OraclePose oracle_pose(const RobotModel& m, const Eigen::VectorXd& q) {
  OraclePose p;
  const std::size_t n = m.links.size();
  p.angle.assign(n, 0.0);
  p.origin.assign(n, Eigen::Vector2d::Zero());
  const int base = m.floating_base ? 3 : 0;
  if (m.floating_base) {
    p.origin[0] = {q[0], q[1]};
    p.angle[0] = q[2];
  }
  for (std::size_t i = 1; i < n; ++i) {
    const int parent = m.links[i].parent;
    const Joint& j = m.joints[m.links[i].joint];
    p.origin[i] = p.origin[parent] + oracle_rotate(p.angle[parent], j.origin);
    p.angle[i] = p.angle[parent] + q[base + m.links[i].joint];
  }
  return p;
}

inline std::vector<Eigen::Vector2d> oracle_link_coms(const RobotModel& m,
                                                     const Eigen::VectorXd& q) {
  const OraclePose p = oracle_pose(m, q);
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < m.links.size(); ++i) {
    const Link& l = m.links[i];
    out.push_back(p.origin[i] + oracle_rotate(p.angle[i], l.axis * l.com_offset));
  }
  return out;
}

inline Eigen::Vector2d oracle_com(const RobotModel& m, const Eigen::VectorXd& q) {
  const auto coms = oracle_link_coms(m, q);
  double mx = 0.0, mz = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < coms.size(); ++i) {
    mx += m.links[i].mass * coms[i].x();
    mz += m.links[i].mass * coms[i].y();
    mass += m.links[i].mass;
  }
  return {mx / mass, mz / mass};
}

inline double oracle_potential(const RobotModel& m, const Eigen::VectorXd& q) {
  const auto coms = oracle_link_coms(m, q);
  double v = 0.0;
  for (std::size_t i = 0; i < coms.size(); ++i) v += m.links[i].mass * m.gravity * coms[i].y();
  return v;
}

/// Mass matrix assembled from central-difference Jacobians of the oracle
/// link CoM positions and absolute angles.
inline Eigen::MatrixXd oracle_mass_matrix(const RobotModel& m, const Eigen::VectorXd& q,
                                          double h = 1e-6) {
  const int n = m.dof();
  const std::size_t links = m.links.size();
  std::vector<Eigen::MatrixXd> jv(links, Eigen::MatrixXd::Zero(2, n));
  std::vector<Eigen::RowVectorXd> jw(links, Eigen::RowVectorXd::Zero(n));
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    const auto cp = oracle_link_coms(m, qp);
    const auto cm = oracle_link_coms(m, qm);
    const auto ap = oracle_pose(m, qp).angle;
    const auto am = oracle_pose(m, qm).angle;
    for (std::size_t i = 0; i < links; ++i) {
      jv[i].col(k) = (cp[i] - cm[i]) / (2.0 * h);
      jw[i][k] = (ap[i] - am[i]) / (2.0 * h);
    }
  }
  Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < links; ++i) {
    mm += m.links[i].mass * jv[i].transpose() * jv[i];
    mm += m.links[i].inertia_about_com * jw[i].transpose() * jw[i];
  }
  return mm;
}

// ---- dynamics references ------------------------------------------------------

/// Advances θ̈ = -k sin θ by `t` seconds with classical RK4 at step `h`.
inline void rk4_pendulum_advance(double& theta, double& omega, double k, double t, double h) {
  auto acc = [k](double th) { return -k * std::sin(th); };
  const int n = static_cast<int>(std::lround(t / h));
  for (int i = 0; i < n; ++i) {
    const double a1 = omega, b1 = acc(theta);
    const double a2 = omega + 0.5 * h * b1, b2 = acc(theta + 0.5 * h * a1);
    const double a3 = omega + 0.5 * h * b2, b3 = acc(theta + 0.5 * h * a2);
    const double a4 = omega + h * b3, b4 = acc(theta + h * a3);
    theta += h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4);
    omega += h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4);
  }
}

/// Reference angle of the pendulum after `t_end` seconds.
inline double rk4_pendulum(double theta, double omega, double k, double t_end, double h) {
  rk4_pendulum_advance(theta, omega, k, t_end, h);
  return theta;
}

/// Holds the standing pose with joint PD control until the body settles.
inline SimState settle_standing(const RobotModel& m, int steps) {
  SimState s = SimState::zero(m);
  s.q = standing_pose(m);
  refresh_contacts(m, s);
  const Eigen::VectorXd q0 = s.q;
  Eigen::VectorXd tau(m.joint_count());
  for (int i = 0; i < steps; ++i) {
    for (int j = 0; j < m.joint_count(); ++j) {
      const bool ankle = j == joint_id::kAnkleL || j == joint_id::kAnkleR;
      const double kp = ankle ? 75.0 : 300.0;
      const int d = m.joint_dof(j);
      tau[j] = -kp * (s.q[d] - q0[d]) - s.qd[d];
    }
    s = step(m, s, std::span<const double>(tau.data(), tau.size()), 0.005);
  }
  return s;
}

// ---- learner oracles -----------------------------------------------------------

/// Advantage as the explicit discounted sum of TD residuals, truncated after
/// the first terminal step.
inline std::vector<double> brute_force_gae(const std::vector<double>& r,
                                           const std::vector<double>& v,
                                           const std::vector<std::uint8_t>& done,
                                           double bootstrap, double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : bootstrap;
    delta[t] = r[t] + (done[t] ? 0.0 : gamma * next) - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t j = t; j < n; ++j) {
      adv[t] += weight * delta[j];
      if (done[j]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

/// Piecewise clipped objective read case by case: for A > 0 the ratio is
/// capped at 1 + eps, for A < 0 it is floored at 1 - eps.
inline double piecewise_clip_objective(double r, double a, double eps) {
  if (a > 0.0) return r > 1.0 + eps ? (1.0 + eps) * a : r * a;
  if (a < 0.0) return r < 1.0 - eps ? (1.0 - eps) * a : r * a;
  return 0.0;
}

// ---- generators -------------------------------------------------------------

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Random configuration of the subject model with the base well above the
/// ground.
inline Eigen::VectorXd random_configuration(const RobotModel& m, std::mt19937_64& rng) {
  Eigen::VectorXd q = random_vector(m.dof(), rng, 0.8);
  if (m.floating_base) q[1] = 3.0 + q[1];
  return q;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("crutchgait_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace crutchgait::testing

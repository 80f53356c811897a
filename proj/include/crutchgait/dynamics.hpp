#pragma once

// Planar rigid-body dynamics for the tree in model.hpp with penalty
// spring-damper contact at the sphere bottom points and semi-implicit Euler
// stepping.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crutchgait/csv.hpp"
#include "crutchgait/kinematics.hpp"
#include "crutchgait/model.hpp"

namespace crutchgait {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimState {
  Eigen::VectorXd q;   // base x, base z, pitch, joint angles
  Eigen::VectorXd qd;
  std::vector<double> contact_disp;  // compression d >= 0 per sphere
  std::vector<double> contact_rate;  // d-dot per sphere
  Eigen::VectorXd last_torques;
  double time = 0.0;

  static SimState zero(const RobotModel& model) {
    SimState s;
    s.q = Eigen::VectorXd::Zero(model.dof());
    s.qd = Eigen::VectorXd::Zero(model.dof());
    s.contact_disp.assign(model.contact_spheres.size(), 0.0);
    s.contact_rate.assign(model.contact_spheres.size(), 0.0);
    s.last_torques = Eigen::VectorXd::Zero(model.joint_count());
    return s;
  }

  bool all_finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    return q.allFinite() && qd.allFinite() && last_torques.allFinite() &&
           std::all_of(contact_disp.begin(), contact_disp.end(), ok) &&
           std::all_of(contact_rate.begin(), contact_rate.end(), ok) &&
           std::isfinite(time);
  }

  bool operator==(const SimState&) const = default;
};

struct ContactForce {
  int sphere = 0;
  double normal = 0.0;      // N, >= 0
  double tangential = 0.0;  // N along +x
  double compression = 0.0;
  double compression_rate = 0.0;
  Vec2 point = Vec2::Zero();  // sphere bottom point, world
};

namespace detail {

inline Eigen::MatrixXd mass_matrix_from_frames(const RobotModel& model,
                                               const LinkFrames& f) {
  const int n = model.dof();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    const int li = static_cast<int>(i);
    if (l.mass == 0.0 && l.inertia_about_com == 0.0) continue;
    const auto jv = point_jacobian(model, f, li, point_world(f, li, l.com_local()));
    const Eigen::RowVectorXd jw = angular_jacobian(model, li);
    m.noalias() += l.mass * jv.transpose() * jv;
    m.noalias() += l.inertia_about_com * jw.transpose() * jw;
  }
  return m;
}

inline Eigen::VectorXd bias_from_frames(const RobotModel& model,
                                        const LinkFrames& f,
                                        const Eigen::VectorXd& qd) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(model.dof());
  const Vec2 g{0.0, -model.gravity};
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    if (l.mass == 0.0) continue;
    const int li = static_cast<int>(i);
    const Vec2 p = point_world(f, li, l.com_local());
    const auto jv = point_jacobian(model, f, li, p);
    const Vec2 acc = point_bias_acceleration(model, f, qd, li, p);
    h.noalias() += jv.transpose() * (l.mass * (acc - g));
  }
  return h;
}

inline std::vector<ContactForce> contacts_from_frames(const RobotModel& model,
                                                      const LinkFrames& f) {
  std::vector<ContactForce> out(model.contact_spheres.size());
  for (std::size_t s = 0; s < model.contact_spheres.size(); ++s) {
    const ContactSphere& sp = model.contact_spheres[s];
    ContactForce& c = out[s];
    c.sphere = static_cast<int>(s);
    const Vec2 center = point_world(f, sp.link, sp.center);
    c.point = center - Vec2(0.0, sp.radius);
    const double depth = -c.point.y();
    if (depth <= 0.0) continue;
    const Vec2 v = point_velocity(f, sp.link, c.point);
    c.compression = depth;
    c.compression_rate = -v.y();
    c.normal = std::max(0.0, sp.stiffness * depth + sp.damping * c.compression_rate);
    const double slip = v.x() / model.slip_velocity;
    c.tangential = -model.friction * c.normal * std::clamp(slip, -1.0, 1.0);
  }
  return out;
}

}  // namespace detail

/// Joint-space inertia matrix M(q).
inline Eigen::MatrixXd mass_matrix(const RobotModel& model,
                                   const Eigen::VectorXd& q) {
  return detail::mass_matrix_from_frames(model, forward_kinematics(model, q));
}

/// Coriolis, centrifugal and gravity generalized forces h(q, q̇) in
/// M q̈ + h = τ.
inline Eigen::VectorXd bias_forces(const RobotModel& model,
                                   const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qd) {
  return detail::bias_from_frames(model, forward_kinematics(model, q, qd), qd);
}

/// Penalty forces of every contact sphere against the ground plane z = 0.
inline std::vector<ContactForce> contact_forces(const RobotModel& model,
                                                const Eigen::VectorXd& q,
                                                const Eigen::VectorXd& qd) {
  return detail::contacts_from_frames(model, forward_kinematics(model, q, qd));
}

/// Soft joint-limit torques (without the passive damping term).
inline Eigen::VectorXd limit_torques(const RobotModel& model,
                                     const Eigen::VectorXd& q) {
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(model.joint_count());
  for (int j = 0; j < model.joint_count(); ++j) {
    const double a = q[model.joint_dof(j)];
    const Joint& jt = model.joints[j];
    if (a > jt.upper) tau[j] = -model.limit_stiffness * (a - jt.upper);
    if (a < jt.lower) tau[j] = -model.limit_stiffness * (a - jt.lower);
  }
  return tau;
}

inline Eigen::VectorXd clamp_torques(const RobotModel& model,
                                     std::span<const double> torques) {
  if (static_cast<int>(torques.size()) != model.joint_count()) {
    throw std::invalid_argument("torque vector has wrong dimension");
  }
  Eigen::VectorXd tau(model.joint_count());
  for (int j = 0; j < model.joint_count(); ++j) {
    const double lim = model.joints[j].torque_limit;
    tau[j] = std::clamp(torques[j], -lim, lim);
  }
  return tau;
}

/// Advances one step of length `dt`. Velocities are updated first from the
/// accelerations at the current configuration, then positions from the new
/// velocities. Contact and joint damping forces enter linearly implicit in
/// the velocity update.
inline SimState step(const RobotModel& model, const SimState& state,
                     std::span<const double> torques, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const int base = model.base_dof();
  const Eigen::VectorXd tau = clamp_torques(model, torques);

  const LinkFrames f = forward_kinematics(model, state.q, state.qd);
  Eigen::MatrixXd m_eff = detail::mass_matrix_from_frames(model, f);

  Eigen::VectorXd force = -detail::bias_from_frames(model, f, state.qd);
  const Eigen::VectorXd lim = limit_torques(model, state.q);
  for (int j = 0; j < model.joint_count(); ++j) {
    const int d = base + j;
    force[d] += tau[j] + lim[j] - model.joint_damping * state.qd[d];
    m_eff(d, d) += dt * model.joint_damping;
    if (lim[j] != 0.0) {
      force[d] -= dt * model.limit_stiffness * state.qd[d];
      m_eff(d, d) += dt * dt * model.limit_stiffness;
    }
  }

  const auto contacts = detail::contacts_from_frames(model, f);
  for (const ContactForce& c : contacts) {
    if (c.normal <= 0.0) continue;
    const ContactSphere& sp = model.contact_spheres[c.sphere];
    const auto jc = point_jacobian(model, f, sp.link, c.point);
    const Eigen::RowVectorXd jx = jc.row(0);
    const Eigen::RowVectorXd jz = jc.row(1);
    const double normal_gain = sp.damping + dt * sp.stiffness;
    const double vz = jz.dot(state.qd);
    force.noalias() += jz.transpose() * (c.normal - dt * sp.stiffness * vz);
    m_eff.noalias() += (dt * normal_gain) * jz.transpose() * jz;
    // Friction as velocity-dependent damping so that it cannot reverse the
    // slip direction within one step.
    const double vx = jx.dot(state.qd);
    const double slip_gain =
        model.friction * c.normal / std::max(std::abs(vx), model.slip_velocity);
    force.noalias() -= jx.transpose() * (slip_gain * vx);
    m_eff.noalias() += (dt * slip_gain) * jx.transpose() * jx;
  }

  SimState next;
  next.qd = state.qd + m_eff.ldlt().solve(dt * force);
  next.q = state.q + dt * next.qd;
  next.time = state.time + dt;
  next.last_torques = tau;
  const auto after = contact_forces(model, next.q, next.qd);
  next.contact_disp.resize(after.size());
  next.contact_rate.resize(after.size());
  for (std::size_t s = 0; s < after.size(); ++s) {
    next.contact_disp[s] = after[s].compression;
    next.contact_rate[s] = after[s].compression_rate;
  }
  if (!next.all_finite()) {
    throw DivergenceError("simulation diverged at t=" + format_double(next.time));
  }
  return next;
}

/// Generalized accelerations without contact, for diagnostics and tests.
inline Eigen::VectorXd free_acceleration(const RobotModel& model,
                                         const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& qd,
                                         const Eigen::VectorXd& joint_torques) {
  Eigen::VectorXd rhs = -bias_forces(model, q, qd);
  rhs.tail(model.joint_count()) += joint_torques;
  return mass_matrix(model, q).ldlt().solve(rhs);
}

/// Fills contact_disp / contact_rate from the configuration.
inline void refresh_contacts(const RobotModel& model, SimState& s) {
  const auto c = contact_forces(model, s.q, s.qd);
  s.contact_disp.resize(c.size());
  s.contact_rate.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    s.contact_disp[i] = c[i].compression;
    s.contact_rate[i] = c[i].compression_rate;
  }
}

inline double total_energy(const RobotModel& model, const SimState& s) {
  const LinkFrames f = forward_kinematics(model, s.q, s.qd);
  return kinetic_energy(model, f) + potential_energy(model, f);
}

/// Per-step trajectory dump for the 10-joint, 4-sphere model.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& os) : os_(os) {
    os_ << "time,qx,qz,pitch";
    for (int j = 0; j < joint_id::kCount; ++j) os_ << ",j" << j;
    for (int j = 0; j < joint_id::kCount; ++j) os_ << ",dj" << j;
    os_ << ",d_fl,d_fr,d_cl,d_cr";
    for (int j = 0; j < joint_id::kCount; ++j) os_ << ",tau" << j;
    os_ << '\n';
  }

  void write(const SimState& s) {
    os_ << format_double(s.time);
    for (int i = 0; i < 3; ++i) os_ << ',' << format_double(s.q[i]);
    for (int j = 0; j < joint_id::kCount; ++j) os_ << ',' << format_double(s.q[3 + j]);
    for (int j = 0; j < joint_id::kCount; ++j) os_ << ',' << format_double(s.qd[3 + j]);
    for (double d : s.contact_disp) os_ << ',' << format_double(d);
    for (int j = 0; j < joint_id::kCount; ++j) os_ << ',' << format_double(s.last_torques[j]);
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace crutchgait

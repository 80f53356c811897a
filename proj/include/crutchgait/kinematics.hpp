#pragma once

// Forward kinematics, point Jacobians and whole-body quantities for the
// planar tree in model.hpp.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "crutchgait/model.hpp"

namespace crutchgait {

/// World pose and velocity of every link frame.
struct LinkFrames {
  std::vector<Vec2> origin;          // joint (or base) position
  std::vector<double> angle;         // absolute planar angle
  std::vector<Vec2> origin_velocity;
  std::vector<double> angular_velocity;
};

inline LinkFrames forward_kinematics(const RobotModel& model,
                                     const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& qd) {
  const std::size_t n = model.links.size();
  LinkFrames f;
  f.origin.resize(n);
  f.angle.resize(n);
  f.origin_velocity.resize(n);
  f.angular_velocity.resize(n);
  if (model.floating_base) {
    f.origin[0] = {q[0], q[1]};
    f.angle[0] = q[2];
    f.origin_velocity[0] = {qd[0], qd[1]};
    f.angular_velocity[0] = qd[2];
  } else {
    f.origin[0].setZero();
    f.angle[0] = 0.0;
    f.origin_velocity[0].setZero();
    f.angular_velocity[0] = 0.0;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const Link& l = model.links[i];
    const Joint& j = model.joints[l.joint];
    const int p = l.parent;
    const Vec2 arm = rotate(f.angle[p], j.origin);
    f.origin[i] = f.origin[p] + arm;
    f.origin_velocity[i] =
        f.origin_velocity[p] + f.angular_velocity[p] * perp(arm);
    const int dof = model.joint_dof(l.joint);
    f.angle[i] = f.angle[p] + q[dof];
    f.angular_velocity[i] = f.angular_velocity[p] + qd[dof];
  }
  return f;
}

inline LinkFrames forward_kinematics(const RobotModel& model,
                                     const Eigen::VectorXd& q) {
  return forward_kinematics(model, q, Eigen::VectorXd::Zero(model.dof()));
}

inline Vec2 point_world(const LinkFrames& f, int link, const Vec2& local) {
  return f.origin[link] + rotate(f.angle[link], local);
}

inline Vec2 point_velocity(const LinkFrames& f, int link, const Vec2& world) {
  return f.origin_velocity[link] +
         f.angular_velocity[link] * perp(world - f.origin[link]);
}

/// Linear Jacobian (2 x dof) of a world point rigidly attached to `link`.
inline Eigen::Matrix<double, 2, Eigen::Dynamic> point_jacobian(
    const RobotModel& model, const LinkFrames& f, int link,
    const Vec2& world) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> jac =
      Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, model.dof());
  int i = link;
  while (i > 0) {
    const int dof = model.joint_dof(model.links[i].joint);
    jac.col(dof) = perp(world - f.origin[i]);
    i = model.links[i].parent;
  }
  if (model.floating_base) {
    jac(0, 0) = 1.0;
    jac(1, 1) = 1.0;
    jac.col(2) = perp(world - f.origin[0]);
  }
  return jac;
}

/// Angular Jacobian row of `link`: ones on every ancestor rotation.
inline Eigen::RowVectorXd angular_jacobian(const RobotModel& model, int link) {
  Eigen::RowVectorXd jac = Eigen::RowVectorXd::Zero(model.dof());
  int i = link;
  while (i > 0) {
    jac[model.joint_dof(model.links[i].joint)] = 1.0;
    i = model.links[i].parent;
  }
  if (model.floating_base) jac[2] = 1.0;
  return jac;
}

/// J̇·q̇ for a world point on `link`: the acceleration it would have with
/// q̈ = 0.
inline Vec2 point_bias_acceleration(const RobotModel& model,
                                    const LinkFrames& f, const Eigen::VectorXd& qd,
                                    int link, const Vec2& world) {
  const Vec2 v = point_velocity(f, link, world);
  Vec2 acc = Vec2::Zero();
  int i = link;
  while (i > 0) {
    const int dof = model.joint_dof(model.links[i].joint);
    acc += qd[dof] * perp(v - f.origin_velocity[i]);
    i = model.links[i].parent;
  }
  if (model.floating_base) acc += qd[2] * perp(v - f.origin_velocity[0]);
  return acc;
}

inline Vec2 total_com(const RobotModel& model, const LinkFrames& f) {
  Vec2 weighted = Vec2::Zero();
  double mass = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    weighted += l.mass * point_world(f, static_cast<int>(i), l.com_local());
    mass += l.mass;
  }
  return mass > 0.0 ? Vec2(weighted / mass) : Vec2(Vec2::Zero());
}

/// Mass-weighted mean of the link centres of mass, (x, z) in metres.
inline Vec2 total_com(const RobotModel& model, const Eigen::VectorXd& q) {
  return total_com(model, forward_kinematics(model, q));
}

inline Vec2 com_velocity(const RobotModel& model, const LinkFrames& f) {
  Vec2 weighted = Vec2::Zero();
  double mass = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    const int li = static_cast<int>(i);
    weighted += l.mass * point_velocity(f, li, point_world(f, li, l.com_local()));
    mass += l.mass;
  }
  return mass > 0.0 ? Vec2(weighted / mass) : Vec2(Vec2::Zero());
}

inline double aggregate_inertia(const RobotModel& model, const LinkFrames& f) {
  const Vec2 com = total_com(model, f);
  double inertia = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    const Vec2 r =
        point_world(f, static_cast<int>(i), l.com_local()) - com;
    inertia += l.inertia_about_com + l.mass * r.squaredNorm();
  }
  return inertia;
}

/// Planar moment of inertia of the whole body about its centre of mass.
inline double aggregate_inertia(const RobotModel& model,
                                const Eigen::VectorXd& q) {
  return aggregate_inertia(model, forward_kinematics(model, q));
}

inline double kinetic_energy(const RobotModel& model, const LinkFrames& f) {
  double ke = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    const int li = static_cast<int>(i);
    const Vec2 v = point_velocity(f, li, point_world(f, li, l.com_local()));
    ke += 0.5 * l.mass * v.squaredNorm() +
          0.5 * l.inertia_about_com * f.angular_velocity[i] *
              f.angular_velocity[i];
  }
  return ke;
}

inline double potential_energy(const RobotModel& model, const LinkFrames& f) {
  double pe = 0.0;
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const Link& l = model.links[i];
    pe += l.mass * model.gravity *
          point_world(f, static_cast<int>(i), l.com_local()).y();
  }
  return pe;
}

/// Nominal standing pose of the subject model: legs straight and vertical,
/// trunk leaning forward by `pitch`, feet loaded by the body weight, elbows
/// at `elbow` and both crutch tips resting on the ground ahead of the body.
inline Eigen::VectorXd standing_pose(const RobotModel& model,
                                     double pitch = 0.2, double elbow = -0.1) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(model.dof());
  const auto& foot = model.contact_spheres[sphere_id::kFootL];
  const double weight = model.total_mass() * model.gravity;
  const double sag = 0.5 * weight / foot.stiffness;

  LinkFrames f = forward_kinematics(model, q);
  const Vec2 sole =
      point_world(f, foot.link, foot.center) - Vec2(0.0, foot.radius);
  q[1] = -sole.y() - sag;
  q[2] = pitch;
  q[model.joint_dof(joint_id::kHipL)] = -pitch;
  q[model.joint_dof(joint_id::kHipR)] = -pitch;

  // Shoulder angle that puts the tip sphere on the ground: the shoulder-to-tip
  // vector has fixed length for a given elbow angle, so only its direction is
  // free.
  const Link& upper = model.links[model.joints[joint_id::kShoulderL].child_link];
  const auto& tip = model.contact_spheres[sphere_id::kCrutchL];
  const Vec2 reach =
      Vec2(0.0, -upper.length) + rotate(elbow, Vec2(0.0, -tip.center.norm()));
  f = forward_kinematics(model, q);
  const Vec2 shoulder =
      point_world(f, 0, model.joints[joint_id::kShoulderL].origin);
  const double drop = shoulder.y() - tip.radius;
  const double len = reach.norm();
  // Absolute downward angle of the shoulder-to-tip line; negative swings the
  // tip forward.
  const double line = -std::acos(std::clamp(drop / len, -1.0, 1.0));
  const double inner = std::atan2(-reach.x(), -reach.y());
  const double shoulder_angle = line - inner - pitch;
  for (int j : {joint_id::kShoulderL, joint_id::kShoulderR}) {
    q[model.joint_dof(j)] = shoulder_angle;
  }
  for (int j : {joint_id::kArmL, joint_id::kArmR}) {
    q[model.joint_dof(j)] = elbow;
  }
  return q;
}

}  // namespace crutchgait

#pragma once

// Planar (sagittal) human-exoskeleton-crutch model built from anthropometric
// measurements. All geometry lives in the x-z plane: x forward, z up. Every
// planar angle is a rotation about the +y axis, so a positive trunk pitch leans
// the trunk forward and a positive rotation of a downward hanging segment
// swings its distal end backward.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <iomanip>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crutchgait {

using Vec2 = Eigen::Vector2d;  // (x, z)

/// Rotates a planar vector by `angle` about +y.
inline Vec2 rotate(double angle, const Vec2& v) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

/// Derivative of rotate(theta, v) with respect to theta, expressed with the
/// already rotated vector: d/dθ R(θ)v = perp(R(θ)v).
inline Vec2 perp(const Vec2& v) { return {v.y(), -v.x()}; }

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SubjectMeasurements {
  double mass = 62.2;
  double height = 1.68;
  double foot_size = 0.24;
  double arm_span = 1.63;
  double ankle_height = 0.08;
  double hip_height = 0.91;
  double hip_width = 0.25;
  double knee_height = 0.485;
  double shoulder_width = 0.354;
  double shoulder_height = 1.40;

  bool operator==(const SubjectMeasurements&) const = default;

  void validate() const {
    const std::array<double, 10> all = {mass,        height,     foot_size,
                                        arm_span,    ankle_height, hip_height,
                                        hip_width,   knee_height, shoulder_width,
                                        shoulder_height};
    for (double v : all) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ModelError("subject measurements must be strictly positive");
      }
    }
    if (!(ankle_height < knee_height && knee_height < hip_height &&
          hip_height < shoulder_height && shoulder_height < height)) {
      throw ModelError(
          "subject measurements must satisfy ankle < knee < hip < shoulder < "
          "height");
    }
    if (!(arm_span > shoulder_width)) {
      throw ModelError("arm span must exceed shoulder width");
    }
  }
};

/// Segment mass as a fraction of body mass, per side for paired segments.
struct MassFractions {
  double foot = 0.0145;
  double shank = 0.0465;
  double thigh = 0.100;
  double trunk = 0.578;  // trunk + head
  double upper_arm = 0.028;
  double forearm = 0.022;  // forearm + hand

  bool operator==(const MassFractions&) const = default;

  double sum() const {
    return trunk + 2.0 * (foot + shank + thigh + upper_arm + forearm);
  }
};

struct ContactParams {
  double radius = 0.02;
  double stiffness = 1e4;
  double damping = 100.0;
  double friction = 0.8;
  // Below this slip speed Coulomb friction is replaced by a viscous ramp.
  double slip_velocity = 0.05;

  bool operator==(const ContactParams&) const = default;
};

struct ModelConfig {
  SubjectMeasurements subject;
  MassFractions mass_fractions;
  double exo_thigh_mass = 2.0;
  double exo_shank_mass = 2.0;
  double exo_trunk_mass = 3.0;
  double crutch_length = 0.9;
  ContactParams contact;
  double hip_torque_limit = 120.0;
  double knee_torque_limit = 120.0;
  double ankle_torque_limit = 60.0;
  double shoulder_torque_limit = 60.0;
  double elbow_torque_limit = 40.0;
  double gravity = 9.81;
  double joint_damping = 1.0;      // N·m·s/rad, passive
  double limit_stiffness = 300.0;  // N·m/rad beyond anatomical range

  bool operator==(const ModelConfig&) const = default;
};

struct Link {
  std::string name;
  int parent = -1;  // parent link, -1 for the base
  int joint = -1;   // joint that moves this link, -1 for the base
  Vec2 axis{0.0, 1.0};
  double length = 0.0;
  double mass = 0.0;
  double human_mass = 0.0;
  double inertia_about_com = 0.0;
  double com_offset = 0.0;  // along `axis`

  Vec2 com_local() const { return axis * com_offset; }
};

struct Joint {
  std::string name;
  int parent_link = 0;
  int child_link = 0;
  Vec2 origin{0.0, 0.0};  // in the parent link frame
  double lower = -M_PI;
  double upper = M_PI;
  double torque_limit = 0.0;
};

struct ContactSphere {
  std::string name;
  int link = 0;
  Vec2 center{0.0, 0.0};  // in the link frame
  double radius = 0.02;
  double stiffness = 1e4;
  double damping = 100.0;
};

/// Joint indices in actuation order.
namespace joint_id {
inline constexpr int kAnkleL = 0;
inline constexpr int kKneeL = 1;
inline constexpr int kHipL = 2;
inline constexpr int kAnkleR = 3;
inline constexpr int kKneeR = 4;
inline constexpr int kHipR = 5;
inline constexpr int kShoulderL = 6;
inline constexpr int kArmL = 7;
inline constexpr int kShoulderR = 8;
inline constexpr int kArmR = 9;
inline constexpr int kCount = 10;
inline constexpr int kExoCount = 6;
}  // namespace joint_id

namespace sphere_id {
inline constexpr int kFootL = 0;
inline constexpr int kFootR = 1;
inline constexpr int kCrutchL = 2;
inline constexpr int kCrutchR = 3;
inline constexpr int kCount = 4;
}  // namespace sphere_id

/// Kinematic tree with a planar base (floating x, z, pitch or fixed at the
/// origin) and revolute joints. Links are stored parents-first.
struct RobotModel {
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<ContactSphere> contact_spheres;
  bool floating_base = true;
  double gravity = 9.81;
  double friction = 0.8;
  double slip_velocity = 0.05;
  double joint_damping = 0.0;
  double limit_stiffness = 0.0;

  int base_dof() const { return floating_base ? 3 : 0; }
  int joint_count() const { return static_cast<int>(joints.size()); }
  int dof() const { return base_dof() + joint_count(); }
  int joint_dof(int joint) const { return base_dof() + joint; }

  double total_mass() const {
    double m = 0.0;
    for (const auto& l : links) m += l.mass;
    return m;
  }
  double human_mass() const {
    double m = 0.0;
    for (const auto& l : links) m += l.human_mass;
    return m;
  }

  Eigen::VectorXd torque_limits() const {
    Eigen::VectorXd lim(joint_count());
    for (int j = 0; j < joint_count(); ++j) lim[j] = joints[j].torque_limit;
    return lim;
  }

  int link_index(const std::string& name) const {
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (links[i].name == name) return static_cast<int>(i);
    }
    throw ModelError("unknown link: " + name);
  }

  /// Checks tree ordering and the non-negativity of physical parameters.
  void validate() const {
    if (links.empty()) throw ModelError("model has no links");
    if (links[0].parent != -1) throw ModelError("link 0 must be the base");
    for (std::size_t i = 1; i < links.size(); ++i) {
      const auto& l = links[i];
      if (l.parent < 0 || l.parent >= static_cast<int>(i)) {
        throw ModelError("links must be ordered parents-first");
      }
      if (l.joint < 0 || l.joint >= joint_count() ||
          joints[l.joint].child_link != static_cast<int>(i) ||
          joints[l.joint].parent_link != l.parent) {
        throw ModelError("link/joint wiring is inconsistent for " + l.name);
      }
    }
    for (const auto& l : links) {
      if (l.mass < 0.0 || l.length < 0.0 || l.inertia_about_com < 0.0) {
        throw ModelError("negative physical parameter on link " + l.name);
      }
    }
    for (const auto& s : contact_spheres) {
      if (s.link < 0 || s.link >= static_cast<int>(links.size())) {
        throw ModelError("contact sphere attached to unknown link");
      }
    }
  }
};

namespace detail {

inline double rod_inertia(double mass, double length, double radius) {
  return mass * (3.0 * radius * radius + length * length) / 12.0;
}

inline double box_inertia(double mass, double a, double b) {
  return mass * (a * a + b * b) / 12.0;
}

}  // namespace detail

/// Builds the 10-joint planar human-exoskeleton model with crutch tips.
inline RobotModel build_subject_model(const SubjectMeasurements& m,
                                      const ModelConfig& cfg) {
  m.validate();
  const MassFractions& f = cfg.mass_fractions;
  const double frac_sum = f.sum();
  if (!(frac_sum > 0.0)) throw ModelError("mass fractions must sum to > 0");
  auto seg_mass = [&](double frac) { return m.mass * frac / frac_sum; };

  const double thigh_len = m.hip_height - m.knee_height;
  const double shank_len = m.knee_height - m.ankle_height;
  const double torso_len = m.shoulder_height - m.hip_height;
  const double trunk_extent = m.height - m.hip_height;  // pelvis to head top
  const double arm_len = 0.5 * (m.arm_span - m.shoulder_width);
  const double upper_arm_len = 0.5 * arm_len;
  const double forearm_len = arm_len - upper_arm_len;

  RobotModel model;
  model.floating_base = true;
  model.gravity = cfg.gravity;
  model.friction = cfg.contact.friction;
  model.slip_velocity = cfg.contact.slip_velocity;
  model.joint_damping = cfg.joint_damping;
  model.limit_stiffness = cfg.limit_stiffness;
  model.joints.resize(joint_id::kCount);

  const Vec2 down{0.0, -1.0};

  // Trunk and head: a box from the pelvis to the top of the head.
  {
    Link trunk;
    trunk.name = "trunk";
    trunk.axis = {0.0, 1.0};
    trunk.length = torso_len;
    trunk.human_mass = seg_mass(f.trunk);
    trunk.mass = trunk.human_mass + cfg.exo_trunk_mass;
    trunk.com_offset = 0.5 * trunk_extent;
    trunk.inertia_about_com =
        detail::box_inertia(trunk.mass, trunk_extent, 0.2);
    model.links.push_back(trunk);
  }

  auto add_link = [&](Link link, int joint, const std::string& joint_name,
                      int parent, Vec2 origin, double lower, double upper,
                      double torque_limit) {
    link.parent = parent;
    link.joint = joint;
    model.links.push_back(link);
    Joint& j = model.joints[joint];
    j.name = joint_name;
    j.parent_link = parent;
    j.child_link = static_cast<int>(model.links.size()) - 1;
    j.origin = origin;
    j.lower = lower;
    j.upper = upper;
    j.torque_limit = torque_limit;
    return j.child_link;
  };

  std::array<int, 2> forearm_links{};
  for (int side = 0; side < 2; ++side) {
    const std::string sfx = side == 0 ? "_l" : "_r";
    const int hip = side == 0 ? joint_id::kHipL : joint_id::kHipR;
    const int knee = side == 0 ? joint_id::kKneeL : joint_id::kKneeR;
    const int ankle = side == 0 ? joint_id::kAnkleL : joint_id::kAnkleR;

    Link thigh;
    thigh.name = "thigh" + sfx;
    thigh.axis = down;
    thigh.length = thigh_len;
    thigh.human_mass = seg_mass(f.thigh);
    thigh.mass = thigh.human_mass + cfg.exo_thigh_mass;
    thigh.com_offset = 0.5 * thigh_len;
    thigh.inertia_about_com = detail::rod_inertia(thigh.mass, thigh_len, 0.06);
    const int thigh_i = add_link(thigh, hip, "hip" + sfx, 0, {0.0, 0.0}, -2.0,
                                 0.5, cfg.hip_torque_limit);

    Link shank;
    shank.name = "shank" + sfx;
    shank.axis = down;
    shank.length = shank_len;
    shank.human_mass = seg_mass(f.shank);
    shank.mass = shank.human_mass + cfg.exo_shank_mass;
    shank.com_offset = 0.5 * shank_len;
    shank.inertia_about_com = detail::rod_inertia(shank.mass, shank_len, 0.045);
    const int shank_i = add_link(shank, knee, "knee" + sfx, thigh_i,
                                 {0.0, -thigh_len}, -0.05, 2.3,
                                 cfg.knee_torque_limit);

    // Foot: box of foot_size x ankle_height, ankle over its rear quarter.
    Link foot;
    foot.name = "foot" + sfx;
    const Vec2 box_center{0.25 * m.foot_size, -0.5 * m.ankle_height};
    foot.axis = box_center.normalized();
    foot.length = m.foot_size;
    foot.human_mass = seg_mass(f.foot);
    foot.mass = foot.human_mass;
    foot.com_offset = box_center.norm();
    foot.inertia_about_com =
        detail::box_inertia(foot.mass, m.foot_size, m.ankle_height);
    const int foot_i = add_link(foot, ankle, "ankle" + sfx, shank_i,
                                {0.0, -shank_len}, -0.5, 0.6,
                                cfg.ankle_torque_limit);

    ContactSphere s;
    s.name = "foot" + sfx;
    s.link = foot_i;
    s.radius = cfg.contact.radius;
    s.center = {0.0, -(m.ankle_height - cfg.contact.radius)};
    s.stiffness = cfg.contact.stiffness;
    s.damping = cfg.contact.damping;
    model.contact_spheres.push_back(s);
  }

  for (int side = 0; side < 2; ++side) {
    const std::string sfx = side == 0 ? "_l" : "_r";
    const int shoulder = side == 0 ? joint_id::kShoulderL : joint_id::kShoulderR;
    const int elbow = side == 0 ? joint_id::kArmL : joint_id::kArmR;

    Link upper;
    upper.name = "upper_arm" + sfx;
    upper.axis = down;
    upper.length = upper_arm_len;
    upper.human_mass = seg_mass(f.upper_arm);
    upper.mass = upper.human_mass;
    upper.com_offset = 0.5 * upper_arm_len;
    upper.inertia_about_com =
        detail::rod_inertia(upper.mass, upper_arm_len, 0.04);
    const int upper_i = add_link(upper, shoulder, "shoulder" + sfx, 0,
                                 {0.0, torso_len}, -2.8, 0.8,
                                 cfg.shoulder_torque_limit);

    // The crutch is a massless rigid extension of the forearm axis.
    Link fore;
    fore.name = "forearm" + sfx;
    fore.axis = down;
    fore.length = forearm_len + cfg.crutch_length;
    fore.human_mass = seg_mass(f.forearm);
    fore.mass = fore.human_mass;
    fore.com_offset = 0.5 * forearm_len;
    fore.inertia_about_com = detail::rod_inertia(fore.mass, forearm_len, 0.035);
    forearm_links[side] = add_link(fore, elbow, "arm" + sfx, upper_i,
                                   {0.0, -upper_arm_len}, -2.4, 0.0,
                                   cfg.elbow_torque_limit);
  }

  for (int side = 0; side < 2; ++side) {
    ContactSphere s;
    s.name = side == 0 ? "crutch_l" : "crutch_r";
    s.link = forearm_links[side];
    s.radius = cfg.contact.radius;
    s.center = down * model.links[forearm_links[side]].length;
    s.stiffness = cfg.contact.stiffness;
    s.damping = cfg.contact.damping;
    model.contact_spheres.push_back(s);
  }

  model.validate();
  return model;
}

inline RobotModel build_subject_model(const ModelConfig& cfg) {
  return build_subject_model(cfg.subject, cfg);
}

/// Index permutation that swaps left and right joints.
inline int mirror_joint(int j) {
  static constexpr std::array<int, joint_id::kCount> map = {3, 4, 5, 0, 1,
                                                            2, 8, 9, 6, 7};
  return map[j];
}

inline int mirror_sphere(int s) {
  static constexpr std::array<int, sphere_id::kCount> map = {1, 0, 3, 2};
  return map[s];
}

/// Swaps the left and right joint coordinates of a generalized vector.
inline Eigen::VectorXd mirror_generalized(const RobotModel& model,
                                          const Eigen::VectorXd& v) {
  Eigen::VectorXd out = v;
  const int base = model.base_dof();
  for (int j = 0; j < model.joint_count(); ++j) {
    out[base + mirror_joint(j)] = v[base + j];
  }
  return out;
}

/// Plain-text parameter table.
inline std::string describe(const RobotModel& model) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(4);
  os << "links\n";
  os << std::left << std::setw(12) << "name" << std::right << std::setw(10)
     << "length_m" << std::setw(10) << "mass_kg" << std::setw(12)
     << "inertia" << std::setw(10) << "com_m" << "  joint\n";
  for (const auto& l : model.links) {
    os << std::left << std::setw(12) << l.name << std::right << std::setw(10)
       << l.length << std::setw(10) << l.mass << std::setw(12)
       << l.inertia_about_com << std::setw(10) << l.com_offset << "  "
       << (l.joint >= 0 ? model.joints[l.joint].name : std::string("floating"))
       << "\n";
  }
  os << "joints\n";
  for (const auto& j : model.joints) {
    os << std::left << std::setw(12) << j.name << std::right
       << " range [" << j.lower << ", " << j.upper << "] rad"
       << "  torque_limit " << j.torque_limit << " N*m\n";
  }
  os << "contact spheres\n";
  for (const auto& s : model.contact_spheres) {
    os << std::left << std::setw(12) << s.name << std::right << " link "
       << model.links[s.link].name << "  radius " << s.radius << " m  k "
       << s.stiffness << " N/m  b " << s.damping << " N*s/m\n";
  }
  os << "total mass " << model.total_mass() << " kg (human "
     << model.human_mass() << " kg)\n";
  os << "gravity " << model.gravity << " m/s^2\n";
  return os.str();
}

}  // namespace crutchgait

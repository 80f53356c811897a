#pragma once

// Shaped walking reward: forward velocity tracking, posture constraints and
// the crutch-tip ground reaction penalty. Every term is a pure function.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace crutchgait {

enum class CrutchCostForm { kLinear, kSquared };

inline std::string to_string(CrutchCostForm f) {
  return f == CrutchCostForm::kLinear ? "linear" : "squared";
}

inline CrutchCostForm crutch_cost_form_from_string(const std::string& s) {
  if (s == "linear") return CrutchCostForm::kLinear;
  if (s == "squared") return CrutchCostForm::kSquared;
  throw std::invalid_argument("crutch_cost_form must be 'linear' or 'squared'");
}

struct RewardConfig {
  double c_walk = 5e5;
  double v_des = 0.25;  // m/s
  double p_z_min = 0.65;
  double p_z_max = 3.0;
  double orientation_target = 0.35;  // rad
  double orientation_gain = 8.0;
  double flat_contact_gain = 10.0;
  double w_crutch_reaction_force = 4e4;
  CrutchCostForm crutch_cost_form = CrutchCostForm::kLinear;
  double hip_penalty = 2.0;
  double crutch_contact_threshold = 0.003;  // m
  double crutch_contact_penalty = 2.0;
  double c_action = 1e-4;
  double dontfall_bonus = 5.0;

  bool operator==(const RewardConfig&) const = default;

  void validate() const {
    const std::array<double, 8> gains = {
        c_walk,         orientation_gain,      flat_contact_gain,
        w_crutch_reaction_force, hip_penalty, crutch_contact_penalty,
        c_action,       dontfall_bonus};
    for (double g : gains) {
      if (!(g >= 0.0)) throw std::invalid_argument("reward gains must be >= 0");
    }
    if (!(p_z_min < p_z_max)) {
      throw std::invalid_argument("reward p_z_min must be below p_z_max");
    }
    if (!(crutch_contact_threshold > 0.0)) {
      throw std::invalid_argument("crutch contact threshold must be > 0");
    }
  }
};

/// Per-leg joint angles used by the flat-foot term.
struct LegAngles {
  double hip = 0.0;
  double knee = 0.0;
  double ankle = 0.0;
};

/// Everything the reward looks at for one control step.
struct RewardInputs {
  double com_velocity_x = 0.0;  // ṗ_x
  double lateral_position = 0.0;  // p_y
  double base_height = 0.0;  // p_z
  double pitch = 0.0;  // a_z
  std::array<double, 6> exo_torques{};
  LegAngles right_leg;
  LegAngles left_leg;
  double crutch_right = 0.0;  // d_crutch_r
  double crutch_left = 0.0;   // d_crutch_l
};

struct RewardBreakdown {
  double r_walk = 0.0;
  double r_walk_straight = 0.0;
  double r_dont_fall = 0.0;
  double r_action = 0.0;
  double r_orientation = 0.0;
  double r_flat_contact = 0.0;
  double r_crutch_reaction_force = 0.0;
  double r_hip_angle = 0.0;
  double r_ensure_crutch_contact = 0.0;
  double total = 0.0;

  double sum_of_terms() const {
    return r_walk + r_walk_straight + r_dont_fall + r_action + r_orientation +
           r_flat_contact + r_crutch_reaction_force + r_hip_angle +
           r_ensure_crutch_contact;
  }

  bool operator==(const RewardBreakdown&) const = default;
};

inline double r_walk(double com_velocity_x, const RewardConfig& cfg) {
  const double e = com_velocity_x - cfg.v_des;
  return std::exp(-cfg.c_walk * e * e);
}

inline double r_walk_straight(double lateral_position) {
  return -std::abs(lateral_position);
}

inline double r_dont_fall(double base_height, const RewardConfig& cfg) {
  return (cfg.p_z_min < base_height && base_height < cfg.p_z_max)
             ? cfg.dontfall_bonus
             : 0.0;
}

inline double r_action(std::span<const double> exo_torques,
                       const RewardConfig& cfg) {
  double sq = 0.0;
  for (double t : exo_torques) sq += t * t;
  return -cfg.c_action * sq;
}

inline double r_orientation(double pitch, const RewardConfig& cfg = {}) {
  const double e = pitch - cfg.orientation_target;
  return -cfg.orientation_gain * e * e;
}

/// Squared absolute sole angle of one leg (trunk pitch plus the joint chain).
inline double foot_flat(double pitch, const LegAngles& leg) {
  const double a = pitch + leg.hip + leg.knee + leg.ankle;
  return a * a;
}

inline double r_flat_contact(double pitch, const LegAngles& right,
                             const LegAngles& left,
                             const RewardConfig& cfg = {}) {
  const double s = foot_flat(pitch, right) + foot_flat(pitch, left);
  return -cfg.flat_contact_gain * s * s;
}

inline double r_crutch_reaction_force(double crutch_right, double crutch_left,
                                      const RewardConfig& cfg) {
  const double load = cfg.crutch_cost_form == CrutchCostForm::kLinear
                          ? crutch_right + crutch_left
                          : crutch_right * crutch_right + crutch_left * crutch_left;
  return -cfg.w_crutch_reaction_force * load;
}

inline double r_hip_angle(double hip_right, double hip_left,
                          const RewardConfig& cfg = {}) {
  return (hip_right < 0.0 && hip_left < 0.0) ? -cfg.hip_penalty : 0.0;
}

inline double r_ensure_crutch_contact(double crutch_right, double crutch_left,
                                      const RewardConfig& cfg) {
  const double t = cfg.crutch_contact_threshold;
  return (crutch_right < t && crutch_left < t) ? -cfg.crutch_contact_penalty
                                               : 0.0;
}

inline RewardBreakdown total_reward(const RewardInputs& in,
                                    const RewardConfig& cfg) {
  RewardBreakdown b;
  b.r_walk = r_walk(in.com_velocity_x, cfg);
  b.r_walk_straight = r_walk_straight(in.lateral_position);
  b.r_dont_fall = r_dont_fall(in.base_height, cfg);
  b.r_action = r_action(in.exo_torques, cfg);
  b.r_orientation = r_orientation(in.pitch, cfg);
  b.r_flat_contact = r_flat_contact(in.pitch, in.right_leg, in.left_leg, cfg);
  b.r_crutch_reaction_force =
      r_crutch_reaction_force(in.crutch_right, in.crutch_left, cfg);
  b.r_hip_angle = r_hip_angle(in.right_leg.hip, in.left_leg.hip, cfg);
  b.r_ensure_crutch_contact =
      r_ensure_crutch_contact(in.crutch_right, in.crutch_left, cfg);
  b.total = b.sum_of_terms();
  return b;
}

}  // namespace crutchgait

#pragma once

// Walking environment around the planar simulator: reset, step, observation
// assembly and reward dispatch.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crutchgait/dynamics.hpp"
#include "crutchgait/kinematics.hpp"
#include "crutchgait/model.hpp"
#include "crutchgait/rewards.hpp"

namespace crutchgait {

enum class TerminationCause { kNone, kFall, kHorizon, kDivergence };

inline std::string to_string(TerminationCause c) {
  switch (c) {
    case TerminationCause::kNone: return "none";
    case TerminationCause::kFall: return "fall";
    case TerminationCause::kHorizon: return "horizon";
    case TerminationCause::kDivergence: return "divergence";
  }
  return "unknown";
}

/// Slot offsets of the flat observation vector.
struct ObservationLayout {
  static constexpr int kQuaternion = 0;     // w, x, y, z
  static constexpr int kJointAngles = 4;    // 10
  static constexpr int kContactDisp = 14;   // 4
  static constexpr int kPitchRate = 18;     // 1
  static constexpr int kJointVelocities = 19;  // 10
  static constexpr int kContactRates = 29;  // 4
  static constexpr int kComVelocity = 33;   // x, z
  static constexpr int kInertia = 35;       // 1
  static constexpr int kLastTorques = 36;   // 10
  static constexpr int kDim = 46;
};

struct StepInfo {
  Vec2 com = Vec2::Zero();
  Vec2 com_velocity = Vec2::Zero();
  double pitch = 0.0;
  double base_height = 0.0;
  double lateral = 0.0;  // always 0 in the sagittal plane
  std::array<double, 4> contact_disp{};
  int step = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  TerminationCause cause = TerminationCause::kNone;
  bool diverged = false;
  RewardBreakdown breakdown;
  StepInfo info;
};

struct EnvConfig {
  double dt = 0.005;
  int substeps = 4;
  int horizon = 2000;
  double reset_noise = 0.005;
  double nominal_pitch = 0.2;
  double nominal_elbow = -0.1;

  bool operator==(const EnvConfig&) const = default;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("env dt must be > 0");
    if (substeps < 1) throw std::invalid_argument("env substeps must be >= 1");
    if (horizon < 1) throw std::invalid_argument("env horizon must be >= 1");
    if (!(reset_noise >= 0.0)) throw std::invalid_argument("reset_noise must be >= 0");
  }
};

/// Quaternion (w, x, y, z) of a rotation by `pitch` about +y.
inline std::array<double, 4> pitch_quaternion(double pitch) {
  return {std::cos(0.5 * pitch), 0.0, std::sin(0.5 * pitch), 0.0};
}

inline std::vector<double> assemble_observation(const RobotModel& model,
                                                const SimState& s) {
  using L = ObservationLayout;
  std::vector<double> obs(L::kDim, 0.0);
  const auto quat = pitch_quaternion(s.q[2]);
  for (int i = 0; i < 4; ++i) obs[L::kQuaternion + i] = quat[i];
  for (int j = 0; j < joint_id::kCount; ++j) {
    obs[L::kJointAngles + j] = s.q[model.joint_dof(j)];
    obs[L::kJointVelocities + j] = s.qd[model.joint_dof(j)];
    obs[L::kLastTorques + j] = s.last_torques[j];
  }
  for (int c = 0; c < sphere_id::kCount; ++c) {
    obs[L::kContactDisp + c] = s.contact_disp[c];
    obs[L::kContactRates + c] = s.contact_rate[c];
  }
  obs[L::kPitchRate] = s.qd[2];
  const LinkFrames f = forward_kinematics(model, s.q, s.qd);
  const Vec2 v = com_velocity(model, f);
  obs[L::kComVelocity] = v.x();
  obs[L::kComVelocity + 1] = v.y();
  obs[L::kInertia] = aggregate_inertia(model, f);
  return obs;
}

/// Reward inputs read off a simulator state.
inline RewardInputs reward_inputs(const RobotModel& model, const SimState& s) {
  RewardInputs in;
  const LinkFrames f = forward_kinematics(model, s.q, s.qd);
  in.com_velocity_x = com_velocity(model, f).x();
  in.lateral_position = 0.0;
  in.base_height = s.q[1];
  in.pitch = s.q[2];
  for (int j = 0; j < joint_id::kExoCount; ++j) in.exo_torques[j] = s.last_torques[j];
  auto leg = [&](int hip, int knee, int ankle) {
    return LegAngles{s.q[model.joint_dof(hip)], s.q[model.joint_dof(knee)],
                     s.q[model.joint_dof(ankle)]};
  };
  in.right_leg = leg(joint_id::kHipR, joint_id::kKneeR, joint_id::kAnkleR);
  in.left_leg = leg(joint_id::kHipL, joint_id::kKneeL, joint_id::kAnkleL);
  in.crutch_right = s.contact_disp[sphere_id::kCrutchR];
  in.crutch_left = s.contact_disp[sphere_id::kCrutchL];
  return in;
}

class CrutchEnv {
 public:
  static constexpr int kObservationDim = ObservationLayout::kDim;
  static constexpr int kActionDim = joint_id::kCount;

  CrutchEnv(std::shared_ptr<const RobotModel> model, RewardConfig reward,
            EnvConfig cfg = {})
      : model_(std::move(model)), reward_(reward), cfg_(cfg) {
    if (!model_) throw std::invalid_argument("CrutchEnv needs a model");
    if (model_->joint_count() != kActionDim ||
        static_cast<int>(model_->contact_spheres.size()) != sphere_id::kCount) {
      throw std::invalid_argument("CrutchEnv needs the 10-joint crutch model");
    }
    reward_.validate();
    cfg_.validate();
    nominal_ = standing_pose(*model_, cfg_.nominal_pitch, cfg_.nominal_elbow);
    state_ = SimState::zero(*model_);
    state_.q = nominal_;
    refresh_contacts(*model_, state_);
  }

  int observation_dim() const { return kObservationDim; }
  int action_dim() const { return kActionDim; }

  std::vector<double> action_scale() const {
    const Eigen::VectorXd lim = model_->torque_limits();
    return std::vector<double>(lim.data(), lim.data() + lim.size());
  }

  std::vector<double> reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-cfg_.reset_noise,
                                                 cfg_.reset_noise);
    state_ = SimState::zero(*model_);
    state_.q = nominal_;
    if (cfg_.reset_noise > 0.0) {
      for (int i = 0; i < state_.q.size(); ++i) state_.q[i] += noise(rng);
    }
    refresh_contacts(*model_, state_);
    steps_ = 0;
    return observe();
  }

  std::vector<double> observe() const {
    return assemble_observation(*model_, state_);
  }

  StepResult step(std::span<const double> action) {
    if (static_cast<int>(action.size()) != kActionDim) {
      throw std::invalid_argument("action must have 10 entries");
    }
    StepResult r;
    try {
      SimState s = state_;
      for (int k = 0; k < cfg_.substeps; ++k) s = crutchgait::step(*model_, s, action, cfg_.dt);
      state_ = std::move(s);
    } catch (const DivergenceError&) {
      ++steps_;
      r.observation = observe();
      r.done = true;
      r.diverged = true;
      r.cause = TerminationCause::kDivergence;
      r.info = info();
      return r;
    }
    ++steps_;
    r.observation = observe();
    r.breakdown = total_reward(reward_inputs(*model_, state_), reward_);
    r.reward = r.breakdown.total;
    r.info = info();
    if (!(state_.q[1] > reward_.p_z_min)) {
      r.done = true;
      r.cause = TerminationCause::kFall;
    } else if (steps_ >= cfg_.horizon) {
      r.done = true;
      r.cause = TerminationCause::kHorizon;
    }
    return r;
  }

  const SimState& state() const { return state_; }
  void set_state(SimState s) { state_ = std::move(s); }
  int step_count() const { return steps_; }
  const RobotModel& model() const { return *model_; }
  const RewardConfig& reward_config() const { return reward_; }
  const EnvConfig& config() const { return cfg_; }
  const Eigen::VectorXd& nominal_pose() const { return nominal_; }

 private:
  StepInfo info() const {
    StepInfo i;
    const LinkFrames f = forward_kinematics(*model_, state_.q, state_.qd);
    i.com = total_com(*model_, f);
    i.com_velocity = com_velocity(*model_, f);
    i.pitch = state_.q[2];
    i.base_height = state_.q[1];
    for (int c = 0; c < sphere_id::kCount; ++c) i.contact_disp[c] = state_.contact_disp[c];
    i.step = steps_;
    return i;
  }

  std::shared_ptr<const RobotModel> model_;
  RewardConfig reward_;
  EnvConfig cfg_;
  Eigen::VectorXd nominal_;
  SimState state_;
  int steps_ = 0;
};

}  // namespace crutchgait

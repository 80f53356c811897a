#pragma once

// JSON experiment configuration with sections model, reward, ppo and
// experiment. Unknown keys are rejected.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "crutchgait/harness.hpp"

namespace crutchgait {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using nlohmann::json;

/// Reads fields out of one JSON object and remembers which keys were used.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && !it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  Section child(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Section(it == j_.end() ? empty : *it, path_ + "." + key);
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) {
        throw ConfigError("unknown key '" + path_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline void read_subject(Section s, SubjectMeasurements& m) {
  s.get("mass", m.mass);
  s.get("height", m.height);
  s.get("foot_size", m.foot_size);
  s.get("arm_span", m.arm_span);
  s.get("ankle_height", m.ankle_height);
  s.get("hip_height", m.hip_height);
  s.get("hip_width", m.hip_width);
  s.get("knee_height", m.knee_height);
  s.get("shoulder_width", m.shoulder_width);
  s.get("shoulder_height", m.shoulder_height);
  s.finish();
}

inline void read_model(Section s, ModelConfig& c) {
  read_subject(s.child("subject"), c.subject);
  {
    Section f = s.child("mass_fractions");
    f.get("foot", c.mass_fractions.foot);
    f.get("shank", c.mass_fractions.shank);
    f.get("thigh", c.mass_fractions.thigh);
    f.get("trunk", c.mass_fractions.trunk);
    f.get("upper_arm", c.mass_fractions.upper_arm);
    f.get("forearm", c.mass_fractions.forearm);
    f.finish();
  }
  {
    Section k = s.child("contact");
    k.get("radius", c.contact.radius);
    k.get("stiffness", c.contact.stiffness);
    k.get("damping", c.contact.damping);
    k.get("friction", c.contact.friction);
    k.get("slip_velocity", c.contact.slip_velocity);
    k.finish();
  }
  s.get("exo_thigh_mass", c.exo_thigh_mass);
  s.get("exo_shank_mass", c.exo_shank_mass);
  s.get("exo_trunk_mass", c.exo_trunk_mass);
  s.get("crutch_length", c.crutch_length);
  s.get("hip_torque_limit", c.hip_torque_limit);
  s.get("knee_torque_limit", c.knee_torque_limit);
  s.get("ankle_torque_limit", c.ankle_torque_limit);
  s.get("shoulder_torque_limit", c.shoulder_torque_limit);
  s.get("elbow_torque_limit", c.elbow_torque_limit);
  s.get("gravity", c.gravity);
  s.get("joint_damping", c.joint_damping);
  s.get("limit_stiffness", c.limit_stiffness);
  s.finish();
}

inline void read_reward(Section s, RewardConfig& r) {
  s.get("c_walk", r.c_walk);
  s.get("v_des", r.v_des);
  s.get("p_z_min", r.p_z_min);
  s.get("p_z_max", r.p_z_max);
  s.get("orientation_target", r.orientation_target);
  s.get("orientation_gain", r.orientation_gain);
  s.get("flat_contact_gain", r.flat_contact_gain);
  s.get("w_crutch_reaction_force", r.w_crutch_reaction_force);
  std::string form = to_string(r.crutch_cost_form);
  s.get("crutch_cost_form", form);
  try {
    r.crutch_cost_form = crutch_cost_form_from_string(form);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("reward.") + e.what());
  }
  s.get("hip_penalty", r.hip_penalty);
  s.get("crutch_contact_threshold", r.crutch_contact_threshold);
  s.get("crutch_contact_penalty", r.crutch_contact_penalty);
  s.get("c_action", r.c_action);
  s.get("dontfall_bonus", r.dontfall_bonus);
  s.finish();
}

inline void read_ppo(Section s, PpoConfig& p) {
  s.get("clip", p.clip);
  s.get("epochs", p.epochs);
  s.get("minibatch_size", p.minibatch_size);
  s.get("entropy_coef", p.entropy_coef);
  s.get("entropy_decay", p.entropy_decay);
  s.get("lambda", p.lambda);
  s.get("gamma", p.gamma);
  s.get("critic_coef", p.critic_coef);
  s.get("learning_rate", p.learning_rate);
  s.get("rollout_length", p.rollout_length);
  s.get("normalize_advantages", p.normalize_advantages);
  s.get("hidden_width", p.hidden_width);
  s.get("init_std", p.init_std);
  s.get("max_grad_norm", p.max_grad_norm);
  s.finish();
}

inline void read_experiment(Section s, ExperimentConfig& c) {
  std::string env = to_string(c.env_kind);
  s.get("env", env);
  if (env == "crutch") {
    c.env_kind = EnvKind::kCrutch;
  } else if (env == "point_mass") {
    c.env_kind = EnvKind::kPointMass;
  } else {
    throw ConfigError("experiment.env must be 'crutch' or 'point_mass'");
  }
  s.get("iterations", c.iterations);
  s.get("seeds", c.seeds);
  s.get("agents", c.agents);
  s.get("include_baseline", c.include_baseline);
  s.get("eval_horizon", c.eval_horizon);
  s.get("eval_weight", c.eval_weight);
  s.get("eval_episodes", c.eval_episodes);
  s.get("eval_seed", c.eval_seed);
  s.get("checkpoint_every", c.checkpoint_every);
  s.get("normalize_observations", c.normalize_observations);
  {
    Section e = s.child("simulation");
    e.get("dt", c.env.dt);
    e.get("substeps", c.env.substeps);
    e.get("horizon", c.env.horizon);
    e.get("reset_noise", c.env.reset_noise);
    e.get("nominal_pitch", c.env.nominal_pitch);
    e.get("nominal_elbow", c.env.nominal_elbow);
    e.finish();
  }
  {
    Section p = s.child("point_mass");
    p.get("mass", c.point_mass.mass);
    p.get("dt", c.point_mass.dt);
    p.get("c_walk", c.point_mass.c_walk);
    p.get("v_des", c.point_mass.v_des);
    p.get("horizon", c.point_mass.horizon);
    p.get("initial_velocity_max", c.point_mass.initial_velocity_max);
    p.get("force_scale", c.point_mass.force_scale);
    p.finish();
  }
  s.finish();
}

}  // namespace detail

/// Parses and validates a configuration document. Missing keys keep their
/// defaults.
inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  detail::Section root(j, "config");
  detail::read_model(root.child("model"), c.model);
  detail::read_reward(root.child("reward"), c.reward);
  detail::read_ppo(root.child("ppo"), c.ppo);
  detail::read_experiment(root.child("experiment"), c);
  root.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Full document with every field spelled out.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  const auto& m = c.model;
  j["model"] = {
      {"subject",
       {{"mass", m.subject.mass},
        {"height", m.subject.height},
        {"foot_size", m.subject.foot_size},
        {"arm_span", m.subject.arm_span},
        {"ankle_height", m.subject.ankle_height},
        {"hip_height", m.subject.hip_height},
        {"hip_width", m.subject.hip_width},
        {"knee_height", m.subject.knee_height},
        {"shoulder_width", m.subject.shoulder_width},
        {"shoulder_height", m.subject.shoulder_height}}},
      {"mass_fractions",
       {{"foot", m.mass_fractions.foot},
        {"shank", m.mass_fractions.shank},
        {"thigh", m.mass_fractions.thigh},
        {"trunk", m.mass_fractions.trunk},
        {"upper_arm", m.mass_fractions.upper_arm},
        {"forearm", m.mass_fractions.forearm}}},
      {"contact",
       {{"radius", m.contact.radius},
        {"stiffness", m.contact.stiffness},
        {"damping", m.contact.damping},
        {"friction", m.contact.friction},
        {"slip_velocity", m.contact.slip_velocity}}},
      {"exo_thigh_mass", m.exo_thigh_mass},
      {"exo_shank_mass", m.exo_shank_mass},
      {"exo_trunk_mass", m.exo_trunk_mass},
      {"crutch_length", m.crutch_length},
      {"hip_torque_limit", m.hip_torque_limit},
      {"knee_torque_limit", m.knee_torque_limit},
      {"ankle_torque_limit", m.ankle_torque_limit},
      {"shoulder_torque_limit", m.shoulder_torque_limit},
      {"elbow_torque_limit", m.elbow_torque_limit},
      {"gravity", m.gravity},
      {"joint_damping", m.joint_damping},
      {"limit_stiffness", m.limit_stiffness}};
  const auto& r = c.reward;
  j["reward"] = {{"c_walk", r.c_walk},
                 {"v_des", r.v_des},
                 {"p_z_min", r.p_z_min},
                 {"p_z_max", r.p_z_max},
                 {"orientation_target", r.orientation_target},
                 {"orientation_gain", r.orientation_gain},
                 {"flat_contact_gain", r.flat_contact_gain},
                 {"w_crutch_reaction_force", r.w_crutch_reaction_force},
                 {"crutch_cost_form", to_string(r.crutch_cost_form)},
                 {"hip_penalty", r.hip_penalty},
                 {"crutch_contact_threshold", r.crutch_contact_threshold},
                 {"crutch_contact_penalty", r.crutch_contact_penalty},
                 {"c_action", r.c_action},
                 {"dontfall_bonus", r.dontfall_bonus}};
  const auto& p = c.ppo;
  j["ppo"] = {{"clip", p.clip},
              {"epochs", p.epochs},
              {"minibatch_size", p.minibatch_size},
              {"entropy_coef", p.entropy_coef},
              {"entropy_decay", p.entropy_decay},
              {"lambda", p.lambda},
              {"gamma", p.gamma},
              {"critic_coef", p.critic_coef},
              {"learning_rate", p.learning_rate},
              {"rollout_length", p.rollout_length},
              {"normalize_advantages", p.normalize_advantages},
              {"hidden_width", p.hidden_width},
              {"init_std", p.init_std},
              {"max_grad_norm", p.max_grad_norm}};
  j["experiment"] = {
      {"env", to_string(c.env_kind)},
      {"iterations", c.iterations},
      {"seeds", c.seeds},
      {"agents", c.agents},
      {"include_baseline", c.include_baseline},
      {"eval_horizon", c.eval_horizon},
      {"eval_weight", c.eval_weight},
      {"eval_episodes", c.eval_episodes},
      {"eval_seed", c.eval_seed},
      {"checkpoint_every", c.checkpoint_every},
      {"normalize_observations", c.normalize_observations},
      {"simulation",
       {{"dt", c.env.dt},
        {"substeps", c.env.substeps},
        {"horizon", c.env.horizon},
        {"reset_noise", c.env.reset_noise},
        {"nominal_pitch", c.env.nominal_pitch},
        {"nominal_elbow", c.env.nominal_elbow}}},
      {"point_mass",
       {{"mass", c.point_mass.mass},
        {"dt", c.point_mass.dt},
        {"c_walk", c.point_mass.c_walk},
        {"v_des", c.point_mass.v_des},
        {"horizon", c.point_mass.horizon},
        {"initial_velocity_max", c.point_mass.initial_velocity_max},
        {"force_scale", c.point_mass.force_scale}}}};
  return j;
}

}  // namespace crutchgait

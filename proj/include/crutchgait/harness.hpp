#pragma once

// Experiment orchestration: the training loop, evaluation metrics, weight
// sweeps and learning-curve smoothing. Also hosts the 1-DOF point-mass task
// used to check the learner in isolation.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "crutchgait/csv.hpp"
#include "crutchgait/env.hpp"
#include "crutchgait/model.hpp"
#include "crutchgait/ppo.hpp"
#include "crutchgait/rewards.hpp"

namespace crutchgait {

template <typename E>
concept Environment = requires(E e, const E ce, std::uint64_t seed,
                               std::span<const double> action) {
  { e.reset(seed) } -> std::same_as<std::vector<double>>;
  { e.step(action) } -> std::same_as<StepResult>;
  { ce.observation_dim() } -> std::convertible_to<int>;
  { ce.action_dim() } -> std::convertible_to<int>;
  { ce.action_scale() } -> std::same_as<std::vector<double>>;
};

// ---- point mass -------------------------------------------------------------

struct PointMassConfig {
  double mass = 1.0;        // kg
  double dt = 0.05;         // s
  double c_walk = 50.0;
  double v_des = 0.25;      // m/s
  int horizon = 200;
  double initial_velocity_max = 0.5;
  double force_scale = 5.0;  // N per unit policy output

  bool operator==(const PointMassConfig&) const = default;

  void validate() const {
    if (!(mass > 0.0) || !(dt > 0.0)) throw std::invalid_argument("point_mass mass and dt must be > 0");
    if (horizon < 1) throw std::invalid_argument("point_mass horizon must be >= 1");
    if (!(c_walk >= 0.0) || !(force_scale > 0.0) || !(initial_velocity_max >= 0.0)) {
      throw std::invalid_argument("point_mass gains must be positive");
    }
  }
};

/// Frictionless unit mass pushed by a single force; the reward tracks a
/// target velocity.
class PointMassEnv {
 public:
  explicit PointMassEnv(PointMassConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  int observation_dim() const { return 1; }
  int action_dim() const { return 1; }
  std::vector<double> action_scale() const { return {cfg_.force_scale}; }

  std::vector<double> reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, cfg_.initial_velocity_max);
    velocity_ = u(rng);
    steps_ = 0;
    return {velocity_};
  }

  void set_velocity(double v) { velocity_ = v; }
  double velocity() const { return velocity_; }

  StepResult step(std::span<const double> action) {
    if (action.size() != 1) throw std::invalid_argument("point mass takes one force");
    velocity_ += action[0] * cfg_.dt / cfg_.mass;
    ++steps_;
    StepResult r;
    const double e = velocity_ - cfg_.v_des;
    r.breakdown.r_walk = std::exp(-cfg_.c_walk * e * e);
    r.breakdown.total = r.breakdown.r_walk;
    r.reward = r.breakdown.total;
    r.observation = {velocity_};
    r.info.com_velocity = Vec2(velocity_, 0.0);
    r.info.step = steps_;
    if (!std::isfinite(velocity_)) {
      r.done = true;
      r.diverged = true;
      r.cause = TerminationCause::kDivergence;
    } else if (steps_ >= cfg_.horizon) {
      r.done = true;
      r.cause = TerminationCause::kHorizon;
    }
    return r;
  }

  const PointMassConfig& config() const { return cfg_; }

 private:
  PointMassConfig cfg_;
  double velocity_ = 0.0;
  int steps_ = 0;
};

// ---- experiment configuration ------------------------------------------------

enum class EnvKind { kCrutch, kPointMass };

inline std::string to_string(EnvKind k) {
  return k == EnvKind::kCrutch ? "crutch" : "point_mass";
}

struct ExperimentConfig {
  ModelConfig model;
  RewardConfig reward;
  PpoConfig ppo;
  EnvConfig env;
  PointMassConfig point_mass;

  EnvKind env_kind = EnvKind::kCrutch;
  int iterations = 8000;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<double> agents = {4e4, 3e4, 2e4, 1e4};
  bool include_baseline = true;
  int eval_horizon = 2000;
  double eval_weight = 4e4;
  int eval_episodes = 1;
  std::uint64_t eval_seed = 1000;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  bool normalize_observations = true;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const {
    model.subject.validate();
    reward.validate();
    ppo.validate();
    env.validate();
    point_mass.validate();
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
    if (eval_horizon < 1) throw std::invalid_argument("eval_horizon must be >= 1");
    if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
    if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
    if (!(eval_weight >= 0.0)) throw std::invalid_argument("eval_weight must be >= 0");
    for (double w : agents) {
      if (!(w >= 0.0)) throw std::invalid_argument("agent weights must be >= 0");
    }
  }
};

// ---- training ------------------------------------------------------------------

struct TrainLogRow {
  int iter = 0;
  double cum_reward = 0.0;
  double mean_ratio = 0.0;
  double clip_frac = 0.0;
  double entropy = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy_coef = 0.0;
};

inline constexpr const char* kTrainLogHeader =
    "iter,cum_reward,mean_ratio,clip_frac,entropy,actor_loss,critic_loss,entropy_coef";

inline std::string to_csv(const TrainLogRow& r) {
  return join_csv({std::to_string(r.iter), format_double(r.cum_reward),
                   format_double(r.mean_ratio), format_double(r.clip_frac),
                   format_double(r.entropy), format_double(r.actor_loss),
                   format_double(r.critic_loss), format_double(r.entropy_coef)});
}

struct TrainResult {
  ActorCritic agent;
  std::vector<TrainLogRow> log;
  int episodes = 0;
  int diverged_episodes = 0;
};

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_iteration;
  std::function<void(int, const ActorCritic&)> on_checkpoint;
  int checkpoint_every = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collect-then-update loop. Every random draw descends from `seed`.
template <Environment Env>
TrainResult train(Env& env, const PpoConfig& ppo, int iterations,
                  std::uint64_t seed, bool normalize_observations = true,
                  const TrainHooks& hooks = {}) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  ppo.validate();
  std::mt19937_64 master(seed);
  const std::uint64_t init_seed = master();
  const std::uint64_t learner_seed = master();
  std::mt19937_64 sampler(master());

  TrainResult res;
  res.agent = ActorCritic::create(env.observation_dim(), env.action_dim(),
                                  env.action_scale(), ppo, init_seed,
                                  normalize_observations);
  PpoLearner learner(res.agent, ppo, learner_seed);
  ActorCritic& ac = res.agent;

  std::vector<double> raw = env.reset(master());
  ac.normalizer.update(raw);
  Eigen::VectorXd obs = to_eigen(ac.normalizer.normalize(raw));
  double episode_return = 0.0;
  double last_cum = 0.0;

  RolloutBuffer buf;
  for (int it = 1; it <= iterations; ++it) {
    buf.clear();
    double finished_sum = 0.0;
    int finished = 0;
    for (int t = 0; t < ppo.rollout_length; ++t) {
      const Eigen::VectorXd out = mlp_forward(ac.actor, obs);
      const Eigen::VectorXd mean = out.head(ac.action_dim());
      const Eigen::VectorXd sd = out.tail(ac.action_dim());
      const PolicySample s = policy_sample(mean, sd, sampler);
      const double v = ac.value(obs);
      const Eigen::VectorXd physical = ac.to_physical(s.action);
      const StepResult r = env.step(std::span<const double>(physical.data(), physical.size()));
      buf.add(obs, s.action, s.log_prob, v, r.reward, r.done);
      episode_return += r.reward;
      if (r.done) {
        ++res.episodes;
        if (r.diverged) ++res.diverged_episodes;
        finished_sum += episode_return;
        ++finished;
        episode_return = 0.0;
        raw = env.reset(master());
      } else {
        raw = r.observation;
      }
      ac.normalizer.update(raw);
      obs = to_eigen(ac.normalizer.normalize(raw));
    }
    buf.bootstrap_value = ac.value(obs);

    UpdateStats st;
    try {
      st = learner.update(ac, buf);
    } catch (const NonFiniteLossError& e) {
      throw TrainingError("training diverged at iteration " + std::to_string(it) +
                          ": " + e.what());
    }
    if (!ac.actor.all_finite() || !ac.critic.all_finite()) {
      throw TrainingError("network parameters became non-finite at iteration " +
                          std::to_string(it));
    }

    TrainLogRow row;
    row.iter = it;
    if (finished > 0) {
      last_cum = finished_sum / finished;
    } else if (res.episodes == 0) {
      last_cum = episode_return;
    }
    row.cum_reward = last_cum;
    row.mean_ratio = st.mean_ratio;
    row.clip_frac = st.clip_fraction;
    row.entropy = st.entropy;
    row.actor_loss = st.actor_loss;
    row.critic_loss = st.critic_loss;
    row.entropy_coef = st.entropy_coef;
    res.log.push_back(row);
    if (hooks.on_iteration) hooks.on_iteration(row);
    if (hooks.on_checkpoint &&
        (it == iterations || (hooks.checkpoint_every > 0 && it % hooks.checkpoint_every == 0))) {
      hooks.on_checkpoint(it, ac);
    }
  }
  return res;
}

/// Trailing mean over min(window, i + 1) samples.
inline std::vector<double> moving_average(std::span<const double> series,
                                          int window = 100) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    double s = 0.0;
    for (std::size_t k = i + 1 - n; k <= i; ++k) s += series[k];
    out[i] = s / static_cast<double>(n);
  }
  return out;
}

// ---- evaluation ------------------------------------------------------------------

struct EvalSample {
  double com_velocity_x = 0.0;
  double pitch = 0.0;
  double lateral = 0.0;
  double crutch_right = 0.0;
  double crutch_left = 0.0;
};

struct MetricsReport {
  double mean_crutch_cost = 0.0;
  double mape_velocity = 0.0;     // %
  double mape_orientation = 0.0;  // %
  double mean_abs_lateral_displacement = 0.0;  // m
  int steps = 0;
  std::string termination = "none";

  bool operator==(const MetricsReport&) const = default;
};

struct MetricTargets {
  double eval_weight = 4e4;
  CrutchCostForm form = CrutchCostForm::kLinear;
  double v_des = 0.25;
  double orientation_target = 0.35;
};

inline MetricsReport compute_metrics(std::span<const EvalSample> samples,
                                     const MetricTargets& t) {
  MetricsReport m;
  m.steps = static_cast<int>(samples.size());
  if (samples.empty()) return m;
  for (const auto& s : samples) {
    m.mean_crutch_cost += t.eval_weight * (t.form == CrutchCostForm::kLinear
                                               ? s.crutch_right + s.crutch_left
                                               : s.crutch_right * s.crutch_right +
                                                     s.crutch_left * s.crutch_left);
    m.mape_velocity += std::abs(s.com_velocity_x - t.v_des) / t.v_des * 100.0;
    m.mape_orientation +=
        std::abs(s.pitch - t.orientation_target) / t.orientation_target * 100.0;
    m.mean_abs_lateral_displacement += std::abs(s.lateral);
  }
  const double n = static_cast<double>(samples.size());
  m.mean_crutch_cost /= n;
  m.mape_velocity /= n;
  m.mape_orientation /= n;
  m.mean_abs_lateral_displacement /= n;
  return m;
}

inline constexpr const char* kEvalHeader =
    "mean_crutch_cost,mape_velocity,mape_orientation,mean_abs_lat_disp";

inline std::string to_csv(const MetricsReport& m) {
  return join_csv({format_double(m.mean_crutch_cost), format_double(m.mape_velocity),
                   format_double(m.mape_orientation),
                   format_double(m.mean_abs_lateral_displacement)});
}

struct EvalEpisode {
  std::vector<EvalSample> samples;
  std::vector<double> rewards;
  std::vector<double> r_walk;
  TerminationCause cause = TerminationCause::kNone;
};

/// Deterministic rollout with the policy mean and a frozen normalizer.
/// `on_step` sees every StepResult (used for trajectory dumps).
template <Environment Env>
EvalEpisode run_policy(const ActorCritic& agent, Env& env, std::uint64_t seed,
                       int horizon,
                       const std::function<void(const StepResult&)>& on_step = {}) {
  EvalEpisode ep;
  std::vector<double> raw = env.reset(seed);
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd obs = to_eigen(agent.normalizer.normalize(raw));
    const Eigen::VectorXd a = agent.mean_action(obs);
    const StepResult r = env.step(std::span<const double>(a.data(), a.size()));
    if (on_step) on_step(r);
    EvalSample s;
    s.com_velocity_x = r.info.com_velocity.x();
    s.pitch = r.info.pitch;
    s.lateral = r.info.lateral;
    s.crutch_left = r.info.contact_disp[2];
    s.crutch_right = r.info.contact_disp[3];
    ep.samples.push_back(s);
    ep.rewards.push_back(r.reward);
    ep.r_walk.push_back(r.breakdown.r_walk);
    raw = r.observation;
    if (r.done) {
      ep.cause = r.cause;
      if (r.cause != TerminationCause::kHorizon || t + 1 < horizon) break;
    }
  }
  return ep;
}

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Element-wise median over episodes.
inline MetricsReport median_report(const std::vector<MetricsReport>& reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  auto field = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(get(r));
    return median_of(std::move(v));
  };
  m.mean_crutch_cost = field([](const MetricsReport& r) { return r.mean_crutch_cost; });
  m.mape_velocity = field([](const MetricsReport& r) { return r.mape_velocity; });
  m.mape_orientation = field([](const MetricsReport& r) { return r.mape_orientation; });
  m.mean_abs_lateral_displacement =
      field([](const MetricsReport& r) { return r.mean_abs_lateral_displacement; });
  m.steps = static_cast<int>(field([](const MetricsReport& r) { return double(r.steps); }));
  m.termination = reports.front().termination;
  return m;
}

// ---- factories tying the config to concrete environments -------------------------

inline std::shared_ptr<const RobotModel> shared_model(const ModelConfig& cfg) {
  return std::make_shared<const RobotModel>(build_subject_model(cfg));
}

inline CrutchEnv make_crutch_env(const ExperimentConfig& cfg,
                                 std::shared_ptr<const RobotModel> model,
                                 double weight, int horizon) {
  RewardConfig r = cfg.reward;
  r.w_crutch_reaction_force = weight;
  EnvConfig e = cfg.env;
  e.horizon = horizon;
  return CrutchEnv(std::move(model), r, e);
}

inline MetricTargets targets_for(const ExperimentConfig& cfg) {
  MetricTargets t;
  t.eval_weight = cfg.eval_weight;
  t.form = cfg.reward.crutch_cost_form;
  t.v_des = cfg.env_kind == EnvKind::kCrutch ? cfg.reward.v_des : cfg.point_mass.v_des;
  t.orientation_target = cfg.reward.orientation_target;
  return t;
}

/// Runs `fn(env)` with the environment selected by the config.
template <typename Fn>
decltype(auto) with_env(const ExperimentConfig& cfg, double weight, int horizon,
                        const std::shared_ptr<const RobotModel>& model, Fn&& fn) {
  if (cfg.env_kind == EnvKind::kPointMass) {
    PointMassConfig pm = cfg.point_mass;
    pm.horizon = horizon;
    PointMassEnv env(pm);
    return fn(env);
  }
  CrutchEnv env = make_crutch_env(cfg, model ? model : shared_model(cfg.model),
                                  weight, horizon);
  return fn(env);
}

inline int training_horizon(const ExperimentConfig& cfg) {
  return cfg.env_kind == EnvKind::kPointMass ? cfg.point_mass.horizon : cfg.env.horizon;
}

struct EvaluationResult {
  MetricsReport report;  // element-wise median over episodes
  std::vector<MetricsReport> episodes;
  double mean_r_walk = 0.0;
};

/// Evaluates `agent` over cfg.eval_episodes deterministic episodes.
inline EvaluationResult evaluate(
    const ActorCritic& agent, const ExperimentConfig& cfg,
    const std::shared_ptr<const RobotModel>& model = nullptr,
    const std::function<void(const StepResult&)>& on_first_episode_step = {}) {
  ActorCritic frozen = agent;
  frozen.normalizer.set_frozen(true);
  EvaluationResult out;
  std::vector<double> walk;
  for (int e = 0; e < cfg.eval_episodes; ++e) {
    // Training weight does not affect the dynamics; evaluation scores use
    // eval_weight through compute_metrics.
    EvalEpisode ep = with_env(cfg, cfg.eval_weight, cfg.eval_horizon, model, [&](auto& env) {
      return run_policy(frozen, env, cfg.eval_seed + static_cast<std::uint64_t>(e),
                        cfg.eval_horizon,
                        e == 0 ? on_first_episode_step
                               : std::function<void(const StepResult&)>{});
    });
    MetricsReport m = compute_metrics(ep.samples, targets_for(cfg));
    m.termination = to_string(ep.cause);
    out.episodes.push_back(m);
    walk.push_back(mean_of(ep.r_walk));
  }
  out.report = median_report(out.episodes);
  out.mean_r_walk = median_of(walk);
  return out;
}

// ---- single run with on-disk outputs ------------------------------------------------

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  os << text;
  if (!os) throw DataError("write failed for " + p.string());
}

inline void save_checkpoint(const std::filesystem::path& p, const ActorCritic& ac) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  write_checkpoint(os, ac);
}

inline ActorCritic load_checkpoint(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + p.string());
  return read_checkpoint(is);
}

struct RunOutputs {
  TrainResult train;
  EvaluationResult eval;
};

/// Trains with reward weight `weight` and evaluates. Writes train_log.csv,
/// checkpoint_<iter> and eval_metrics.csv into `dir` when it is non-empty.
inline RunOutputs run_experiment(const ExperimentConfig& cfg, double weight,
                                 std::uint64_t seed, const std::filesystem::path& dir,
                                 const std::shared_ptr<const RobotModel>& model = nullptr,
                                 const std::function<void(const TrainLogRow&)>& progress = {}) {
  cfg.validate();
  std::unique_ptr<std::ofstream> log;
  TrainHooks hooks;
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    log = std::make_unique<std::ofstream>(dir / "train_log.csv", std::ios::binary);
    if (!*log) throw DataError("cannot write " + (dir / "train_log.csv").string());
    *log << kTrainLogHeader << '\n';
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](int it, const ActorCritic& ac) {
      save_checkpoint(dir / ("checkpoint_" + std::to_string(it)), ac);
    };
  }
  hooks.on_iteration = [&](const TrainLogRow& row) {
    if (log) *log << to_csv(row) << '\n' << std::flush;
    if (progress) progress(row);
  };
  RunOutputs out;
  const auto mdl = cfg.env_kind == EnvKind::kCrutch && !model ? shared_model(cfg.model) : model;
  out.train = with_env(cfg, weight, training_horizon(cfg), mdl, [&](auto& env) {
    return train(env, cfg.ppo, cfg.iterations, seed, cfg.normalize_observations, hooks);
  });
  out.eval = evaluate(out.train.agent, cfg, mdl);
  if (!dir.empty()) {
    write_text_file(dir / "eval_metrics.csv",
                    std::string(kEvalHeader) + "\n" + to_csv(out.eval.report) + "\n");
  }
  return out;
}

// ---- sweep -------------------------------------------------------------------------------

struct SweepCell {
  std::string agent;  // "agent1".. or "baseline"
  double weight = 0.0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  double final_cum_reward = 0.0;
};

struct SweepAgentSummary {
  std::string agent;
  double weight = 0.0;
  int runs = 0;
  MetricsReport mean;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // canonical order: agent list, then seeds
  std::vector<SweepAgentSummary> summary;
};

/// (label, weight) pairs in canonical order; the baseline comes last.
inline std::vector<std::pair<std::string, double>> sweep_agents(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, double>> a;
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    a.emplace_back("agent" + std::to_string(i + 1), cfg.agents[i]);
  }
  if (cfg.include_baseline) a.emplace_back("baseline", 0.0);
  return a;
}

inline std::vector<SweepAgentSummary> summarize(const std::vector<SweepCell>& cells) {
  std::vector<SweepAgentSummary> out;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepAgentSummary& s) {
      return s.agent == c.agent;
    });
    if (it == out.end()) {
      out.push_back({c.agent, c.weight, 0, {}});
      it = std::prev(out.end());
    }
    it->runs += 1;
    it->mean.mean_crutch_cost += c.metrics.mean_crutch_cost;
    it->mean.mape_velocity += c.metrics.mape_velocity;
    it->mean.mape_orientation += c.metrics.mape_orientation;
    it->mean.mean_abs_lateral_displacement += c.metrics.mean_abs_lateral_displacement;
    it->mean.steps += c.metrics.steps;
  }
  for (auto& s : out) {
    s.mean.mean_crutch_cost /= s.runs;
    s.mean.mape_velocity /= s.runs;
    s.mean.mape_orientation /= s.runs;
    s.mean.mean_abs_lateral_displacement /= s.runs;
    s.mean.steps /= s.runs;
  }
  return out;
}

/// Trains and evaluates every (agent, seed) cell on up to `parallel` threads.
/// Results land in canonical order regardless of scheduling.
inline SweepResult sweep(const ExperimentConfig& cfg, int parallel,
                         const std::filesystem::path& dir,
                         const std::function<void(const SweepCell&)>& on_cell = {}) {
  cfg.validate();
  const auto agents = sweep_agents(cfg);
  if (agents.empty()) throw std::invalid_argument("sweep needs at least one agent");
  SweepResult res;
  for (const auto& [label, w] : agents) {
    for (std::uint64_t s : cfg.seeds) res.cells.push_back({label, w, s, {}, 0.0});
  }
  const auto model = cfg.env_kind == EnvKind::kCrutch ? shared_model(cfg.model) : nullptr;
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= res.cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      SweepCell& c = res.cells[i];
      try {
        const auto sub = dir.empty() ? std::filesystem::path{}
                                     : dir / (c.agent + "_seed" + std::to_string(c.seed));
        const RunOutputs out = run_experiment(cfg, c.weight, c.seed, sub, model);
        c.metrics = out.eval.report;
        c.final_cum_reward = out.train.log.empty() ? 0.0 : out.train.log.back().cum_reward;
        if (on_cell) {
          std::lock_guard<std::mutex> lock(mu);
          on_cell(c);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel, static_cast<int>(res.cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  res.summary = summarize(res.cells);
  return res;
}

inline constexpr const char* kComparisonHeader =
    "agent,weight,seed,mean_crutch_cost,mape_velocity,mape_orientation,mean_abs_lat_disp";
inline constexpr const char* kTable5Header =
    "agent,weight,runs,mean_crutch_cost,mape_velocity,mape_orientation,mean_abs_lat_disp";

inline std::string comparison_csv(const SweepResult& r) {
  std::string s = std::string(kComparisonHeader) + "\n";
  for (const auto& c : r.cells) {
    s += join_csv({c.agent, format_double(c.weight), std::to_string(c.seed),
                   to_csv(c.metrics)}) + "\n";
  }
  return s;
}

inline std::string table5_csv(const SweepResult& r) {
  std::string s = std::string(kTable5Header) + "\n";
  for (const auto& a : r.summary) {
    s += join_csv({a.agent, format_double(a.weight), std::to_string(a.runs),
                   to_csv(a.mean)}) + "\n";
  }
  return s;
}

}  // namespace crutchgait

#pragma once

// Proximal policy optimization: actor-critic bundle, advantage estimation,
// clipped surrogate and the epoch/minibatch update.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crutchgait/csv.hpp"
#include "crutchgait/nn.hpp"
#include "crutchgait/normalizer.hpp"

namespace crutchgait {

struct PpoConfig {
  double clip = 0.2;
  int epochs = 10;
  int minibatch_size = 64;
  double entropy_coef = 1e-3;
  double entropy_decay = 0.99;
  double lambda = 0.95;
  double gamma = 0.99;
  double critic_coef = 0.5;
  double learning_rate = 3e-4;
  int rollout_length = 2000;
  bool normalize_advantages = true;
  int hidden_width = 200;
  double init_std = 0.5;  // in units of the action scale
  double max_grad_norm = 0.5;  // global clip per network, 0 disables

  bool operator==(const PpoConfig&) const = default;

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("ppo clip must be in (0, 1)");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("ppo lambda must be in (0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo gamma must be in (0, 1]");
    if (epochs < 1) throw std::invalid_argument("ppo epochs must be >= 1");
    if (minibatch_size < 1) throw std::invalid_argument("ppo minibatch_size must be >= 1");
    if (rollout_length < 1) throw std::invalid_argument("ppo rollout_length must be >= 1");
    if (!(entropy_coef >= 0.0) || !(entropy_decay > 0.0) || !(critic_coef >= 0.0)) {
      throw std::invalid_argument("ppo coefficients must be non-negative");
    }
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("ppo learning_rate must be >= 0");
    if (hidden_width < 1) throw std::invalid_argument("ppo hidden_width must be >= 1");
    if (!(init_std > 0.0)) throw std::invalid_argument("ppo init_std must be > 0");
    if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("ppo max_grad_norm must be >= 0");
  }
};

// ---- scalar pieces of the objective --------------------------------------

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Backward recursion over the rollout. `bootstrap` is V of the state after
/// the last step and is ignored when that step is terminal.
inline GaeResult compute_gae(std::span<const double> rewards,
                             std::span<const double> values,
                             std::span<const std::uint8_t> dones,
                             double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("compute_gae: sequences differ in length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double next_value = k + 1 < n ? values[k + 1] : bootstrap;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
  }
  return out;
}

/// In-place shift to zero mean and scale to unit (population) variance.
inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.size() < 2) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= n;
  const double sd = std::sqrt(var);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
}

inline double prob_ratio(double log_prob_new, double log_prob_old) {
  return std::exp(log_prob_new - log_prob_old);
}

inline double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

inline double critic_loss(std::span<const double> predicted,
                          std::span<const double> target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw std::invalid_argument("critic_loss: bad batch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - target[i];
    s += e * e;
  }
  return s / static_cast<double>(predicted.size());
}

/// Quantity minimized by the optimizer: the negated regularized objective.
inline double total_loss(double surrogate, double critic, double entropy,
                         double critic_coef, double entropy_coef) {
  return -(surrogate - critic_coef * critic + entropy_coef * entropy);
}

// ---- actor-critic ---------------------------------------------------------

/// Actor and critic networks, the observation normalizer and the per-joint
/// action scale. The actor works in scaled units; `action_scale` maps them
/// to physical actions.
struct ActorCritic {
  MlpParams actor;   // obs -> [mean, std]
  MlpParams critic;  // obs -> value
  RunningNormalizer normalizer;
  std::vector<double> action_scale;

  int observation_dim() const { return actor.input_dim(); }
  int action_dim() const { return actor.output_dim() / 2; }

  static ActorCritic create(int obs_dim, int act_dim,
                            std::vector<double> action_scale,
                            const PpoConfig& cfg, std::uint64_t seed,
                            bool normalize_observations = true) {
    if (static_cast<int>(action_scale.size()) != act_dim) {
      throw std::invalid_argument("action scale has wrong dimension");
    }
    std::mt19937_64 rng(seed);
    ActorCritic ac;
    ac.actor = make_mlp({obs_dim, cfg.hidden_width, 2 * act_dim},
                        Activation::kGaussianHead, rng, 1.0, 0.01);
    ac.actor.layers.back().bias.tail(act_dim).setConstant(softplus_inverse(cfg.init_std));
    ac.critic = make_mlp({obs_dim, cfg.hidden_width, 1}, Activation::kLinear, rng, 1.0, 1.0);
    ac.normalizer = RunningNormalizer(obs_dim);
    ac.normalizer.set_enabled(normalize_observations);
    ac.action_scale = std::move(action_scale);
    return ac;
  }

  Eigen::VectorXd to_physical(const Eigen::VectorXd& scaled) const {
    Eigen::VectorXd a(scaled.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = scaled[i] * action_scale[i];
    return a;
  }

  /// Mean action in physical units for an already normalized observation.
  Eigen::VectorXd mean_action(const Eigen::VectorXd& obs_normalized) const {
    const Eigen::VectorXd out = mlp_forward(actor, obs_normalized);
    return to_physical(out.head(action_dim()));
  }

  double value(const Eigen::VectorXd& obs_normalized) const {
    return mlp_forward(critic, obs_normalized)[0];
  }

  bool operator==(const ActorCritic&) const = default;
};

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---- rollout storage -----------------------------------------------------

struct RolloutBuffer {
  std::vector<Eigen::VectorXd> observations;  // normalized at collection time
  std::vector<Eigen::VectorXd> actions;       // scaled units
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  double bootstrap_value = 0.0;

  std::size_t size() const { return rewards.size(); }

  void clear() {
    observations.clear();
    actions.clear();
    log_probs.clear();
    values.clear();
    rewards.clear();
    dones.clear();
    bootstrap_value = 0.0;
  }

  void add(Eigen::VectorXd obs, Eigen::VectorXd action, double log_prob,
           double value, double reward, bool done) {
    if (!std::isfinite(log_prob)) throw std::invalid_argument("non-finite log_prob");
    observations.push_back(std::move(obs));
    actions.push_back(std::move(action));
    log_probs.push_back(log_prob);
    values.push_back(value);
    rewards.push_back(reward);
    dones.push_back(done ? 1 : 0);
  }

  bool consistent() const {
    const std::size_t n = rewards.size();
    return observations.size() == n && actions.size() == n &&
           log_probs.size() == n && values.size() == n && dones.size() == n;
  }
};

// ---- learner ---------------------------------------------------------------

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UpdateStats {
  double actor_loss = 0.0;   // mean negated clipped surrogate
  double critic_loss = 0.0;  // mean squared error
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double first_minibatch_ratio = 0.0;
  double entropy_coef = 0.0;  // after decay
  int minibatches = 0;

  bool operator==(const UpdateStats&) const = default;
};

/// Optimizer state that persists across updates.
struct PpoLearner {
  PpoConfig cfg;
  Adam actor_opt;
  Adam critic_opt;
  double entropy_coef = 0.0;
  std::mt19937_64 rng;

  PpoLearner(const ActorCritic& ac, const PpoConfig& c, std::uint64_t seed)
      : cfg(c),
        actor_opt(ac.actor, AdamConfig{c.learning_rate}),
        critic_opt(ac.critic, AdamConfig{c.learning_rate}),
        entropy_coef(c.entropy_coef),
        rng(seed) {
    cfg.validate();
  }

  UpdateStats update(ActorCritic& ac, const RolloutBuffer& buf) {
    if (!buf.consistent() || buf.size() == 0) {
      throw std::invalid_argument("rollout buffer is empty or inconsistent");
    }
    const int n = static_cast<int>(buf.size());
    const int obs_dim = ac.observation_dim();
    const int act_dim = ac.action_dim();

    GaeResult gae = compute_gae(buf.rewards, buf.values, buf.dones,
                                buf.bootstrap_value, cfg.gamma, cfg.lambda);
    std::vector<double> adv = gae.advantages;
    if (cfg.normalize_advantages) normalize_advantages(adv);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    UpdateStats st;
    bool first = true;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (int start = 0; start < n; start += cfg.minibatch_size) {
        const int b = std::min(cfg.minibatch_size, n - start);
        Eigen::MatrixXd x(obs_dim, b);
        Eigen::MatrixXd act(act_dim, b);
        for (int k = 0; k < b; ++k) {
          x.col(k) = buf.observations[order[start + k]];
          act.col(k) = buf.actions[order[start + k]];
        }

        MlpCache actor_cache;
        const Eigen::MatrixXd out = mlp_forward(ac.actor, x, &actor_cache);
        MlpCache critic_cache;
        const Eigen::MatrixXd v = mlp_forward(ac.critic, x, &critic_cache);

        Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(2 * act_dim, b);
        Eigen::MatrixXd d_v(1, b);
        double surr_sum = 0.0, ratio_sum = 0.0, ent_sum = 0.0, vloss_sum = 0.0;
        int clipped = 0;
        const double inv_b = 1.0 / b;
        for (int k = 0; k < b; ++k) {
          const int idx = order[start + k];
          const Eigen::VectorXd mean = out.col(k).head(act_dim);
          const Eigen::VectorXd sd = out.col(k).tail(act_dim);
          const double lp = gaussian_log_prob(mean, sd, act.col(k));
          const double ratio = prob_ratio(lp, buf.log_probs[idx]);
          const double a = adv[idx];
          const double surr = clipped_surrogate(ratio, a, cfg.clip);
          surr_sum += surr;
          ratio_sum += ratio;
          if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;
          // The unclipped branch carries gradient only when it is the minimum.
          const bool active = ratio * a <= std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a;
          const double d_lp = active ? -a * ratio * inv_b : 0.0;
          const GaussianLogProbGrad g = gaussian_log_prob_grad(mean, sd, act.col(k));
          // Entropy contributes d/dσ ½ln(2πeσ²) = 1/σ per dimension.
          d_out.col(k).head(act_dim) = d_lp * g.d_mean;
          d_out.col(k).tail(act_dim) =
              d_lp * g.d_std - (entropy_coef * inv_b) * sd.cwiseInverse();
          ent_sum += policy_entropy(sd);
          const double e = v(0, k) - gae.returns[idx];
          vloss_sum += e * e;
          d_v(0, k) = cfg.critic_coef * 2.0 * e * inv_b;
        }

        const double loss = total_loss(surr_sum * inv_b, vloss_sum * inv_b,
                                       ent_sum * inv_b, cfg.critic_coef, entropy_coef);
        if (!std::isfinite(loss)) throw NonFiniteLossError("PPO loss is not finite");

        if (first) {
          st.first_minibatch_ratio = ratio_sum * inv_b;
          first = false;
        }
        st.actor_loss += -surr_sum * inv_b;
        st.critic_loss += vloss_sum * inv_b;
        st.entropy += ent_sum * inv_b;
        st.mean_ratio += ratio_sum * inv_b;
        st.clip_fraction += static_cast<double>(clipped) * inv_b;
        ++st.minibatches;

        MlpGrads ga = mlp_backward(ac.actor, actor_cache, d_out);
        MlpGrads gc = mlp_backward(ac.critic, critic_cache, d_v);
        if (cfg.max_grad_norm > 0.0) {
          for (MlpGrads* g : {&ga, &gc}) {
            const double norm = grad_norm(*g);
            if (norm > cfg.max_grad_norm) scale_grads(*g, cfg.max_grad_norm / norm);
          }
        }
        actor_opt.step(ac.actor, ga);
        critic_opt.step(ac.critic, gc);
      }
    }
    const double m = st.minibatches;
    st.actor_loss /= m;
    st.critic_loss /= m;
    st.entropy /= m;
    st.mean_ratio /= m;
    st.clip_fraction /= m;
    entropy_coef *= cfg.entropy_decay;
    st.entropy_coef = entropy_coef;
    return st;
  }
};

// ---- checkpoint -------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "crutchgait-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const ActorCritic& ac) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  write_mlp(os, "actor", ac.actor);
  write_mlp(os, "critic", ac.critic);
  const auto& nz = ac.normalizer;
  os << "normalizer " << nz.dim() << ' ' << (nz.enabled() ? 1 : 0) << ' '
     << format_double(nz.clip()) << ' ' << format_double(nz.count()) << '\n';
  for (int i = 0; i < nz.dim(); ++i) os << (i ? " " : "") << format_double(nz.mean()[i]);
  os << '\n';
  for (int i = 0; i < nz.dim(); ++i) os << (i ? " " : "") << format_double(nz.m2()[i]);
  os << '\n';
  os << "action_scale " << ac.action_scale.size() << '\n';
  for (std::size_t i = 0; i < ac.action_scale.size(); ++i) {
    os << (i ? " " : "") << format_double(ac.action_scale[i]);
  }
  os << "\nend\n";
}

/// Parses a checkpoint; any structural problem raises DataError.
inline ActorCritic read_checkpoint(std::istream& is) {
  using detail::next_token;
  using detail::parse_count;
  if (next_token(is, "header") != kCheckpointMagic) throw DataError("checkpoint corrupt: bad magic");
  if (parse_count(next_token(is, "version"), "version") != kCheckpointVersion) {
    throw DataError("checkpoint corrupt: unsupported version");
  }
  ActorCritic ac;
  ac.actor = read_mlp(is, "actor");
  ac.critic = read_mlp(is, "critic");
  if (ac.actor.layers.back().activation != Activation::kGaussianHead ||
      ac.critic.output_dim() != 1 || ac.critic.input_dim() != ac.actor.input_dim()) {
    throw DataError("checkpoint corrupt: actor/critic shapes disagree");
  }
  if (next_token(is, "normalizer") != "normalizer") throw DataError("checkpoint corrupt: expected normalizer");
  const long dim = parse_count(next_token(is, "normalizer dim"), "normalizer dim");
  if (dim != ac.actor.input_dim()) throw DataError("checkpoint corrupt: normalizer dimension");
  const std::string enabled = next_token(is, "normalizer flag");
  if (enabled != "0" && enabled != "1") throw DataError("checkpoint corrupt: normalizer flag");
  const double clip = parse_double(next_token(is, "clip"));
  const double count = parse_double(next_token(is, "count"));
  std::vector<double> mean(dim), m2(dim);
  for (auto& v : mean) v = parse_double(next_token(is, "mean"));
  for (auto& v : m2) v = parse_double(next_token(is, "m2"));
  ac.normalizer = RunningNormalizer(static_cast<int>(dim), clip);
  ac.normalizer.restore(count, std::move(mean), std::move(m2));
  ac.normalizer.set_enabled(enabled == "1");
  if (next_token(is, "action_scale") != "action_scale") throw DataError("checkpoint corrupt: expected action_scale");
  const long na = parse_count(next_token(is, "action dim"), "action dim");
  if (na != ac.action_dim()) throw DataError("checkpoint corrupt: action dimension");
  ac.action_scale.resize(na);
  for (auto& v : ac.action_scale) v = parse_double(next_token(is, "scale"));
  if (next_token(is, "end") != "end") throw DataError("checkpoint corrupt: missing end marker");
  return ac;
}

}  // namespace crutchgait

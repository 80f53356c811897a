#pragma once

// Command implementations behind the `crutchgait` executable. Each returns
// a process exit code: 0 success, 1 runtime failure, 2 usage or config
// error, 3 data error.

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crutchgait/config.hpp"
#include "crutchgait/dynamics.hpp"
#include "crutchgait/harness.hpp"
#include "crutchgait/plot.hpp"

namespace crutchgait::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Hex SHA-1 of the git blob object for `content` (what `git hash-object`
/// prints).
inline std::string git_blob_hash(const std::string& content) {
  const std::string obj = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(obj.data(), obj.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Output root: explicit flag, else $CRUTCHGAIT_OUT, else ./runs.
inline std::filesystem::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CRUTCHGAIT_OUT"); env && *env) return env;
  return "runs";
}

struct Manifest {
  std::string command;
  std::string config_path;
  std::string config_snapshot;
  std::vector<std::uint64_t> seeds;
  std::string start_time;
  std::vector<std::string> artifacts;

  nlohmann::json to_json() const {
    return {{"command", command},
            {"config_path", config_path},
            {"config_hash", git_blob_hash(config_snapshot)},
            {"config_snapshot", config_snapshot},
            {"seeds", seeds},
            {"start_time", start_time},
            {"artifacts", artifacts}};
  }
};

inline void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  write_text_file(dir / "config.json", m.config_snapshot);
  write_text_file(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

struct LoadedConfig {
  std::string text;
  ExperimentConfig cfg;
};

inline LoadedConfig load_config(const std::string& path) {
  LoadedConfig lc;
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("config not found: " + path);
  lc.text = read_file(path);
  lc.cfg = parse_config(lc.text);
  return lc;
}

/// Maps exceptions to exit codes with a one-line message on `err`.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

struct TrainOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::string out;
  bool quiet = false;
};

inline int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    LoadedConfig lc = load_config(o.config);
    ExperimentConfig& cfg = lc.cfg;
    if (o.iterations) cfg.iterations = *o.iterations;
    const std::uint64_t seed = o.seed ? *o.seed : cfg.seeds.front();
    cfg.validate();
    const auto dir = output_root(o.out) / (o.out.empty() ? "train_seed" + std::to_string(seed) : "");
    std::filesystem::create_directories(dir);
    Manifest m{"train", o.config, lc.text, {seed}, utc_timestamp(), {}};
    m.artifacts = {"train_log.csv", "eval_metrics.csv",
                   "checkpoint_" + std::to_string(cfg.iterations)};
    write_manifest(dir, m);
    const int every = std::max(1, cfg.iterations / 10);
    const RunOutputs r = run_experiment(
        cfg, cfg.reward.w_crutch_reaction_force, seed, dir, nullptr,
        [&](const TrainLogRow& row) {
          if (!o.quiet && (row.iter % every == 0 || row.iter == cfg.iterations)) {
            out << "iter " << row.iter << " cum_reward " << format_double(row.cum_reward)
                << '\n' << std::flush;
          }
        });
    out << "wrote " << (dir / "train_log.csv").string() << '\n';
    out << kEvalHeader << '\n' << to_csv(r.eval.report) << '\n';
    return kExitOk;
  });
}

struct SweepOptions {
  std::string config;
  std::string out;
  int parallel = 1;
  std::optional<int> iterations;
};

inline int cmd_sweep(const SweepOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.parallel < 1) throw ConfigError("--parallel must be >= 1");
    LoadedConfig lc = load_config(o.config);
    ExperimentConfig& cfg = lc.cfg;
    if (o.iterations) cfg.iterations = *o.iterations;
    cfg.validate();
    if (sweep_agents(cfg).empty()) throw ConfigError("sweep needs at least one agent");
    const auto dir = output_root(o.out) / (o.out.empty() ? "sweep" : "");
    std::filesystem::create_directories(dir);
    Manifest m{"sweep", o.config, lc.text, cfg.seeds, utc_timestamp(),
               {"comparison.csv", "table5.csv"}};
    write_manifest(dir, m);
    const SweepResult r = sweep(cfg, o.parallel, dir, [&](const SweepCell& c) {
      out << c.agent << " seed " << c.seed << " mean_crutch_cost "
          << format_double(c.metrics.mean_crutch_cost) << '\n' << std::flush;
    });
    write_text_file(dir / "comparison.csv", comparison_csv(r));
    write_text_file(dir / "table5.csv", table5_csv(r));
    out << table5_csv(r);
    return kExitOk;
  });
}

struct EvalOptions {
  std::string checkpoint;
  std::string config;
  std::string out;
};

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!std::filesystem::is_regular_file(o.checkpoint)) {
      throw ConfigError("checkpoint not found: " + o.checkpoint);
    }
    LoadedConfig lc = load_config(o.config);
    const ExperimentConfig& cfg = lc.cfg;
    ActorCritic agent;
    try {
      agent = load_checkpoint(o.checkpoint);
    } catch (const DataError& e) {
      throw DataError(std::string("checkpoint corrupt: ") + e.what());
    }
    const auto dir = output_root(o.out) / (o.out.empty() ? "eval" : "");
    std::filesystem::create_directories(dir);
    const auto model = cfg.env_kind == EnvKind::kCrutch ? shared_model(cfg.model) : nullptr;
    with_env(cfg, cfg.eval_weight, cfg.eval_horizon, model, [&](auto& env) {
      if (agent.observation_dim() != env.observation_dim() ||
          agent.action_dim() != env.action_dim()) {
        throw DataError("checkpoint corrupt: network does not match the environment");
      }
      return 0;
    });

    // Trajectory of the first evaluation episode.
    std::ofstream traj(dir / "trajectory.csv", std::ios::binary);
    if (!traj) throw DataError("cannot write trajectory.csv");
    if (cfg.env_kind == EnvKind::kCrutch) {
      CrutchEnv env = make_crutch_env(cfg, model, cfg.eval_weight, cfg.eval_horizon);
      TrajectoryWriter w(traj);
      ActorCritic frozen = agent;
      frozen.normalizer.set_frozen(true);
      run_policy(frozen, env, cfg.eval_seed, cfg.eval_horizon,
                 [&](const StepResult&) { w.write(env.state()); });
    } else {
      traj << "step,velocity,reward\n";
      PointMassConfig pm = cfg.point_mass;
      pm.horizon = cfg.eval_horizon;
      PointMassEnv env(pm);
      run_policy(agent, env, cfg.eval_seed, cfg.eval_horizon, [&](const StepResult& r) {
        traj << r.info.step << ',' << format_double(r.info.com_velocity.x()) << ','
             << format_double(r.reward) << '\n';
      });
    }

    const EvaluationResult ev = evaluate(agent, cfg, model);
    const std::string csv = std::string(kEvalHeader) + "\n" + to_csv(ev.report) + "\n";
    write_text_file(dir / "eval_metrics.csv", csv);
    out << csv;
    return kExitOk;
  });
}

struct PlotOptions {
  std::vector<std::string> logs;
  int window = 100;
  std::string out = "returns.svg";
};

inline int cmd_plot(const PlotOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.logs.empty()) throw ConfigError("plot needs at least one train_log.csv");
    if (o.window < 1) throw ConfigError("--window must be >= 1");
    std::vector<PlotSeries> series;
    for (const auto& path : o.logs) {
      if (!std::filesystem::is_regular_file(path)) throw ConfigError("log not found: " + path);
      const CsvTable t = read_csv(path);
      PlotSeries s;
      const auto parent = std::filesystem::path(path).parent_path().filename().string();
      s.label = parent.empty() ? path : parent;
      s.x = t.numeric_column("iter");
      s.y = moving_average(t.numeric_column("cum_reward"), o.window);
      series.push_back(std::move(s));
    }
    write_text_file(o.out, render_svg(series));
    out << "wrote " << o.out << '\n';
    return kExitOk;
  });
}

inline int cmd_model(const std::string& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LoadedConfig lc = load_config(config);
    out << describe(build_subject_model(lc.cfg.model));
    return kExitOk;
  });
}

}  // namespace crutchgait::cli

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crutchgait/cli.hpp"

namespace cli = crutchgait::cli;

int main(int argc, char** argv) {
  CLI::App app{"Crutch-assisted exoskeleton gait learning with PPO"};
  app.require_subcommand(1);

  cli::TrainOptions train;
  std::uint64_t train_seed = 0;
  int train_iters = 0;
  auto* t = app.add_subcommand("train", "train one policy and evaluate it");
  t->add_option("config", train.config, "experiment config (JSON)")->required();
  auto* seed_opt = t->add_option("--seed", train_seed, "training seed (default: first config seed)");
  auto* t_iter_opt = t->add_option("--iterations", train_iters, "override experiment.iterations");
  t->add_option("--out", train.out, "output directory (default: $CRUTCHGAIT_OUT/train_seed<N>)");
  t->add_flag("--quiet", train.quiet, "no progress lines");

  cli::SweepOptions sweep;
  int sweep_iters = 0;
  auto* s = app.add_subcommand("sweep", "train and evaluate every agent weight x seed");
  s->add_option("config", sweep.config, "experiment config (JSON)")->required();
  s->add_option("--out", sweep.out, "output directory (default: $CRUTCHGAIT_OUT/sweep)");
  s->add_option("--parallel", sweep.parallel, "worker threads")->check(CLI::PositiveNumber);
  auto* s_iter_opt = s->add_option("--iterations", sweep_iters, "override experiment.iterations");

  cli::EvalOptions eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint with the policy mean");
  e->add_option("checkpoint", eval.checkpoint, "checkpoint file")->required();
  e->add_option("config", eval.config, "experiment config (JSON)")->required();
  e->add_option("--out", eval.out, "output directory (default: $CRUTCHGAIT_OUT/eval)");

  cli::PlotOptions plot;
  auto* p = app.add_subcommand("plot", "SVG chart of smoothed cumulative return");
  p->add_option("logs", plot.logs, "train_log.csv files")->required();
  p->add_option("--window", plot.window, "moving-average window")->check(CLI::PositiveNumber);
  p->add_option("--out", plot.out, "output SVG path");

  std::string model_config;
  auto* m = app.add_subcommand("model", "print the model parameter table");
  m->add_option("config", model_config, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : cli::kExitUsage;
  }

  if (*t) {
    if (seed_opt->count()) train.seed = train_seed;
    if (t_iter_opt->count()) train.iterations = train_iters;
    return cli::cmd_train(train, std::cout, std::cerr);
  }
  if (*s) {
    if (s_iter_opt->count()) sweep.iterations = sweep_iters;
    return cli::cmd_sweep(sweep, std::cout, std::cerr);
  }
  if (*e) return cli::cmd_eval(eval, std::cout, std::cerr);
  if (*p) return cli::cmd_plot(plot, std::cout, std::cerr);
  if (*m) return cli::cmd_model(model_config, std::cout, std::cerr);
  return cli::kExitUsage;
}

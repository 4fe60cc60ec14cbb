// Command-line front end: train, eval, replay and report.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "jsafe/harness/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::string scenario;
  std::string agent;
  long episodes = -1;
  int runs = -1;
  long long seed = -1;
  std::string out;
  int trials = -1;
  int eval_episodes = -1;
  int workers = -1;
  std::string checkpoint;
  std::string trace;
  std::string dir;
  bool render = false;
  std::size_t window = 100;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "flat key = value config file; flags override it");
  cmd->add_option("--scenario", f.scenario, "intersection | roundabout");
  cmd->add_option("--seed", f.seed, "base seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "parallel workers")->check(CLI::PositiveNumber);
}

/// File values first, then the flags that were given.
jsafe::ExperimentConfig resolve(const Flags& f, const std::string& default_scenario = "") {
  jsafe::KeyValueConfig kv = f.config.empty() ? jsafe::KeyValueConfig{} : jsafe::KeyValueConfig::load(f.config);
  if (!f.scenario.empty())
    kv.set("scenario", f.scenario);
  else if (!default_scenario.empty() && !kv.has("scenario") && !kv.has("kind"))
    kv.set("scenario", default_scenario);
  if (!f.agent.empty()) kv.set("agent", f.agent);
  if (f.episodes >= 0) kv.set("episodes", std::to_string(f.episodes));
  if (f.runs >= 0) kv.set("runs", std::to_string(f.runs));
  if (f.seed >= 0) kv.set("seed", std::to_string(f.seed));
  if (!f.out.empty()) kv.set("out", f.out);
  if (f.trials >= 0) kv.set("eval_trials", std::to_string(f.trials));
  if (f.eval_episodes >= 0) kv.set("eval_episodes", std::to_string(f.eval_episodes));
  if (f.workers >= 0) kv.set("workers", std::to_string(f.workers));
  return jsafe::ExperimentConfig::from_key_values(kv);
}

/// Scenario recorded in a checkpoint header, used when --scenario is absent.
std::string checkpoint_scenario(const std::string& path) {
  try {
    return jsafe::nn::load_checkpoint(path).header.value("scenario", "");
  } catch (const std::exception& e) {
    throw jsafe::ExperimentError(e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jsafe: junction-safety reinforcement learning experiments"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train agents, one run per seed");
  add_common(train, f);
  train->add_option("--agent", f.agent, "dqn | attn-dqn-single | attn-dqn-multi | a2c | ppo");
  train->add_option("--episodes", f.episodes, "training episodes per run")->check(CLI::NonNegativeNumber);
  train->add_option("--runs", f.runs, "number of runs (seeds seed, seed+1, ...)")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  add_common(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint.bin to evaluate")->required();
  eval->add_option("--trials", f.trials, "evaluation trials")->check(CLI::PositiveNumber);
  eval->add_option("--eval-episodes", f.eval_episodes, "episodes per trial")->check(CLI::PositiveNumber);

  auto* replay = app.add_subcommand("replay", "record one episode trace, optionally as SVG frames");
  add_common(replay, f);
  replay->add_option("--checkpoint", f.checkpoint, "checkpoint.bin to drive the ego vehicle");
  replay->add_option("--trace", f.trace, "re-render a stored trace.jsonl instead of simulating");
  replay->add_flag("--render", f.render, "write one SVG per decision step");

  auto* report = app.add_subcommand("report", "tables and training curves from a results directory");
  report->add_option("dir", f.dir, "results directory (train/eval output)")->required();
  report->add_option("--out", f.out, "where to write the report (default: the results directory)");
  report->add_option("--window", f.window, "smoothing window in episodes")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      const jsafe::ExperimentConfig cfg = resolve(f);
      jsafe::cmd_train(cfg, std::cout);
    } else if (*eval) {
      const jsafe::ExperimentConfig cfg = resolve(f, checkpoint_scenario(f.checkpoint));
      const jsafe::fs::path out = f.out.empty() ? jsafe::fs::path(f.checkpoint).parent_path() / "eval" : jsafe::fs::path(cfg.out);
      const jsafe::ModelReport r = jsafe::cmd_eval(cfg, f.checkpoint, out);
      std::cout << r.scenario << ' ' << r.model << " protocol " << r.protocol << " (trials x episodes)\n"
                << "  collision " << jsafe::format_mean_std(r.aggregate.collision) << "  success "
                << jsafe::format_mean_std(r.aggregate.success) << "  freezing "
                << jsafe::format_mean_std(r.aggregate.freezing) << "  total reward "
                << jsafe::format_mean_std(r.aggregate.total_reward) << '\n'
                << "  written to " << out.string() << '\n';
    } else if (*replay) {
      if (!f.trace.empty()) {
        const jsafe::fs::path out = f.out.empty() ? jsafe::fs::path(f.trace).parent_path() / "frames" : jsafe::fs::path(f.out);
        const std::size_t n = jsafe::cmd_render_trace(f.trace, out);
        std::cout << n << " frames written to " << out.string() << '\n';
      } else {
        if (f.checkpoint.empty()) throw jsafe::UsageError("replay needs --checkpoint or --trace");
        const jsafe::ExperimentConfig cfg = resolve(f, checkpoint_scenario(f.checkpoint));
        const jsafe::fs::path out = f.out.empty() ? jsafe::fs::path(f.checkpoint).parent_path() / "replay" : jsafe::fs::path(cfg.out);
        const jsafe::EpisodeTrace tr = jsafe::cmd_replay(cfg, f.checkpoint, cfg.seed, out, f.render);
        std::cout << tr.steps.size() << " steps, outcome " << tr.header.value("outcome", "") << ", trace written to "
                  << (out / "trace.jsonl").string() << '\n';
      }
    } else if (*report) {
      const jsafe::ReportSummary s = jsafe::cmd_report(f.dir, f.out, f.window);
      std::cout << s.logs << " training logs, " << s.evaluations << " evaluation reports\n";
      for (const auto& p : s.written) std::cout << "  " << p.string() << '\n';
    }
  } catch (const jsafe::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const jsafe::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

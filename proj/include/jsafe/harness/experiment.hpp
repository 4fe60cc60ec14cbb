#ifndef JSAFE_HARNESS_EXPERIMENT_HPP
#define JSAFE_HARNESS_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "jsafe/agents/train.hpp"
#include "jsafe/config.hpp"
#include "jsafe/harness/curves.hpp"
#include "jsafe/harness/pool.hpp"
#include "jsafe/harness/trace.hpp"
#include "jsafe/metrics/report.hpp"

namespace jsafe {

namespace fs = std::filesystem;

/// Bad arguments or configuration; the CLI maps it to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while running an experiment; exit code 3.
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kEvaluationStream = 0x6576616c75617465ull;

struct ExperimentConfig {
  AgentKind agent = AgentKind::kDqn;
  long episodes = 5000;
  int runs = 1;
  int eval_trials = 20;
  int eval_episodes = 100;
  std::uint64_t seed = 1;
  std::string out = "runs";
  unsigned workers = 1;
  long checkpoint_every = 1000;  // 0 keeps only the final checkpoint
  ScenarioConfig scenario = ScenarioConfig::defaults(ScenarioKind::kIntersection);
  AgentConfig learner = AgentConfig::defaults(ScenarioKind::kIntersection);

  /// Scenario, agent and experiment keys from one flat file. Unknown keys
  /// are rejected so typos do not pass silently.
  static ExperimentConfig from_key_values(const KeyValueConfig& kv) {
    static const char* known[] = {
        "scenario", "kind", "agent", "episodes", "runs", "eval_trials", "eval_episodes", "seed", "out", "workers",
        "checkpoint_every", "spawn_count", "spawn_speed_min", "spawn_speed_max", "v_max", "speed_step",
        "ego_start_speed", "V", "observed_vehicles", "max_episode_seconds", "physics_dt", "substeps_per_decision",
        "prediction_horizon", "gamma", "learning_rate", "max_grad_norm", "replay_capacity", "batch_size",
        "target_sync_period", "learning_starts", "epsilon_start", "epsilon_end", "epsilon_decay_fraction", "t_max",
        "entropy_coefficient", "value_coefficient", "ppo_clip", "ppo_epochs", "ppo_rollout", "ppo_minibatch"};
    for (const auto& [key, value] : kv.values()) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw UsageError("unknown config key '" + key + "'");
    }
    ExperimentConfig c;
    try {
      c.scenario = ScenarioConfig::from_key_values(kv);
      c.learner = AgentConfig::defaults(c.scenario.kind);
      c.learner.apply(kv);
      c.agent = parse_agent_kind(kv.get_string("agent", to_string(c.agent)));
      c.episodes = kv.get_int("episodes", c.episodes);
      c.runs = static_cast<int>(kv.get_int("runs", c.runs));
      c.eval_trials = static_cast<int>(kv.get_int("eval_trials", c.eval_trials));
      c.eval_episodes = static_cast<int>(kv.get_int("eval_episodes", c.eval_episodes));
      c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
      c.out = kv.get_string("out", c.out);
      c.workers = static_cast<unsigned>(kv.get_int("workers", c.workers));
      c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    c.validate();
    return c;
  }

  void validate() const {
    if (episodes < 0) throw UsageError("episodes must be >= 0");
    if (runs < 1) throw UsageError("runs must be >= 1");
    if (eval_trials < 1 || eval_episodes < 1) throw UsageError("eval trials and episodes must be >= 1");
    if (workers < 1) throw UsageError("workers must be >= 1");
    if (checkpoint_every < 0) throw UsageError("checkpoint_every must be >= 0");
  }

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> s;
    for (int r = 0; r < runs; ++r) s.push_back(seed + static_cast<std::uint64_t>(r));
    return s;
  }
};

inline fs::path run_directory(const fs::path& out, ScenarioKind scenario, AgentKind agent, std::uint64_t seed) {
  return out / to_string(scenario) / to_string(agent) / ("run_" + std::to_string(seed));
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.flush();
  if (!f) throw ExperimentError("cannot write " + path.string());
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ExperimentError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct TrainResult {
  std::uint64_t seed = 0;
  fs::path directory;
  TrainingLog log;
  double final_collision = 0.0, final_success = 0.0, final_freezing = 0.0;
};

inline constexpr std::size_t kFinalWindow = 500;

/// Trains one run and writes log.csv, checkpoint.bin and meta.json into its
/// directory. If training throws, the latest weights and the partial log are
/// flushed before the exception propagates.
inline TrainResult train_run(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainResult res;
  res.seed = seed;
  res.directory = run_directory(cfg.out, cfg.scenario.kind, cfg.agent, seed);
  fs::create_directories(res.directory);
  auto agent = make_learner<float>(cfg.agent, cfg.learner, cfg.scenario, seed);

  nlohmann::json meta = {{"schema", "jsafe-run"},
                         {"version", 1},
                         {"scenario", to_string(cfg.scenario.kind)},
                         {"agent", to_string(cfg.agent)},
                         {"seed", seed},
                         {"episodes", cfg.episodes},
                         {"started", utc_timestamp()}};
  auto flush = [&](const TrainingLog& log, const std::string& status) {
    nn::Checkpoint ck = agent->checkpoint();
    ck.header["episodes_trained"] = log.size();
    ck.header["seed"] = seed;
    nn::save_checkpoint((res.directory / "checkpoint.bin").string(), ck);
    std::ostringstream os;
    write_training_log(os, log);
    write_text_file(res.directory / "log.csv", os.str());
    meta["status"] = status;
    meta["episodes_completed"] = log.size();
    meta["finished"] = utc_timestamp();
    write_text_file(res.directory / "meta.json", meta.dump(2) + "\n");
  };

  TrainingLog partial;
  try {
    res.log = train_loop<float>(*agent, cfg.scenario, cfg.episodes, seed, [&](const TrainingRow& row) {
      partial.push_back(row);
      if (cfg.checkpoint_every > 0 && (row.episode + 1) % cfg.checkpoint_every == 0 &&
          row.episode + 1 < cfg.episodes)
        flush(partial, "running");
      return true;
    });
  } catch (const std::exception& e) {
    flush(partial, std::string("failed: ") + e.what());
    throw;
  }
  flush(res.log, "complete");
  if (!res.log.empty()) {
    res.final_collision = tail_rate(res.log, EpisodeOutcome::kCollision, kFinalWindow);
    res.final_success = tail_rate(res.log, EpisodeOutcome::kSuccess, kFinalWindow);
    res.final_freezing = tail_rate(res.log, EpisodeOutcome::kFreeze, kFinalWindow);
  }
  return res;
}

/// One run per seed, in parallel up to cfg.workers; results in seed order.
inline std::vector<TrainResult> cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  const std::vector<std::uint64_t> seeds = cfg.seeds();
  std::vector<TrainResult> results = parallel_map<TrainResult>(
      seeds.size(), cfg.workers, [&](std::size_t i) { return train_run(cfg, seeds[i]); });
  for (const TrainResult& r : results) {
    char buf[256];
    if (r.log.empty())
      std::snprintf(buf, sizeof buf, "run_%llu: 0 episodes\n", static_cast<unsigned long long>(r.seed));
    else
      std::snprintf(buf, sizeof buf,
                    "run_%llu: %zu episodes, last %zu: collision %.2f%% success %.2f%% freezing %.2f%%\n",
                    static_cast<unsigned long long>(r.seed), r.log.size(), std::min(kFinalWindow, r.log.size()),
                    r.final_collision, r.final_success, r.final_freezing);
    out << buf;
  }
  return results;
}

struct LoadedAgent {
  AgentKind kind;
  nn::Checkpoint checkpoint;
};

/// Reads a checkpoint and checks it against the scenario the caller wants
/// to run it in.
inline LoadedAgent load_agent(const fs::path& path, const ScenarioConfig& scenario) {
  LoadedAgent la;
  try {
    la.checkpoint = nn::load_checkpoint(path.string());
  } catch (const std::exception& e) {
    throw ExperimentError(e.what());
  }
  const nlohmann::json& h = la.checkpoint.header;
  if (h.value("format", "") != "jsafe-agent") throw ExperimentError(path.string() + " is not an agent checkpoint");
  la.kind = parse_agent_kind(h.at("kind").get<std::string>());
  const int ck_actions = h.at("actions").get<int>();
  const int sc_actions = action_count(scenario.kind);
  if (ck_actions != sc_actions)
    throw ExperimentError("checkpoint has " + std::to_string(ck_actions) + " actions but scenario " +
                          to_string(scenario.kind) + " has " + std::to_string(sc_actions));
  const int ck_vehicles = h.at("vehicles").get<int>();
  if (ck_vehicles != scenario.observed_vehicles)
    throw ExperimentError("checkpoint observes " + std::to_string(ck_vehicles) + " vehicles but scenario uses " +
                          std::to_string(scenario.observed_vehicles));
  return la;
}

inline std::unique_ptr<Learner<float>> instantiate(const LoadedAgent& la, const ScenarioConfig& scenario,
                                                   const AgentConfig& learner) {
  AgentConfig cfg = learner;
  cfg.gamma = la.checkpoint.header.value("gamma", cfg.gamma);
  auto agent = make_learner<float>(la.kind, cfg, scenario, 0);
  try {
    agent->restore(la.checkpoint);
  } catch (const std::exception& e) {
    throw ExperimentError(std::string("checkpoint does not fit the configured architecture: ") + e.what());
  }
  return agent;
}

/// Seed of evaluation episode `e` of trial `t`; a stream disjoint from the
/// training seeds mix_seed(seed, episode).
inline std::uint64_t evaluation_seed(std::uint64_t seed, int trial, int episodes, int e) {
  return mix_seed(mix_seed(seed, kEvaluationStream),
                  static_cast<std::uint64_t>(trial) * static_cast<std::uint64_t>(episodes) + static_cast<std::uint64_t>(e));
}

/// Greedy evaluation, trials x episodes. Writes report.json, report.csv,
/// table.csv and trials.csv into `out_dir` when it is non-empty.
inline ModelReport cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir) {
  cfg.validate();
  const LoadedAgent la = load_agent(checkpoint, cfg.scenario);
  std::vector<TrialSummary> trials = parallel_map<TrialSummary>(
      static_cast<std::size_t>(cfg.eval_trials), cfg.workers, [&](std::size_t t) {
        auto agent = instantiate(la, cfg.scenario, cfg.learner);
        TrafficEnv env(cfg.scenario);
        std::vector<EpisodeRecord> records;
        for (int e = 0; e < cfg.eval_episodes; ++e) {
          const std::uint64_t s = evaluation_seed(cfg.seed, static_cast<int>(t), cfg.eval_episodes, e);
          const EpisodeSummary sum = run_greedy_episode(*agent, env, s);
          records.push_back({sum.outcome, sum.total_reward, sum.steps, s});
        }
        return compute_rates(records);
      });
  ModelReport report = make_model_report(to_string(cfg.scenario.kind), to_string(la.kind), std::move(trials));
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream csv, table, per_trial;
    write_report_csv(csv, {report});
    write_table_csv(table, {report});
    write_trials_csv(per_trial, report);
    write_text_file(out_dir / "report.json", to_json(report).dump(2) + "\n");
    write_text_file(out_dir / "report.csv", csv.str());
    write_text_file(out_dir / "table.csv", table.str());
    write_text_file(out_dir / "trials.csv", per_trial.str());
  }
  return report;
}

inline std::string frame_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%04zu.svg", step);
  return buf;
}

/// Writes one SVG per decision step into `frames_dir`.
inline std::size_t render_frames(const EpisodeTrace& trace, const fs::path& frames_dir) {
  const ScenarioLayout layout = make_layout(parse_scenario(trace.header.at("scenario").get<std::string>()));
  fs::create_directories(frames_dir);
  for (std::size_t k = 0; k < trace.steps.size(); ++k)
    write_text_file(frames_dir / frame_name(k), render_step_svg(trace, k, layout));
  return trace.steps.size();
}

/// Records one greedy episode from a checkpoint into out_dir/trace.jsonl and,
/// if asked, out_dir/frames/*.svg.
inline EpisodeTrace cmd_replay(const ExperimentConfig& cfg, const fs::path& checkpoint, std::uint64_t seed,
                               const fs::path& out_dir, bool render) {
  const LoadedAgent la = load_agent(checkpoint, cfg.scenario);
  auto agent = instantiate(la, cfg.scenario, cfg.learner);
  TrafficEnv env(cfg.scenario);
  EpisodeTrace trace = record_episode(*agent, env, seed);
  std::ostringstream os;
  write_trace_jsonl(os, trace);
  write_text_file(out_dir / "trace.jsonl", os.str());
  if (render) render_frames(trace, out_dir / "frames");
  return trace;
}

/// Re-renders the frames of a stored trace.
inline std::size_t cmd_render_trace(const fs::path& trace_path, const fs::path& out_dir) {
  std::istringstream is(read_text_file(trace_path));
  EpisodeTrace trace;
  try {
    trace = read_trace_jsonl(is);
  } catch (const nlohmann::json::exception& e) {
    throw ExperimentError(std::string("malformed trace: ") + e.what());
  }
  return render_frames(trace, out_dir);
}

struct ReportSummary {
  std::size_t logs = 0;
  std::size_t evaluations = 0;
  std::vector<fs::path> written;
};

/// Collects every log.csv (training) and report.json (evaluation) under
/// `dir`. Writes curves_<scenario>.svg per scenario, training_table.csv
/// with final-window rates across runs, and eval_table.csv / eval_report.csv
/// when evaluations exist.
inline ReportSummary cmd_report(const fs::path& dir, const fs::path& out_dir, std::size_t window = 100) {
  if (!fs::is_directory(dir)) throw ExperimentError(dir.string() + " is not a directory");
  if (window < 1) throw UsageError("smoothing window must be >= 1");
  // (scenario, agent) -> logs, ordered by path for deterministic output.
  std::map<std::pair<std::string, std::string>, std::vector<TrainingLog>> logs;
  std::vector<ModelReport> evaluations;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  ReportSummary summary;
  for (const fs::path& p : files) {
    if (p.filename() == "log.csv") {
      std::string scenario, agent;
      const fs::path meta = p.parent_path() / "meta.json";
      if (fs::exists(meta)) {
        const auto j = nlohmann::json::parse(read_text_file(meta));
        scenario = j.value("scenario", "");
        agent = j.value("agent", "");
      }
      if (scenario.empty() || agent.empty()) {
        agent = p.parent_path().parent_path().filename().string();
        scenario = p.parent_path().parent_path().parent_path().filename().string();
      }
      std::istringstream is(read_text_file(p));
      TrainingLog log = read_training_log(is);
      if (log.empty()) continue;
      logs[{scenario, agent}].push_back(std::move(log));
      ++summary.logs;
    } else if (p.filename() == "report.json") {
      evaluations.push_back(model_report_from_json(nlohmann::json::parse(read_text_file(p))));
      ++summary.evaluations;
    }
  }
  if (logs.empty() && evaluations.empty()) throw ExperimentError("no training logs or evaluation reports under " + dir.string());
  const fs::path out = out_dir.empty() ? dir : out_dir;
  fs::create_directories(out);

  if (!logs.empty()) {
    std::map<std::string, std::vector<CurveSeries>> by_scenario;
    std::vector<ModelReport> training_rows;
    for (const auto& [key, runs] : logs) {
      by_scenario[key.first].push_back({key.second, training_curves(runs, window)});
      std::vector<TrialSummary> tails;
      for (const TrainingLog& l : runs) {
        const std::size_t n = std::min(kFinalWindow, l.size());
        std::vector<EpisodeRecord> recs;
        for (std::size_t i = l.size() - n; i < l.size(); ++i) recs.push_back({l[i].outcome, l[i].total_reward, l[i].steps, 0});
        tails.push_back(compute_rates(recs));
      }
      ModelReport r = make_model_report(key.first, key.second, std::move(tails));
      r.protocol = "train-final" + std::to_string(kFinalWindow) + "x" + std::to_string(runs.size());
      training_rows.push_back(std::move(r));
    }
    for (const auto& [scenario, series] : by_scenario) {
      const fs::path svg = out / ("curves_" + scenario + ".svg");
      write_text_file(svg, render_curves_svg(series, scenario + " training"));
      summary.written.push_back(svg);
    }
    std::ostringstream table;
    write_table_csv(table, training_rows);
    write_text_file(out / "training_table.csv", table.str());
    summary.written.push_back(out / "training_table.csv");
  }
  if (!evaluations.empty()) {
    std::ostringstream table, csv;
    write_table_csv(table, evaluations);
    write_report_csv(csv, evaluations);
    write_text_file(out / "eval_table.csv", table.str());
    write_text_file(out / "eval_report.csv", csv.str());
    summary.written.push_back(out / "eval_table.csv");
    summary.written.push_back(out / "eval_report.csv");
  }
  return summary;
}

}  // namespace jsafe

#endif  // JSAFE_HARNESS_EXPERIMENT_HPP

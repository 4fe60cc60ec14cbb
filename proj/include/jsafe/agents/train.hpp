#ifndef JSAFE_AGENTS_TRAIN_HPP
#define JSAFE_AGENTS_TRAIN_HPP

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "jsafe/agents/dqn.hpp"
#include "jsafe/agents/policy_gradient.hpp"
#include "jsafe/traffic/env.hpp"

namespace jsafe {

/// splitmix64 finaliser; derives independent seeds from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

template <class S>
std::unique_ptr<Learner<S>> make_learner(AgentKind kind, const AgentConfig& cfg, const ScenarioConfig& scenario,
                                         std::uint64_t seed) {
  const int v = scenario.observed_vehicles;
  const int a = action_count(scenario.kind);
  switch (kind) {
    case AgentKind::kA2c: return std::make_unique<A2cAgent<S>>(cfg, scenario.kind, v, a, seed);
    case AgentKind::kPpo: return std::make_unique<PpoAgent<S>>(cfg, scenario.kind, v, a, seed);
    default: return std::make_unique<DqnAgent<S>>(kind, cfg, scenario.kind, v, a, seed);
  }
}

struct TrainingRow {
  long episode = 0;
  EpisodeOutcome outcome = EpisodeOutcome::kFreeze;
  double total_reward = 0.0;
  double epsilon = 0.0;
  std::optional<double> loss;  // mean over the updates of the episode
  int steps = 0;
  bool operator==(const TrainingRow&) const = default;
};

using TrainingLog = std::vector<TrainingRow>;

inline constexpr const char* kTrainingLogHeader = "episode,outcome,total_reward,epsilon,loss";

inline std::string format_training_row(const TrainingRow& r) {
  char buf[160];
  if (r.loss)
    std::snprintf(buf, sizeof buf, "%ld,%s,%.6f,%.6f,%.9g", r.episode, to_string(r.outcome).c_str(), r.total_reward,
                  r.epsilon, *r.loss);
  else
    std::snprintf(buf, sizeof buf, "%ld,%s,%.6f,%.6f,", r.episode, to_string(r.outcome).c_str(), r.total_reward,
                  r.epsilon);
  return buf;
}

inline void write_training_log(std::ostream& os, const TrainingLog& log) {
  os << kTrainingLogHeader << '\n';
  for (const TrainingRow& r : log) os << format_training_row(r) << '\n';
}

struct EpisodeSummary {
  EpisodeOutcome outcome = EpisodeOutcome::kFreeze;
  double total_reward = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
};

/// Hooks for one decision step: observation before the action, the chosen
/// action and the step result.
using StepObserver = std::function<void(const ObservationMatrix&, int, const StepResult&)>;

/// Runs one greedy (evaluation) episode.
template <class S>
EpisodeSummary run_greedy_episode(Learner<S>& agent, TrafficEnv& env, std::uint64_t seed,
                                  const StepObserver& on_step = {}) {
  EpisodeSummary out;
  out.seed = seed;
  ObservationMatrix obs = env.reset(seed);
  for (;;) {
    const int a = agent.greedy_action(obs);
    StepResult r = env.step(a);
    out.total_reward += r.reward;
    ++out.steps;
    if (on_step) on_step(obs, a, r);
    if (r.terminated) {
      out.outcome = classify_outcome(r.outcome);
      return out;
    }
    obs = std::move(r.observation);
  }
}

/// Called after every training episode; a false return stops training.
using TrainingCallback = std::function<bool(const TrainingRow&)>;

/// Trains `agent` for `episodes` episodes. Episode i uses environment seed
/// mix_seed(seed, i).
template <class S>
TrainingLog train_loop(Learner<S>& agent, const ScenarioConfig& scenario, long episodes, std::uint64_t seed,
                       const TrainingCallback& callback = {}) {
  TrainingLog log;
  if (episodes <= 0) return log;
  TrafficEnv env(scenario);
  log.reserve(static_cast<std::size_t>(episodes));
  for (long ep = 0; ep < episodes; ++ep) {
    agent.begin_episode(ep, episodes);
    TrainingRow row;
    row.episode = ep;
    row.epsilon = agent.epsilon();
    double loss_sum = 0.0;
    int loss_count = 0;
    ObservationMatrix obs = env.reset(mix_seed(seed, static_cast<std::uint64_t>(ep)));
    for (;;) {
      const int a = agent.act(obs);
      StepResult r = env.step(a);
      row.total_reward += r.reward;
      ++row.steps;
      Transition t{obs, a, r.reward, r.observation, r.terminated};
      if (const auto l = agent.observe(t)) {
        loss_sum += *l;
        ++loss_count;
      }
      if (r.terminated) {
        row.outcome = classify_outcome(r.outcome);
        break;
      }
      obs = std::move(r.observation);
    }
    if (loss_count > 0) row.loss = loss_sum / loss_count;
    log.push_back(row);
    if (callback && !callback(row)) break;
  }
  return log;
}

}  // namespace jsafe

#endif  // JSAFE_AGENTS_TRAIN_HPP

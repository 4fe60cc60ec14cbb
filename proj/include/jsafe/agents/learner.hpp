#ifndef JSAFE_AGENTS_LEARNER_HPP
#define JSAFE_AGENTS_LEARNER_HPP

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jsafe/agents/exploration.hpp"
#include "jsafe/agents/networks.hpp"
#include "jsafe/agents/replay.hpp"
#include "jsafe/config.hpp"
#include "jsafe/nn/adam.hpp"
#include "jsafe/nn/checkpoint.hpp"
#include "jsafe/traffic/types.hpp"

namespace jsafe {

enum class AgentKind { kDqn, kAttentionDqnSingle, kAttentionDqnMulti, kA2c, kPpo };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::kDqn: return "dqn";
    case AgentKind::kAttentionDqnSingle: return "attn-dqn-single";
    case AgentKind::kAttentionDqnMulti: return "attn-dqn-multi";
    case AgentKind::kA2c: return "a2c";
    case AgentKind::kPpo: return "ppo";
  }
  return "dqn";
}

inline AgentKind parse_agent_kind(const std::string& s) {
  for (AgentKind k : {AgentKind::kDqn, AgentKind::kAttentionDqnSingle, AgentKind::kAttentionDqnMulti, AgentKind::kA2c,
                      AgentKind::kPpo})
    if (to_string(k) == s) return k;
  if (s == "attn-dqn") return AgentKind::kAttentionDqnSingle;
  throw std::invalid_argument("unknown agent '" + s + "'");
}

inline bool is_dqn(AgentKind k) { return k == AgentKind::kDqn || k == AgentKind::kAttentionDqnSingle || k == AgentKind::kAttentionDqnMulti; }
inline bool uses_attention(AgentKind k) {
  return k == AgentKind::kAttentionDqnSingle || k == AgentKind::kAttentionDqnMulti;
}

/// Learning hyperparameters. `gamma` defaults per scenario.
struct AgentConfig {
  double gamma = 0.95;
  double learning_rate = 5e-4;
  double max_grad_norm = 10.0;  // <= 0 disables clipping

  // DQN
  std::size_t replay_capacity = 15000;
  std::size_t batch_size = 64;
  long target_sync_period = 512;
  std::size_t learning_starts = 256;
  EpsilonSchedule epsilon;

  // A2C / PPO
  int t_max = 8;
  double entropy_coefficient = 0.01;
  double value_coefficient = 0.5;
  double ppo_clip = 0.2;
  int ppo_epochs = 4;
  int ppo_rollout = 256;
  int ppo_minibatch = 64;

  // Architectures
  std::vector<int> mlp_hidden = {128, 128};
  std::vector<int> encoder = {64, 64};
  int heads = 2;
  int d_k = 32;
  std::vector<int> attention_head = {64};

  static AgentConfig defaults(ScenarioKind kind) {
    AgentConfig c;
    c.gamma = kind == ScenarioKind::kIntersection ? 0.95 : 0.99;
    return c;
  }

  /// Overrides from a key/value file. Unknown keys are left to the caller.
  void apply(const KeyValueConfig& kv) {
    gamma = kv.get_double("gamma", gamma);
    learning_rate = kv.get_double("learning_rate", learning_rate);
    max_grad_norm = kv.get_double("max_grad_norm", max_grad_norm);
    replay_capacity = static_cast<std::size_t>(kv.get_int("replay_capacity", static_cast<std::int64_t>(replay_capacity)));
    batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<std::int64_t>(batch_size)));
    target_sync_period = kv.get_int("target_sync_period", target_sync_period);
    learning_starts = static_cast<std::size_t>(kv.get_int("learning_starts", static_cast<std::int64_t>(learning_starts)));
    epsilon.start = kv.get_double("epsilon_start", epsilon.start);
    epsilon.end = kv.get_double("epsilon_end", epsilon.end);
    epsilon.fraction = kv.get_double("epsilon_decay_fraction", epsilon.fraction);
    t_max = static_cast<int>(kv.get_int("t_max", static_cast<std::int64_t>(t_max)));
    entropy_coefficient = kv.get_double("entropy_coefficient", entropy_coefficient);
    value_coefficient = kv.get_double("value_coefficient", value_coefficient);
    ppo_clip = kv.get_double("ppo_clip", ppo_clip);
    ppo_epochs = static_cast<int>(kv.get_int("ppo_epochs", static_cast<std::int64_t>(ppo_epochs)));
    ppo_rollout = static_cast<int>(kv.get_int("ppo_rollout", static_cast<std::int64_t>(ppo_rollout)));
    ppo_minibatch = static_cast<int>(kv.get_int("ppo_minibatch", static_cast<std::int64_t>(ppo_minibatch)));
    validate();
  }

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (replay_capacity == 0 || batch_size == 0) throw ConfigError("replay_capacity and batch_size must be positive");
    if (target_sync_period <= 0) throw ConfigError("target_sync_period must be positive");
    if (t_max < 1) throw ConfigError("t_max must be at least 1");
    if (ppo_epochs < 1 || ppo_rollout < 1 || ppo_minibatch < 1) throw ConfigError("ppo sizes must be positive");
    if (!(ppo_clip > 0.0)) throw ConfigError("ppo_clip must be positive");
  }
};

/// Common face of the learners as seen by the training and evaluation loops.
template <class S>
class Learner {
 public:
  virtual ~Learner() = default;
  virtual AgentKind kind() const = 0;
  /// Action used while training (exploratory).
  virtual int act(const ObservationMatrix& obs) = 0;
  /// Deterministic action used for evaluation.
  virtual int greedy_action(const ObservationMatrix& obs) = 0;
  /// Feeds one environment transition; returns a loss when an update ran.
  virtual std::optional<double> observe(const Transition& t) = 0;
  /// Called at the start of every training episode.
  virtual void begin_episode(long /*episode*/, long /*total*/) {}
  virtual double epsilon() const { return 0.0; }
  /// Network whose attention weights describe the last greedy decision.
  virtual Network<S>& decision_network() = 0;
  virtual nn::Checkpoint checkpoint() = 0;
  virtual void restore(const nn::Checkpoint& ck) = 0;
};

template <class S>
std::unique_ptr<Network<S>> make_network(AgentKind kind, const AgentConfig& cfg, int vehicles, int outputs,
                                         std::mt19937_64& rng) {
  if (uses_attention(kind)) {
    AttentionSpec spec;
    spec.vehicles = vehicles;
    spec.outputs = outputs;
    spec.encoder = cfg.encoder;
    spec.heads = cfg.heads;
    spec.d_k = cfg.d_k;
    spec.head = cfg.attention_head;
    spec.mode = kind == AgentKind::kAttentionDqnMulti ? QueryMode::kMulti : QueryMode::kSingle;
    return std::make_unique<AttentionNetwork<S>>(spec, rng);
  }
  MlpSpec spec;
  spec.vehicles = vehicles;
  spec.outputs = outputs;
  spec.hidden = cfg.mlp_hidden;
  return std::make_unique<MlpNetwork<S>>(spec, rng);
}

/// Parameter names in checkpoints are prefixed by the network role.
template <class S>
void append_network(nn::Checkpoint& ck, const std::string& role, Network<S>& net) {
  for (nn::NamedTensor t : nn::export_parameters(net.parameters())) {
    t.name = role + "." + t.name;
    ck.parameters.push_back(std::move(t));
  }
  ck.header["networks"][role] = net.describe();
}

template <class S>
void restore_network(const nn::Checkpoint& ck, const std::string& role, Network<S>& net) {
  const ParamList<S> params = net.parameters();
  const std::string prefix = role + ".";
  std::size_t found = 0;
  for (const nn::NamedTensor& t : ck.parameters) {
    if (t.name.rfind(prefix, 0) != 0) continue;
    if (found >= params.size()) throw nn::CheckpointError("checkpoint has extra tensors for '" + role + "'");
    nn::NamedTensor local = t;
    local.name = t.name.substr(prefix.size());
    nn::assign_named(params[found]->value, params[found]->name, local);
    ++found;
  }
  if (found != params.size())
    throw nn::CheckpointError("checkpoint has " + std::to_string(found) + " tensors for '" + role + "', model needs " +
                              std::to_string(params.size()));
}

/// Architecture fields every checkpoint header carries.
inline void write_architecture_header(nlohmann::json& h, AgentKind kind, const AgentConfig& cfg, ScenarioKind scenario,
                                      int vehicles, int actions) {
  h["format"] = "jsafe-agent";
  h["kind"] = to_string(kind);
  h["scenario"] = to_string(scenario);
  h["vehicles"] = vehicles;
  h["actions"] = actions;
  h["gamma"] = cfg.gamma;
  h["width"] = uses_attention(kind) ? cfg.encoder.back() : cfg.mlp_hidden.back();
  h["heads"] = uses_attention(kind) ? cfg.heads : 0;
  h["d_k"] = uses_attention(kind) ? cfg.d_k : 0;
  h["query_mode"] = kind == AgentKind::kAttentionDqnMulti ? "multi" : (uses_attention(kind) ? "single" : "none");
}

}  // namespace jsafe

#endif  // JSAFE_AGENTS_LEARNER_HPP

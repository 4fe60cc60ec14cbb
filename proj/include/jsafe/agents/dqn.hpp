#ifndef JSAFE_AGENTS_DQN_HPP
#define JSAFE_AGENTS_DQN_HPP

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "jsafe/agents/learner.hpp"

namespace jsafe {

using TransitionBatch = std::vector<const Transition*>;

template <class S>
Tensor<S> stack_states(const TransitionBatch& batch, bool next) {
  std::vector<const ObservationMatrix*> obs;
  obs.reserve(batch.size());
  for (const Transition* t : batch) obs.push_back(next ? &t->next_state : &t->state);
  return stack_observations<S>(obs);
}

/// r + gamma * max_a' Q(s', a'; target), or r alone for terminal items.
template <class S>
std::vector<double> td_targets(const TransitionBatch& batch, Network<S>& target, double gamma) {
  if (batch.empty()) throw ContractViolation("td_targets on an empty batch");
  const int v = static_cast<int>(batch.front()->next_state.rows());
  const Tensor<S> q_next = target.forward(stack_states<S>(batch, true), v);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = *batch[i];
    y[i] = t.done ? t.reward : t.reward + gamma * static_cast<double>(q_next.row(static_cast<Eigen::Index>(i)).maxCoeff());
  }
  return y;
}

/// Mean squared TD error on the taken actions. Accumulates d(loss)/d(theta)
/// into `q`'s gradients; the targets are constants.
template <class S>
double dqn_loss_and_grad(Network<S>& q, const TransitionBatch& batch, std::span<const double> targets) {
  if (batch.empty() || targets.size() != batch.size()) throw ContractViolation("dqn loss: batch/target mismatch");
  const int v = static_cast<int>(batch.front()->state.rows());
  const Tensor<S> values = q.forward(stack_states<S>(batch, false), v);
  Tensor<S> d = Tensor<S>::Zero(values.rows(), values.cols());
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int a = batch[i]->action;
    if (a < 0 || a >= values.cols()) throw ContractViolation("transition action outside the action set");
    const double err = static_cast<double>(values(static_cast<Eigen::Index>(i), a)) - targets[i];
    loss += err * err;
    d(static_cast<Eigen::Index>(i), a) = static_cast<S>(2.0 * err / n);
  }
  loss /= n;
  q.backward(d);
  return loss;
}

template <class S>
class DqnAgent final : public Learner<S> {
 public:
  DqnAgent(AgentKind kind, const AgentConfig& cfg, ScenarioKind scenario, int vehicles, int actions,
           std::uint64_t seed)
      : kind_(kind),
        cfg_(cfg),
        scenario_(scenario),
        vehicles_(vehicles),
        actions_(actions),
        init_rng_(seed),
        rng_(seed ^ 0x9E3779B97F4A7C15ull),
        q_(make_network<S>(kind, cfg, vehicles, actions, init_rng_)),
        target_(q_->clone()),
        replay_(cfg.replay_capacity),
        adam_(q_->parameters(), cfg.learning_rate) {
    cfg.validate();
    epsilon_ = cfg.epsilon.start;
  }

  AgentKind kind() const override { return kind_; }
  Network<S>& q_network() { return *q_; }
  Network<S>& target_network() { return *target_; }
  ReplayMemory& replay() { return replay_; }
  const AgentConfig& config() const { return cfg_; }
  long steps() const { return steps_; }
  long syncs() const { return syncs_; }
  bool update_skipped() const { return adam_.skipped_last; }
  std::mt19937_64& rng() { return rng_; }
  void set_epsilon(double e) { epsilon_ = e; }
  double epsilon() const override { return epsilon_; }

  std::vector<double> q_values(const ObservationMatrix& obs) {
    const Tensor<S> q = q_->forward(stack_observations<S>(obs), vehicles_);
    std::vector<double> out(static_cast<std::size_t>(q.cols()));
    for (Eigen::Index a = 0; a < q.cols(); ++a) out[static_cast<std::size_t>(a)] = static_cast<double>(q(0, a));
    return out;
  }

  int act(const ObservationMatrix& obs) override {
    const std::vector<double> q = q_values(obs);
    return select_action(std::span<const double>(q), epsilon_, rng_);
  }

  int greedy_action(const ObservationMatrix& obs) override {
    const std::vector<double> q = q_values(obs);
    return argmax(std::span<const double>(q));
  }

  void begin_episode(long episode, long total) override { epsilon_ = cfg_.epsilon.at(episode, total); }

  /// Target parameters become bit-equal to the online parameters.
  void sync_target() {
    nn::copy_values(target_->parameters(), q_->parameters());
    ++syncs_;
  }

  /// One gradient step on `batch`; nullopt when the loss or gradient was
  /// non-finite (the step is skipped).
  std::optional<double> update(const TransitionBatch& batch) {
    const std::vector<double> y = td_targets(batch, *target_, cfg_.gamma);
    const ParamList<S> params = q_->parameters();
    nn::zero_grads(params);
    const double loss = dqn_loss_and_grad(*q_, batch, y);
    if (!std::isfinite(loss)) {
      adam_.skipped_last = true;
      return std::nullopt;
    }
    if (cfg_.max_grad_norm > 0.0) nn::clip_grad_norm(params, cfg_.max_grad_norm);
    if (!nn::adam_step(adam_, params)) return std::nullopt;
    return loss;
  }

  /// Stores the transition, trains once the replay holds `learning_starts`
  /// items, and syncs the target every `target_sync_period` steps.
  std::optional<double> observe(const Transition& t) override {
    replay_.push(t);
    ++steps_;
    std::optional<double> loss;
    if (replay_.size() >= std::max(cfg_.learning_starts, std::size_t{1})) loss = update(replay_.sample(cfg_.batch_size, rng_));
    if (steps_ % cfg_.target_sync_period == 0) sync_target();
    return loss;
  }

  Network<S>& decision_network() override { return *q_; }

  nn::Checkpoint checkpoint() override {
    nn::Checkpoint ck;
    write_architecture_header(ck.header, kind_, cfg_, scenario_, vehicles_, actions_);
    ck.header["epsilon"] = epsilon_;
    ck.header["steps"] = steps_;
    ck.header["syncs"] = syncs_;
    append_network(ck, "q", *q_);
    append_network(ck, "target", *target_);
    ck.optimizer = nn::export_optimizer(adam_, q_->parameters());
    return ck;
  }

  void restore(const nn::Checkpoint& ck) override {
    restore_network(ck, "q", *q_);
    restore_network(ck, "target", *target_);
    if (ck.optimizer) nn::import_optimizer(adam_, q_->parameters(), *ck.optimizer);
    epsilon_ = ck.header.value("epsilon", epsilon_);
    steps_ = ck.header.value("steps", steps_);
    syncs_ = ck.header.value("syncs", syncs_);
  }

 private:
  AgentKind kind_;
  AgentConfig cfg_;
  ScenarioKind scenario_;
  int vehicles_;
  int actions_;
  std::mt19937_64 init_rng_;
  std::mt19937_64 rng_;
  std::unique_ptr<Network<S>> q_;
  std::unique_ptr<Network<S>> target_;
  ReplayMemory replay_;
  nn::AdamState<S> adam_;
  double epsilon_ = 1.0;
  long steps_ = 0;
  long syncs_ = 0;
};

}  // namespace jsafe

#endif  // JSAFE_AGENTS_DQN_HPP

#ifndef JSAFE_AGENTS_POLICY_GRADIENT_HPP
#define JSAFE_AGENTS_POLICY_GRADIENT_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "jsafe/agents/learner.hpp"

namespace jsafe {

inline constexpr double kLogProbabilityFloor = 1e-8;

/// Row-wise softmax of logits.
template <class S>
Tensor<S> softmax_rows(const Tensor<S>& logits) {
  Tensor<S> p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline double safe_log(double p) { return std::log(std::max(p, kLogProbabilityFloor)); }

/// Discounted n-step returns of one rollout segment: sum_i gamma^i r_{t+i}
/// plus gamma^k V(s_{t+k}) when the segment did not end in a terminal state.
inline std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap_value, bool terminal,
                                         double gamma) {
  std::vector<double> out(rewards.size());
  double running = terminal ? 0.0 : bootstrap_value;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = rewards[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

/// n-step advantage per position: return minus V(s_t).
inline std::vector<double> a2c_advantage(std::span<const double> rewards, std::span<const double> values,
                                         double bootstrap_value, bool terminal, double gamma) {
  if (rewards.size() != values.size()) throw ContractViolation("a2c_advantage: rewards and values differ in length");
  std::vector<double> adv = nstep_returns(rewards, bootstrap_value, terminal, gamma);
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= values[i];
  return adv;
}

/// One-step TD error r + gamma V(s') - V(s).
inline double td_error(double reward, double value, double next_value, bool terminal, double gamma) {
  return reward + (terminal ? 0.0 : gamma * next_value) - value;
}

struct PolicyLosses {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

struct PolicyBatch {
  Tensor<double> rows;  // stacked observations
  int vehicles = 0;
  std::vector<int> actions;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> old_log_probs;  // PPO only
};

/// Entropy term gradient: d(-H)/dz_j = p_j (log p_j + H).
template <class S>
void add_entropy_grad(const Tensor<S>& p, double coefficient, double n, Tensor<S>& d_logits, double& entropy_sum) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) h -= static_cast<double>(p(i, j)) * safe_log(static_cast<double>(p(i, j)));
    entropy_sum += h;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pj = static_cast<double>(p(i, j));
      d_logits(i, j) += static_cast<S>(coefficient * pj * (safe_log(pj) + h) / n);
    }
  }
}

template <class S>
double value_loss_and_grad(Network<S>& critic, const Tensor<S>& rows, int vehicles, std::span<const double> returns,
                           double coefficient) {
  const Tensor<S> v = critic.forward(rows, vehicles);
  const double n = static_cast<double>(returns.size());
  Tensor<S> dv(v.rows(), 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double err = static_cast<double>(v(i, 0)) - returns[static_cast<std::size_t>(i)];
    loss += err * err;
    dv(i, 0) = static_cast<S>(coefficient * 2.0 * err / n);
  }
  critic.backward(dv);
  return loss / n;
}

/// A2C objective: -mean(log pi(a|s) A) + c_v mean((R - V)^2) - c_e mean(H).
/// The advantages are constants. Gradients accumulate into both networks.
template <class S>
PolicyLosses a2c_loss_and_grad(Network<S>& actor, Network<S>& critic, const PolicyBatch& b, double value_coefficient,
                               double entropy_coefficient) {
  const Tensor<S> rows = b.rows.template cast<S>();
  const Tensor<S> logits = actor.forward(rows, b.vehicles);
  const Tensor<S> p = softmax_rows(logits);
  const double n = static_cast<double>(b.actions.size());
  Tensor<S> d = Tensor<S>::Zero(p.rows(), p.cols());
  PolicyLosses out;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const int a = b.actions[static_cast<std::size_t>(i)];
    const double adv = b.advantages[static_cast<std::size_t>(i)];
    out.policy -= safe_log(static_cast<double>(p(i, a))) * adv;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      d(i, j) += static_cast<S>((static_cast<double>(p(i, j)) - (j == a ? 1.0 : 0.0)) * adv / n);
  }
  out.policy /= n;
  double entropy_sum = 0.0;
  add_entropy_grad(p, entropy_coefficient, n, d, entropy_sum);
  out.entropy = entropy_sum / n;
  actor.backward(d);
  out.value = value_loss_and_grad(critic, rows, b.vehicles, b.returns, value_coefficient);
  out.total = out.policy + value_coefficient * out.value - entropy_coefficient * out.entropy;
  return out;
}

template <class S>
std::vector<double> log_probabilities(Network<S>& actor, const Tensor<S>& rows, int vehicles,
                                      std::span<const int> actions) {
  const Tensor<S> p = softmax_rows(actor.forward(rows, vehicles));
  std::vector<double> out(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i)
    out[i] = safe_log(static_cast<double>(p(static_cast<Eigen::Index>(i), actions[i])));
  return out;
}

/// pi_theta(a|s) / pi_old(a|s) per item.
template <class S>
std::vector<double> ppo_ratio(Network<S>& actor, Network<S>& snapshot, const Tensor<double>& rows, int vehicles,
                              std::span<const int> actions) {
  const Tensor<S> r = rows.template cast<S>();
  const std::vector<double> now = log_probabilities(actor, r, vehicles, actions);
  const std::vector<double> old = log_probabilities(snapshot, r, vehicles, actions);
  std::vector<double> out(actions.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(now[i] - old[i]);
  return out;
}

inline double ppo_clipped_term(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

/// Negative mean clipped surrogate.
inline double ppo_loss(std::span<const double> ratios, std::span<const double> advantages, double clip) {
  if (ratios.size() != advantages.size() || ratios.empty()) throw ContractViolation("ppo_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) s += ppo_clipped_term(ratios[i], advantages[i], clip);
  return -s / static_cast<double>(ratios.size());
}

/// PPO objective: ppo_loss + c_v value loss - c_e entropy, using the
/// stored old log-probabilities of `b`.
template <class S>
PolicyLosses ppo_loss_and_grad(Network<S>& actor, Network<S>& critic, const PolicyBatch& b, double clip,
                               double value_coefficient, double entropy_coefficient) {
  const Tensor<S> rows = b.rows.template cast<S>();
  const Tensor<S> p = softmax_rows(actor.forward(rows, b.vehicles));
  const double n = static_cast<double>(b.actions.size());
  Tensor<S> d = Tensor<S>::Zero(p.rows(), p.cols());
  PolicyLosses out;
  double surrogate = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const int a = b.actions[k];
    const double adv = b.advantages[k];
    const double ratio = std::exp(safe_log(static_cast<double>(p(i, a))) - b.old_log_probs[k]);
    surrogate += ppo_clipped_term(ratio, adv, clip);
    // The unclipped branch is the active minimum; only it depends on theta.
    const bool clipped = (adv >= 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
    if (clipped) continue;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      d(i, j) -= static_cast<S>(adv * ratio * ((j == a ? 1.0 : 0.0) - static_cast<double>(p(i, j))) / n);
  }
  out.policy = -surrogate / n;
  double entropy_sum = 0.0;
  add_entropy_grad(p, entropy_coefficient, n, d, entropy_sum);
  out.entropy = entropy_sum / n;
  actor.backward(d);
  out.value = value_loss_and_grad(critic, rows, b.vehicles, b.returns, value_coefficient);
  out.total = out.policy + value_coefficient * out.value - entropy_coefficient * out.entropy;
  return out;
}

/// Shared plumbing of the two actor-critic learners.
template <class S>
class ActorCritic : public Learner<S> {
 public:
  ActorCritic(AgentKind kind, const AgentConfig& cfg, ScenarioKind scenario, int vehicles, int actions,
              std::uint64_t seed)
      : kind_(kind),
        cfg_(cfg),
        scenario_(scenario),
        vehicles_(vehicles),
        actions_(actions),
        init_rng_(seed),
        rng_(seed ^ 0x9E3779B97F4A7C15ull),
        actor_(make_network<S>(AgentKind::kDqn, cfg, vehicles, actions, init_rng_)),
        critic_(make_network<S>(AgentKind::kDqn, cfg, vehicles, 1, init_rng_)) {
    cfg.validate();
    adam_ = nn::AdamState<S>(all_parameters(), cfg.learning_rate);
  }

  AgentKind kind() const override { return kind_; }
  Network<S>& actor() { return *actor_; }
  Network<S>& critic() { return *critic_; }
  const AgentConfig& config() const { return cfg_; }
  std::mt19937_64& rng() { return rng_; }

  std::vector<double> probabilities(const ObservationMatrix& obs) {
    const Tensor<S> p = softmax_rows(actor_->forward(stack_observations<S>(obs), vehicles_));
    std::vector<double> out(static_cast<std::size_t>(p.cols()));
    for (Eigen::Index j = 0; j < p.cols(); ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(p(0, j));
    return out;
  }

  double value(const ObservationMatrix& obs) {
    return static_cast<double>(critic_->forward(stack_observations<S>(obs), vehicles_)(0, 0));
  }

  int act(const ObservationMatrix& obs) override {
    const std::vector<double> p = probabilities(obs);
    std::discrete_distribution<int> pick(p.begin(), p.end());
    return pick(rng_);
  }

  int greedy_action(const ObservationMatrix& obs) override {
    const std::vector<double> p = probabilities(obs);
    return argmax(std::span<const double>(p));
  }

  Network<S>& decision_network() override { return *actor_; }

  nn::Checkpoint checkpoint() override {
    nn::Checkpoint ck;
    write_architecture_header(ck.header, kind_, cfg_, scenario_, vehicles_, actions_);
    ck.header["updates"] = updates_;
    append_network(ck, "actor", *actor_);
    append_network(ck, "critic", *critic_);
    ck.optimizer = nn::export_optimizer(adam_, all_parameters());
    return ck;
  }

  void restore(const nn::Checkpoint& ck) override {
    restore_network(ck, "actor", *actor_);
    restore_network(ck, "critic", *critic_);
    if (ck.optimizer) nn::import_optimizer(adam_, all_parameters(), *ck.optimizer);
    updates_ = ck.header.value("updates", updates_);
  }

  ParamList<S> all_parameters() {
    ParamList<S> p = actor_->parameters();
    const ParamList<S> c = critic_->parameters();
    p.insert(p.end(), c.begin(), c.end());
    return p;
  }

  long updates() const { return updates_; }

 protected:
  std::vector<double> values_of(const Tensor<S>& rows) {
    const Tensor<S> v = critic_->forward(rows, vehicles_);
    std::vector<double> out(static_cast<std::size_t>(v.rows()));
    for (Eigen::Index i = 0; i < v.rows(); ++i) out[static_cast<std::size_t>(i)] = static_cast<double>(v(i, 0));
    return out;
  }

  bool apply_gradients() {
    const ParamList<S> params = all_parameters();
    if (cfg_.max_grad_norm > 0.0) nn::clip_grad_norm(params, cfg_.max_grad_norm);
    const bool ok = nn::adam_step(adam_, params);
    if (ok) ++updates_;
    return ok;
  }

  AgentKind kind_;
  AgentConfig cfg_;
  ScenarioKind scenario_;
  int vehicles_;
  int actions_;
  std::mt19937_64 init_rng_;
  std::mt19937_64 rng_;
  std::unique_ptr<Network<S>> actor_;
  std::unique_ptr<Network<S>> critic_;
  nn::AdamState<S> adam_;
  long updates_ = 0;
};

/// Synchronous advantage actor-critic: updates after every `t_max` steps
/// or at the end of an episode.
template <class S>
class A2cAgent final : public ActorCritic<S> {
 public:
  A2cAgent(const AgentConfig& cfg, ScenarioKind scenario, int vehicles, int actions, std::uint64_t seed)
      : ActorCritic<S>(AgentKind::kA2c, cfg, scenario, vehicles, actions, seed) {}

  std::optional<double> observe(const Transition& t) override {
    rollout_.push_back(t);
    if (!t.done && static_cast<int>(rollout_.size()) < this->cfg_.t_max) return std::nullopt;
    const PolicyLosses l = update(rollout_);
    rollout_.clear();
    return l.total;
  }

  /// One update on a contiguous rollout (length <= t_max).
  PolicyLosses update(const std::vector<Transition>& rollout) {
    PolicyBatch b = make_batch(rollout);
    nn::zero_grads(this->all_parameters());
    const PolicyLosses l = a2c_loss_and_grad(*this->actor_, *this->critic_, b, this->cfg_.value_coefficient,
                                             this->cfg_.entropy_coefficient);
    if (std::isfinite(l.total)) this->apply_gradients();
    return l;
  }

  PolicyBatch make_batch(const std::vector<Transition>& rollout) {
    if (rollout.empty()) throw ContractViolation("a2c update on an empty rollout");
    PolicyBatch b;
    std::vector<const ObservationMatrix*> obs;
    std::vector<double> rewards;
    for (const Transition& t : rollout) {
      obs.push_back(&t.state);
      b.actions.push_back(t.action);
      rewards.push_back(t.reward);
    }
    b.vehicles = static_cast<int>(rollout.front().state.rows());
    b.rows = stack_observations<double>(obs);
    const std::vector<double> values = this->values_of(b.rows.template cast<S>());
    const Transition& last = rollout.back();
    const double bootstrap = last.done ? 0.0 : this->value(last.next_state);
    b.returns = nstep_returns(rewards, bootstrap, last.done, this->cfg_.gamma);
    b.advantages = a2c_advantage(rewards, values, bootstrap, last.done, this->cfg_.gamma);
    return b;
  }

 private:
  std::vector<Transition> rollout_;
};

/// Clipped-surrogate PPO. Collects `ppo_rollout` transitions with the
/// current policy, estimates advantages with n-step returns over t_max
/// chunks, then runs `ppo_epochs` passes of shuffled minibatches against
/// the frozen snapshot, which is refreshed afterwards.
template <class S>
class PpoAgent final : public ActorCritic<S> {
 public:
  PpoAgent(const AgentConfig& cfg, ScenarioKind scenario, int vehicles, int actions, std::uint64_t seed)
      : ActorCritic<S>(AgentKind::kPpo, cfg, scenario, vehicles, actions, seed), snapshot_(this->actor_->clone()) {}

  Network<S>& snapshot() { return *snapshot_; }

  std::optional<double> observe(const Transition& t) override {
    buffer_.push_back(t);
    if (static_cast<int>(buffer_.size()) < this->cfg_.ppo_rollout) return std::nullopt;
    const double loss = update(buffer_);
    buffer_.clear();
    return loss;
  }

  void restore(const nn::Checkpoint& ck) override {
    ActorCritic<S>::restore(ck);
    nn::copy_values(snapshot_->parameters(), this->actor_->parameters());
  }

  /// Advantages and returns for a buffer of consecutive transitions.
  PolicyBatch make_batch(const std::vector<Transition>& buf) {
    PolicyBatch b;
    std::vector<const ObservationMatrix*> obs;
    for (const Transition& t : buf) {
      obs.push_back(&t.state);
      b.actions.push_back(t.action);
    }
    b.vehicles = static_cast<int>(buf.front().state.rows());
    b.rows = stack_observations<double>(obs);
    const Tensor<S> rows = b.rows.template cast<S>();
    const std::vector<double> values = this->values_of(rows);
    b.old_log_probs = log_probabilities(*snapshot_, rows, b.vehicles, b.actions);
    b.returns.resize(buf.size());
    b.advantages.resize(buf.size());
    std::size_t start = 0;
    while (start < buf.size()) {
      std::size_t end = start;
      while (end < buf.size() && end - start < static_cast<std::size_t>(this->cfg_.t_max)) {
        ++end;
        if (buf[end - 1].done) break;
      }
      std::vector<double> rewards;
      for (std::size_t i = start; i < end; ++i) rewards.push_back(buf[i].reward);
      const Transition& last = buf[end - 1];
      const double bootstrap = last.done ? 0.0 : this->value(last.next_state);
      const auto ret = nstep_returns(rewards, bootstrap, last.done, this->cfg_.gamma);
      for (std::size_t i = start; i < end; ++i) {
        b.returns[i] = ret[i - start];
        b.advantages[i] = ret[i - start] - values[i];
      }
      start = end;
    }
    return b;
  }

  static PolicyBatch subset(const PolicyBatch& b, std::span<const std::size_t> idx) {
    PolicyBatch s;
    s.vehicles = b.vehicles;
    s.rows.resize(static_cast<Eigen::Index>(idx.size()) * b.vehicles, b.rows.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      s.rows.middleRows(static_cast<Eigen::Index>(k) * b.vehicles, b.vehicles) =
          b.rows.middleRows(static_cast<Eigen::Index>(idx[k]) * b.vehicles, b.vehicles);
      s.actions.push_back(b.actions[idx[k]]);
      s.advantages.push_back(b.advantages[idx[k]]);
      s.returns.push_back(b.returns[idx[k]]);
      s.old_log_probs.push_back(b.old_log_probs[idx[k]]);
    }
    return s;
  }

  /// Returns the mean total loss over all minibatch steps.
  double update(const std::vector<Transition>& buf) {
    if (buf.empty()) throw ContractViolation("ppo update on an empty buffer");
    const PolicyBatch full = make_batch(buf);
    std::vector<std::size_t> order(buf.size());
    double total = 0.0;
    int count = 0;
    for (int epoch = 0; epoch < this->cfg_.ppo_epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), this->rng_);
      for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(this->cfg_.ppo_minibatch)) {
        const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(this->cfg_.ppo_minibatch));
        const PolicyBatch mb = subset(full, std::span<const std::size_t>(order.data() + s, e - s));
        nn::zero_grads(this->all_parameters());
        const PolicyLosses l = ppo_loss_and_grad(*this->actor_, *this->critic_, mb, this->cfg_.ppo_clip,
                                                 this->cfg_.value_coefficient, this->cfg_.entropy_coefficient);
        if (!std::isfinite(l.total)) continue;
        this->apply_gradients();
        total += l.total;
        ++count;
      }
    }
    nn::copy_values(snapshot_->parameters(), this->actor_->parameters());
    return count > 0 ? total / count : 0.0;
  }

 private:
  std::unique_ptr<Network<S>> snapshot_;
  std::vector<Transition> buffer_;
};

}  // namespace jsafe

#endif  // JSAFE_AGENTS_POLICY_GRADIENT_HPP

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "jsafe/harness/experiment.hpp"
#include "jsafe/nn/grad_check.hpp"
#include "oracles.hpp"

namespace {

using namespace jsafe;
using T = nn::Tensor<double>;

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

T random_tensor(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  T t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
  return t;
}

T random_observations(int batch, int vehicles, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution present(0.6);
  T x = T::Zero(batch * vehicles, kFeatureCount);
  for (int r = 0; r < x.rows(); ++r) {
    if (r % vehicles != 0 && !present(rng)) continue;
    x(r, 0) = 1.0;
    for (int c = 1; c < kFeatureCount; ++c) x(r, c) = u(rng);
  }
  return x;
}

double project(const T& y, const T& w) { return (y.array() * w.array()).sum(); }

// ---------------------------------------------------------------------------

Verdict gradient_correctness() {
  Verdict v;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  auto record = [&](const std::string& name, const nn::GradCheckResult& r) {
    worst = std::max(worst, r.max_relative_error);
    v.require(r.max_relative_error < 1e-4, name + " error " + fmt("%.2e", r.max_relative_error) + " at " + r.worst_parameter);
  };

  {
    nn::Linear<double> l("linear", 6, 4, rng);
    nn::Param<double> x("x", 3, 6);
    x.value = random_tensor(3, 6, rng);
    const T w = random_tensor(3, 4, rng);
    nn::ParamList<double> ps = l.parameters();
    ps.push_back(&x);
    record("linear", nn::grad_check(ps, [&] { return project(nn::linear_forward(l, x.value), w); },
                                    [&] { x.grad += nn::linear_accumulate(l, x.value, w); }));

    // Negative control: a backward pass scaled by 1.01 must be caught.
    const auto bad = nn::grad_check(ps, [&] { return project(nn::linear_forward(l, x.value), w); },
                                    [&] { x.grad += 1.01 * nn::linear_accumulate(l, x.value, w); });
    v.require(bad.max_relative_error > 1e-4, "corrupted backward went unnoticed");
  }
  {
    nn::Param<double> x("x", 4, 5);
    x.value = random_tensor(4, 5, rng);
    for (Eigen::Index i = 0; i < x.value.size(); ++i)
      if (std::abs(x.value.data()[i]) < 1e-3) x.value.data()[i] = 0.5;
    const T w = random_tensor(4, 5, rng);
    record("relu", nn::grad_check({&x}, [&] { return project(nn::relu_forward(x.value), w); },
                                  [&] { x.grad += nn::relu_backward(x.value, w); }));
  }
  {
    nn::LayerNorm<double> ln("norm", 6);
    ln.gain.value = random_tensor(1, 6, rng);
    ln.offset.value = random_tensor(1, 6, rng);
    nn::Param<double> x("x", 3, 6);
    x.value = random_tensor(3, 6, rng);
    const T w = random_tensor(3, 6, rng);
    nn::ParamList<double> ps = ln.parameters();
    ps.push_back(&x);
    record("layer norm", nn::grad_check(
                             ps, [&] { return project(nn::layer_norm_forward(ln, x.value), w); },
                             [&] {
                               nn::LayerNormCache<double> c;
                               nn::layer_norm_forward(ln, x.value, &c);
                               const auto g = nn::layer_norm_backward(ln, c, w);
                               ln.gain.grad += g.gain;
                               ln.offset.grad += g.offset;
                               x.grad += g.input;
                             }));
  }
  {
    nn::Param<double> q("q", 2, 4), k("k", 5, 4), val("v", 5, 3);
    q.value = random_tensor(2, 4, rng);
    k.value = random_tensor(5, 4, rng);
    val.value = random_tensor(5, 3, rng);
    const T w = random_tensor(2, 3, rng);
    record("scaled dot-product attention",
           nn::grad_check(
               {&q, &k, &val}, [&] { return project(nn::attention_forward(q.value, k.value, val.value, 4).output, w); },
               [&] {
                 const auto f = nn::attention_forward(q.value, k.value, val.value, 4);
                 const auto g = nn::attention_backward(q.value, k.value, val.value, f.weights, w, 4);
                 q.grad += g.q;
                 k.grad += g.k;
                 val.grad += g.v;
               }));
  }
  for (const nn::QueryMode mode : {nn::QueryMode::kSingle, nn::QueryMode::kMulti}) {
    nn::MultiHeadAttention<double> mha("mha", 8, 2, 4, mode, rng);
    nn::Param<double> x("x", 8, 8);
    x.value = random_tensor(8, 8, rng);
    const std::vector<bool> mask{true, true, false, true, true, true, true, false};
    const T w = random_tensor(2, 8, rng);
    nn::ParamList<double> ps = mha.parameters();
    ps.push_back(&x);
    record("multi-head " + nn::to_string(mode),
           nn::grad_check(
               ps,
               [&] {
                 nn::MultiHeadCache<double> c;
                 return project(nn::multi_head_forward(mha, x.value, 4, mask, c), w);
               },
               [&] {
                 nn::MultiHeadCache<double> c;
                 nn::multi_head_forward(mha, x.value, 4, mask, c);
                 x.grad += nn::multi_head_backward(mha, c, w);
               }));
  }
  // Both full Q-networks at their default sizes.
  for (const AgentKind kind : {AgentKind::kDqn, AgentKind::kAttentionDqnSingle, AgentKind::kAttentionDqnMulti}) {
    auto net = make_network<double>(kind, AgentConfig{}, 15, 3, rng);
    const T x = random_observations(2, 15, rng);
    const T w = random_tensor(2, 3, rng);
    record(to_string(kind) + " network", nn::grad_check(
                                            net->parameters(), [&] { return project(net->forward(x, 15), w); },
                                            [&] {
                                              net->forward(x, 15);
                                              net->backward(w);
                                            }));
  }
  if (v.ok) v.detail = "max relative error " + fmt("%.2e", worst) + "; corrupted backward detected";
  return v;
}

Verdict attention_invariants() {
  Verdict v;
  std::mt19937_64 rng(202);
  double worst_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const T q = random_tensor(3, 4, rng) * 4.0, k = random_tensor(9, 4, rng) * 4.0, val = random_tensor(9, 2, rng);
    const auto r = nn::attention_forward(q, k, val, 4);
    for (Eigen::Index i = 0; i < r.weights.rows(); ++i) worst_sum = std::max(worst_sum, std::abs(r.weights.row(i).sum() - 1.0));
  }
  v.require(worst_sum <= 1e-9, "softmax row sum off by " + fmt("%.2e", worst_sum));

  // Full single-query network: permuting the non-ego rows leaves Q unchanged.
  double worst_perm = 0.0;
  auto net = make_network<double>(AgentKind::kAttentionDqnSingle, AgentConfig{}, 15, 5, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const T x = random_observations(1, 15, rng);
    std::vector<int> perm(14);
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    T y = x;
    for (int j = 0; j < 14; ++j) y.row(j + 1) = x.row(perm[static_cast<std::size_t>(j)]);
    const T a = net->forward(x, 15), b = net->forward(y, 15);
    worst_perm = std::max(worst_perm, (a - b).cwiseAbs().maxCoeff());
  }
  v.require(worst_perm <= 1e-12, "permutation changed the output by " + fmt("%.2e", worst_perm));

  // Two keys, key width 1: q = 1, k = (1, 0), values the identity.
  T q(1, 1), k(2, 1), val(2, 2);
  q << 1.0;
  k << 1.0, 0.0;
  val << 1.0, 0.0, 0.0, 1.0;
  const auto r = nn::attention_forward(q, k, val, 1);
  const double e = std::exp(1.0);
  const double expect[] = {e / (e + 1.0), 1.0 / (e + 1.0)};
  double hand = 0.0;
  for (int j = 0; j < 2; ++j) {
    hand = std::max(hand, std::abs(r.weights(0, j) - expect[j]));
    hand = std::max(hand, std::abs(r.output(0, j) - expect[j]));
  }
  v.require(hand <= 1e-12, "hand example off by " + fmt("%.2e", hand));
  if (v.ok) v.detail = "row sums within " + fmt("%.1e", worst_sum) + ", permutation drift " + fmt("%.1e", worst_perm) +
                       ", hand example within " + fmt("%.1e", hand);
  return v;
}

Verdict rate_identity() {
  Verdict v;
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> len(1, 1000), pick(0, 2);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<EpisodeRecord> records(static_cast<std::size_t>(len(rng)));
    for (auto& r : records) r.outcome = static_cast<EpisodeOutcome>(pick(rng));
    const BasisPoints bp = compute_rates(records).basis_points();
    bad += bp.collision + bp.success + bp.freezing != 10000 || bp.freezing < 0;
  }
  v.require(bad == 0, std::to_string(bad) + " outcome lists did not sum to 100%");
  const long f1 = residual_freezing(to_basis_points(56.88), to_basis_points(29.23)).freezing;
  const long f2 = residual_freezing(to_basis_points(14.7), to_basis_points(33.99)).freezing;
  v.require(f1 == 1389, "56.88/29.23 gives freezing " + fmt("%.2f", f1 / 100.0));
  v.require(f2 == 5131, "14.7/33.99 gives freezing " + fmt("%.2f", f2 / 100.0));
  if (v.ok) v.detail = "10000 lists exact; freezing 13.89% and 51.31%";
  return v;
}

ObservationMatrix random_obs(std::mt19937_64& rng, int vehicles) {
  return random_observations(1, vehicles, rng);
}

Verdict algorithm_laws() {
  Verdict v;
  std::mt19937_64 rng(404);
  AgentConfig cfg;
  cfg.mlp_hidden = {16, 16};
  auto target = make_network<double>(AgentKind::kDqn, cfg, 5, 3, rng);
  std::vector<Transition> items;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 16; ++i) items.push_back({random_obs(rng, 5), i % 3, u(rng), random_obs(rng, 5), i % 2 == 0});
  TransitionBatch batch;
  for (const auto& t : items) batch.push_back(&t);
  const auto y = td_targets(batch, *target, 0.95);
  const auto y0 = td_targets(batch, *target, 0.0);
  bool terminal_ok = true, zero_ok = true;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].done) terminal_ok = terminal_ok && y[i] == items[i].reward;
    zero_ok = zero_ok && y0[i] == items[i].reward;
  }
  v.require(terminal_ok, "terminal targets are not the reward");
  v.require(zero_ok, "gamma = 0 targets are not the reward");

  auto actor = make_network<double>(AgentKind::kDqn, cfg, 5, 3, rng);
  auto snapshot = actor->clone();
  T rows(16 * 5, kFeatureCount);
  std::vector<int> actions;
  std::vector<double> adv;
  for (int i = 0; i < 16; ++i) {
    rows.middleRows(i * 5, 5) = random_obs(rng, 5);
    actions.push_back(i % 3);
    adv.push_back(u(rng));
  }
  const auto ratios = ppo_ratio(*actor, *snapshot, rows, 5, actions);
  double ratio_dev = 0.0, unclipped = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    ratio_dev = std::max(ratio_dev, std::abs(ratios[i] - 1.0));
    unclipped += ratios[i] * adv[i];
  }
  v.require(ratio_dev == 0.0, "ratio differs from 1 by " + fmt("%.2e", ratio_dev));
  v.require(ppo_loss(ratios, adv, 0.2) == -unclipped / 16.0, "clipped surrogate differs from unclipped at ratio 1");

  double td_dev = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double r[] = {u(rng)}, val[] = {u(rng)};
    const double boot = u(rng);
    const bool term = i % 2 == 0;
    td_dev = std::max(td_dev, std::abs(a2c_advantage(r, val, boot, term, 0.9)[0] - td_error(r[0], val[0], boot, term, 0.9)));
  }
  v.require(td_dev == 0.0, "single-step advantage differs from the TD error by " + fmt("%.2e", td_dev));

  const double c = 2.5, gamma = 0.97;
  double geo = 0.0;
  for (int k = 1; k <= 10; ++k) {
    const std::vector<double> r(static_cast<std::size_t>(k), 0.0), val(static_cast<std::size_t>(k), c);
    geo = std::max(geo, std::abs(a2c_advantage(r, val, c, false, gamma)[0] - c * (std::pow(gamma, k) - 1.0)));
  }
  v.require(geo <= 1e-12, "geometric identity off by " + fmt("%.2e", geo));
  if (v.ok) v.detail = "td, ppo ratio, one-step and geometric laws hold (dev " + fmt("%.1e", geo) + ")";
  return v;
}

Verdict environment_oracle() {
  Verdict v;
  std::mt19937_64 rng(505);
  int checked = 0, conflicts = 0, mismatches = 0, priority_checked = 0, priority_wrong = 0;
  for (const ScenarioKind kind : {ScenarioKind::kIntersection, ScenarioKind::kRoundabout}) {
    const ScenarioLayout layout = make_layout(kind);
    const ScenarioConfig cfg = ScenarioConfig::defaults(kind);
    for (int i = 0; i < 500; ++i) {
      const auto c = oracle::random_conflict_case(layout, cfg.v_max, rng);
      const TrafficVehicle* vs[] = {&c.a, &c.b};
      const Prediction preds[] = {predict_vehicle(c.a, layout.network, cfg), predict_vehicle(c.b, layout.network, cfg)};
      const auto declared = oracle::declared_right_of_way(layout.network, c.a, c.b);
      if (declared) {
        ++priority_checked;
        priority_wrong += has_right_of_way(layout.network, c.a, c.b) != *declared;
      }
      for (std::size_t self = 0; self < 2; ++self) {
        const TrafficVehicle& me = *vs[self];
        const TrafficVehicle& other = *vs[1 - self];
        const auto o = oracle::lagged_overlap(layout.network, me, other, cfg.prediction_horizon, cfg.prediction_dt);
        if (o.margin <= 0.1) continue;
        ++checked;
        conflicts += o.conflict;
        const auto mine = oracle::declared_right_of_way(layout.network, me, other);
        const bool wins = mine ? *mine : has_right_of_way(layout.network, me, other);
        mismatches += must_yield(layout.network, self, vs, preds) != (o.conflict && !wins);
      }
    }
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(checked) + " yield decisions disagree");
  v.require(priority_wrong == 0, std::to_string(priority_wrong) + " priority directions disagree");
  v.require(conflicts > 100, "too few conflicts sampled (" + std::to_string(conflicts) + ")");
  if (v.ok)
    v.detail = "1000 configurations, " + std::to_string(checked) + " non-marginal decisions (" + std::to_string(conflicts) +
               " conflicts) and " + std::to_string(priority_checked) + " priority directions agree";
  return v;
}

Verdict determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "jsafe_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::pair<ScenarioKind, AgentKind>> cases{{ScenarioKind::kIntersection, AgentKind::kAttentionDqnSingle},
                                                          {ScenarioKind::kRoundabout, AgentKind::kDqn},
                                                          {ScenarioKind::kRoundabout, AgentKind::kPpo}};
  for (const auto& [scenario, agent] : cases) {
    std::string files[2][3];
    for (int run = 0; run < 2; ++run) {
      KeyValueConfig kv;
      kv.set("scenario", to_string(scenario));
      kv.set("agent", to_string(agent));
      kv.set("episodes", "200");
      kv.set("seed", "7");
      kv.set("out", (root / ("exec" + std::to_string(run))).string());
      const ExperimentConfig cfg = ExperimentConfig::from_key_values(kv);
      std::ostringstream sink;
      const TrainResult r = cmd_train(cfg, sink).front();
      cmd_replay(cfg, r.directory / "checkpoint.bin", 11, r.directory / "replay", true);
      files[run][0] = read_text_file(r.directory / "log.csv");
      files[run][1] = read_text_file(r.directory / "checkpoint.bin");
      files[run][2] = read_text_file(r.directory / "replay" / "trace.jsonl");
    }
    const std::string tag = to_string(scenario) + "/" + to_string(agent);
    v.require(files[0][0] == files[1][0], tag + " training logs differ");
    v.require(files[0][1] == files[1][1], tag + " checkpoints differ");
    v.require(files[0][2] == files[1][2], tag + " traces differ");
  }
  fs::remove_all(root);
  if (v.ok) v.detail = "logs, checkpoints and traces byte-identical for 3 scenario/agent pairs";
  return v;
}

struct TrendRun {
  double collision, success, freezing;
};

TrendRun train_final(ScenarioKind scenario, AgentKind agent, std::uint64_t seed) {
  const ScenarioConfig sc = ScenarioConfig::defaults(scenario);
  auto learner = make_learner<float>(agent, AgentConfig::defaults(scenario), sc, seed);
  const TrainingLog log = train_loop(*learner, sc, 5000, seed);
  return {tail_rate(log, EpisodeOutcome::kCollision, kFinalWindow), tail_rate(log, EpisodeOutcome::kSuccess, kFinalWindow),
          tail_rate(log, EpisodeOutcome::kFreeze, kFinalWindow)};
}

std::string describe(const char* name, const TrendRun& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s collision %.1f success %.1f freezing %.1f", name, r.collision, r.success, r.freezing);
  return buf;
}

Verdict intersection_trend() {
  Verdict v;
  std::vector<double> gaps;
  std::string detail;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const TrendRun dqn = train_final(ScenarioKind::kIntersection, AgentKind::kDqn, seed);
    const TrendRun attn = train_final(ScenarioKind::kIntersection, AgentKind::kAttentionDqnSingle, seed);
    gaps.push_back(dqn.collision - attn.collision);
    detail += (detail.empty() ? "" : " | ") + std::string("seed ") + std::to_string(seed) + ": " + describe("dqn", dqn) +
              ", " + describe("attn", attn);
    if (seed == 1 && gaps.back() >= 10.0) break;
  }
  double gap = gaps.front();
  if (gaps.size() > 1) {
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    gap = sorted[sorted.size() / 2];
  }
  v.require(gap >= 10.0, "collision gap " + fmt("%.1f", gap) + " points below 10");
  v.detail = (gaps.size() > 1 ? "median gap " : "gap ") + fmt("%.1f", gap) + " points; " + detail +
             (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict roundabout_trend() {
  Verdict v;
  const TrendRun dqn = train_final(ScenarioKind::kRoundabout, AgentKind::kDqn, 1);
  const TrendRun attn = train_final(ScenarioKind::kRoundabout, AgentKind::kAttentionDqnSingle, 1);
  const double gap = dqn.freezing - attn.freezing;
  v.require(gap >= 15.0, "freezing gap " + fmt("%.1f", gap) + " points below 15");
  v.detail = "freezing gap " + fmt("%.1f", gap) + " points; " + describe("dqn", dqn) + ", " + describe("attn", attn) +
             (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

Verdict replay_visualisation() {
  Verdict v;
  int steps = 0;
  long lines = 0;
  double worst = 0.0;
  bool monotone = true, deterministic = true, heads = true;
  for (const ScenarioKind scenario : {ScenarioKind::kIntersection, ScenarioKind::kRoundabout}) {
    for (const AgentKind agent : {AgentKind::kAttentionDqnSingle, AgentKind::kAttentionDqnMulti}) {
      const ScenarioConfig sc = ScenarioConfig::defaults(scenario);
      auto learner = make_learner<double>(agent, AgentConfig::defaults(scenario), sc, 9);
      TrafficEnv env(sc);
      const ScenarioLayout layout = make_layout(scenario);
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const EpisodeTrace tr = record_episode(*learner, env, seed);
        std::ostringstream os;
        write_trace_jsonl(os, tr);
        std::istringstream is(os.str());
        const EpisodeTrace back = read_trace_jsonl(is);
        for (std::size_t k = 0; k < tr.steps.size(); ++k) {
          ++steps;
          const TraceStep& st = tr.steps[k];
          heads = heads && st.attention.size() == 2;
          std::vector<std::pair<double, double>> pairs;
          for (const auto& h : st.attention) {
            worst = std::max(worst, std::abs(std::accumulate(h.begin(), h.end(), 0.0) - 1.0));
          }
          const std::string svg = render_step_svg(tr, k, layout);
          deterministic = deterministic && svg == render_step_svg(tr, k, layout) && svg == render_step_svg(back, k, layout);
          // data-weight="w" ... stroke-width="s" on every attention line
          for (auto p = svg.find("data-weight=\""); p != std::string::npos; p = svg.find("data-weight=\"", p + 1)) {
            const double w = std::stod(svg.substr(p + 13));
            const auto s = svg.find("stroke-width=\"", p);
            pairs.emplace_back(w, std::stod(svg.substr(s + 14)));
          }
          lines += static_cast<long>(pairs.size());
          std::sort(pairs.begin(), pairs.end());
          for (std::size_t i = 1; i < pairs.size(); ++i) monotone = monotone && pairs[i].second >= pairs[i - 1].second;
        }
      }
    }
  }
  v.require(heads, "a step without exactly 2 head weight sets");
  v.require(worst <= 1e-9, "head weights sum off by " + fmt("%.2e", worst));
  v.require(lines > 0, "no attention lines drawn");
  v.require(monotone, "stroke width not monotone in weight");
  v.require(deterministic, "rendering not byte-identical");
  if (v.ok) v.detail = std::to_string(steps) + " steps and " + std::to_string(lines) + " attention lines, 2 heads each summing to 1 within " + fmt("%.1e", worst) +
                       ", monotone strokes, byte-identical renders";
  return v;
}

Verdict epsilon_greedy() {
  Verdict v;
  std::mt19937_64 rng(1010);
  for (int n : {3, 5}) {
    std::vector<double> q(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) q[static_cast<std::size_t>(i)] = i == 1 ? 9.0 : 0.0;
    std::vector<long> counts(static_cast<std::size_t>(n), 0);
    constexpr long kDraws = 100000;
    for (long i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(select_action(std::span<const double>(q), 1.0, rng))];
    const double p = 1.0 / n, sigma = std::sqrt(kDraws * p * (1 - p));
    double worst = 0.0;
    for (long c : counts) worst = std::max(worst, std::abs(static_cast<double>(c) - kDraws * p) / sigma);
    v.require(worst < 3.0, std::to_string(n) + " actions: deviation " + fmt("%.2f", worst) + " sigma");
  }
  const std::vector<std::vector<double>> ties{{1.0, 1.0, 1.0}, {0.0, 2.0, 2.0, -1.0, 2.0}, {-3.0, -3.0, -5.0}};
  const int expect[] = {0, 1, 0};
  for (std::size_t i = 0; i < ties.size(); ++i)
    for (int rep = 0; rep < 100; ++rep)
      if (select_action(std::span<const double>(ties[i]), 0.0, rng) != expect[i]) {
        v.require(false, "tie case " + std::to_string(i) + " broken wrongly");
        rep = 100;
      }
  if (v.ok) v.detail = "uniform within 3 sigma over 1e5 draws for 3 and 5 actions; ties go to the lowest index";
  return v;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no limit
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", 60, gradient_correctness},
      {2, "attention invariants", 5, attention_invariants},
      {3, "outcome rate identity", 5, rate_identity},
      {4, "algorithm laws", 10, algorithm_laws},
      {5, "environment right-of-way oracle", 60, environment_oracle},
      {6, "determinism", 0, determinism},
      {7, "intersection collision trend", 0, intersection_trend},
      {8, "roundabout freezing trend", 0, roundabout_trend},
      {9, "replay and visualisation", 30, replay_visualisation},
      {10, "epsilon-greedy statistics", 5, epsilon_greedy},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0 && secs > c.limit_seconds) v.require(false, "took longer than " + fmt("%.0f s", c.limit_seconds));
    failed += !v.ok;
    std::printf("criterion %2d %s: %s (%.1f s) %s\n", c.id, v.ok ? "PASS" : "FAIL", c.name, secs, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

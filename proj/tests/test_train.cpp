#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "jsafe/harness/curves.hpp"

namespace jsafe {
namespace {

AgentConfig small_config() {
  AgentConfig cfg = AgentConfig::defaults(ScenarioKind::kIntersection);
  cfg.mlp_hidden = {32};
  cfg.encoder = {16, 16};
  cfg.d_k = 8;
  cfg.attention_head = {16};
  cfg.batch_size = 16;
  cfg.learning_starts = 32;
  return cfg;
}

ScenarioConfig empty_intersection() {
  ScenarioConfig s = ScenarioConfig::defaults(ScenarioKind::kIntersection);
  s.spawn_count = 0;
  return s;
}

TEST(MixSeed, DistinctAcrossIndicesAndSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 20; ++s)
    for (std::uint64_t i = 0; i < 500; ++i) seen.insert(mix_seed(s, i));
  EXPECT_EQ(seen.size(), 20u * 500u);
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(TrainLoop, ZeroEpisodesGiveAnEmptyLog) {
  auto agent = make_learner<float>(AgentKind::kDqn, small_config(), empty_intersection(), 1);
  EXPECT_TRUE(train_loop(*agent, empty_intersection(), 0, 1).empty());
}

TEST(TrainLoop, OneRowPerEpisodeInOrder) {
  const ScenarioConfig sc = ScenarioConfig::defaults(ScenarioKind::kIntersection);
  auto agent = make_learner<float>(AgentKind::kDqn, small_config(), sc, 2);
  const TrainingLog log = train_loop(*agent, sc, 3000, 2);
  ASSERT_EQ(log.size(), 3000u);
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(log[i].episode, static_cast<long>(i));
    EXPECT_GE(log[i].steps, 1);
    EXPECT_LE(log[i].steps, 13);
  }
  EXPECT_DOUBLE_EQ(log.front().epsilon, 1.0);
  EXPECT_DOUBLE_EQ(log.back().epsilon, 0.05);
}

TEST(TrainLoop, DeterministicForEveryAgentKind) {
  const ScenarioConfig sc = ScenarioConfig::defaults(ScenarioKind::kRoundabout);
  AgentConfig cfg = small_config();
  cfg.ppo_rollout = 64;
  cfg.ppo_minibatch = 16;
  for (AgentKind k : {AgentKind::kDqn, AgentKind::kAttentionDqnSingle, AgentKind::kAttentionDqnMulti, AgentKind::kA2c,
                      AgentKind::kPpo}) {
    auto a = make_learner<float>(k, cfg, sc, 9);
    auto b = make_learner<float>(k, cfg, sc, 9);
    const TrainingLog la = train_loop(*a, sc, 15, 4), lb = train_loop(*b, sc, 15, 4);
    EXPECT_EQ(la, lb) << to_string(k);
    EXPECT_EQ(nn::serialize_checkpoint(a->checkpoint()), nn::serialize_checkpoint(b->checkpoint())) << to_string(k);
  }
}

TEST(TrainLoop, CallbackCanStopEarly) {
  auto agent = make_learner<float>(AgentKind::kA2c, small_config(), empty_intersection(), 3);
  long seen = 0;
  const TrainingLog log = train_loop(*agent, empty_intersection(), 100, 3, [&](const TrainingRow&) { return ++seen < 5; });
  EXPECT_EQ(log.size(), 5u);
}

TEST(TrainLoop, DqnLearnsToDriveThroughAnEmptyJunction) {
  const ScenarioConfig sc = empty_intersection();
  AgentConfig cfg = small_config();
  cfg.learning_rate = 1e-3;
  auto agent = make_learner<float>(AgentKind::kDqn, cfg, sc, 5);
  const TrainingLog log = train_loop(*agent, sc, 300, 5);
  EXPECT_GT(tail_rate(log, EpisodeOutcome::kSuccess, 50), 90.0);
  TrafficEnv env(sc);
  for (std::uint64_t s = 0; s < 5; ++s) EXPECT_EQ(run_greedy_episode(*agent, env, s).outcome, EpisodeOutcome::kSuccess);
}

TEST(TrainingLog, CsvRoundTrip) {
  TrainingLog log{{0, EpisodeOutcome::kCollision, -5.0, 1.0, std::nullopt, 3},
                  {1, EpisodeOutcome::kSuccess, 7.25, 0.5, 0.125, 13},
                  {2, EpisodeOutcome::kFreeze, 0.0, 0.05, 1e-9, 13}};
  std::stringstream ss;
  write_training_log(ss, log);
  const TrainingLog back = read_training_log(ss);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].episode, log[i].episode);
    EXPECT_EQ(back[i].outcome, log[i].outcome);
    EXPECT_DOUBLE_EQ(back[i].total_reward, log[i].total_reward);
    EXPECT_EQ(back[i].loss.has_value(), log[i].loss.has_value());
  }
  std::stringstream bad("episode,outcome\n");
  EXPECT_THROW(read_training_log(bad), std::runtime_error);
}

TEST(GreedyEpisode, ReportsEveryStep) {
  const ScenarioConfig sc = ScenarioConfig::defaults(ScenarioKind::kRoundabout);
  auto agent = make_learner<float>(AgentKind::kAttentionDqnSingle, small_config(), sc, 6);
  TrafficEnv env(sc);
  int calls = 0;
  double reward = 0.0;
  const EpisodeSummary s = run_greedy_episode<float>(*agent, env, 11, [&](const ObservationMatrix&, int a, const StepResult& r) {
    ++calls;
    reward += r.reward;
    EXPECT_GE(a, 0);
    EXPECT_LT(a, 5);
  });
  EXPECT_EQ(calls, s.steps);
  EXPECT_DOUBLE_EQ(reward, s.total_reward);
  EXPECT_EQ(s.seed, 11u);
}

}  // namespace
}  // namespace jsafe

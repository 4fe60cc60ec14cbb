#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "jsafe/harness/experiment.hpp"

namespace jsafe {
namespace {

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("jsafe_experiment_" + std::string(info->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  ExperimentConfig config(const std::string& extra = "") const {
    KeyValueConfig kv = KeyValueConfig::parse("episodes = 12\neval_trials = 3\neval_episodes = 4\nlearning_starts = 16\n"
                                              "batch_size = 8\n" + extra);
    kv.set("out", (root_ / "runs").string());
    return ExperimentConfig::from_key_values(kv);
  }

  fs::path train_one(const ExperimentConfig& cfg) const {
    std::ostringstream log;
    const auto results = cmd_train(cfg, log);
    return results.front().directory / "checkpoint.bin";
  }

  fs::path root_;
};

TEST(ExperimentConfig, DefaultsAndOverrides) {
  const ExperimentConfig d = ExperimentConfig::from_key_values({});
  EXPECT_EQ(d.episodes, 5000);
  EXPECT_EQ(d.eval_trials, 20);
  EXPECT_EQ(d.eval_episodes, 100);
  const ExperimentConfig c = ExperimentConfig::from_key_values(
      KeyValueConfig::parse("scenario = roundabout\nagent = ppo\nruns = 3\nseed = 10\ngamma = 0.9"));
  EXPECT_EQ(c.scenario.kind, ScenarioKind::kRoundabout);
  EXPECT_EQ(c.agent, AgentKind::kPpo);
  EXPECT_EQ(c.seeds(), (std::vector<std::uint64_t>{10, 11, 12}));
  EXPECT_EQ(c.learner.gamma, 0.9);
  EXPECT_EQ(ExperimentConfig::from_key_values(KeyValueConfig::parse("scenario = roundabout")).learner.gamma, 0.99);
}

TEST(ExperimentConfig, InvalidValuesAreUsageErrors) {
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("episodes = -3")), UsageError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("runs = 0")), UsageError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("agent = sarsa")), UsageError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("episdoes = 4")), UsageError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("gamma = 1.5")), UsageError);
  EXPECT_THROW(ExperimentConfig::from_key_values(KeyValueConfig::parse("seed = abc")), UsageError);
}

TEST(EvaluationSeed, DisjointFromTrainingSeeds) {
  std::set<std::uint64_t> train, eval;
  for (std::uint64_t i = 0; i < 5000; ++i) train.insert(mix_seed(1, i));
  for (int t = 0; t < 20; ++t)
    for (int e = 0; e < 100; ++e) eval.insert(evaluation_seed(1, t, 100, e));
  EXPECT_EQ(eval.size(), 2000u);
  for (std::uint64_t s : eval) EXPECT_EQ(train.count(s), 0u);
}

TEST_F(ExperimentTest, TrainWritesLogCheckpointAndMeta) {
  const ExperimentConfig cfg = config("runs = 2\nworkers = 2\ncheckpoint_every = 5");
  std::ostringstream out;
  const auto results = cmd_train(cfg, out);
  ASSERT_EQ(results.size(), 2u);
  for (const TrainResult& r : results) {
    EXPECT_TRUE(fs::exists(r.directory / "checkpoint.bin"));
    const auto meta = nlohmann::json::parse(read_text_file(r.directory / "meta.json"));
    EXPECT_EQ(meta["status"], "complete");
    EXPECT_EQ(meta["episodes_completed"], 12);
    std::istringstream is(read_text_file(r.directory / "log.csv"));
    EXPECT_EQ(read_training_log(is).size(), 12u);
    EXPECT_EQ(r.directory.filename(), "run_" + std::to_string(r.seed));
  }
  EXPECT_NE(out.str().find("run_1: 12 episodes"), std::string::npos);
  EXPECT_NE(out.str().find("run_2: 12 episodes"), std::string::npos);
}

TEST_F(ExperimentTest, ParallelRunsMatchSequentialRuns) {
  const ExperimentConfig seq = config("runs = 2\nworkers = 1");
  ExperimentConfig par = seq;
  par.workers = 2;
  par.out = (root_ / "par").string();
  std::ostringstream sink;
  const auto a = cmd_train(seq, sink), b = cmd_train(par, sink);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a[i].log, b[i].log);
    EXPECT_EQ(read_text_file(a[i].directory / "checkpoint.bin"), read_text_file(b[i].directory / "checkpoint.bin"));
  }
}

TEST_F(ExperimentTest, EvalIsReproducibleAndRatesSumToOneHundred) {
  const ExperimentConfig cfg = config();
  const fs::path ck = train_one(cfg);
  const ModelReport r1 = cmd_eval(cfg, ck, root_ / "eval1");
  ExperimentConfig two_workers = cfg;
  two_workers.workers = 2;
  const ModelReport r2 = cmd_eval(two_workers, ck, root_ / "eval2");
  EXPECT_EQ(read_text_file(root_ / "eval1" / "report.json"), read_text_file(root_ / "eval2" / "report.json"));
  EXPECT_EQ(read_text_file(root_ / "eval1" / "trials.csv"), read_text_file(root_ / "eval2" / "trials.csv"));
  EXPECT_EQ(r1.protocol, "3x4");
  EXPECT_EQ(r2.trials.size(), 3u);
  EXPECT_NEAR(r1.aggregate.collision.mean + r1.aggregate.success.mean + r1.aggregate.freezing.mean, 100.0, 1e-9);
  for (const TrialSummary& t : r1.trials) EXPECT_EQ(t.episodes, 4);
  for (const char* f : {"report.csv", "table.csv"}) EXPECT_TRUE(fs::exists(root_ / "eval1" / f));
}

TEST_F(ExperimentTest, EvalRejectsCheckpointFromOtherScenario) {
  const fs::path ck = train_one(config());
  const ExperimentConfig other = config("scenario = roundabout");
  try {
    cmd_eval(other, ck, {});
    FAIL() << "expected a mismatch error";
  } catch (const ExperimentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3 actions"), std::string::npos) << msg;
    EXPECT_NE(msg.find("has 5"), std::string::npos) << msg;
  }
  EXPECT_THROW(cmd_eval(config(), root_ / "missing.bin", {}), ExperimentError);
  write_text_file(root_ / "junk.bin", "not a checkpoint");
  EXPECT_THROW(cmd_eval(config(), root_ / "junk.bin", {}), ExperimentError);
}

TEST_F(ExperimentTest, ReplayAndRerenderGiveIdenticalFrames) {
  const ExperimentConfig cfg = config("agent = attn-dqn-single");
  const fs::path ck = train_one(cfg);
  const EpisodeTrace tr = cmd_replay(cfg, ck, 3, root_ / "replay", true);
  ASSERT_FALSE(tr.steps.empty());
  EXPECT_EQ(cmd_render_trace(root_ / "replay" / "trace.jsonl", root_ / "again"), tr.steps.size());
  for (std::size_t k = 0; k < tr.steps.size(); ++k)
    EXPECT_EQ(read_text_file(root_ / "replay" / "frames" / frame_name(k)), read_text_file(root_ / "again" / frame_name(k)));
  write_text_file(root_ / "bad.jsonl", "{\"schema\":\"jsafe-trace\",\"version\":1}\n{oops\n");
  EXPECT_THROW(cmd_render_trace(root_ / "bad.jsonl", root_ / "bad"), ExperimentError);
}

TEST_F(ExperimentTest, ReportOnEmptyDirectoryFails) {
  fs::create_directories(root_ / "empty");
  EXPECT_THROW(cmd_report(root_ / "empty", {}), ExperimentError);
  EXPECT_THROW(cmd_report(root_ / "nowhere", {}), ExperimentError);
}

TEST_F(ExperimentTest, ReportSingleRunHasNoBand) {
  const ExperimentConfig cfg = config();
  const fs::path ck = train_one(cfg);
  cmd_eval(cfg, ck, root_ / "runs" / "eval");
  const ReportSummary s = cmd_report(root_ / "runs", root_ / "report", 5);
  EXPECT_EQ(s.logs, 1u);
  EXPECT_EQ(s.evaluations, 1u);
  const std::string svg = read_text_file(root_ / "report" / "curves_intersection.svg");
  EXPECT_EQ(svg.find("data-band="), std::string::npos);
  EXPECT_NE(svg.find("data-series="), std::string::npos);
  const std::string table = read_text_file(root_ / "report" / "training_table.csv");
  EXPECT_NE(table.find("intersection,dqn,train-final500x1"), std::string::npos) << table;
  EXPECT_TRUE(fs::exists(root_ / "report" / "eval_table.csv"));
}

TEST_F(ExperimentTest, ReportMultipleRunsDrawBands) {
  std::ostringstream sink;
  cmd_train(config("runs = 3"), sink);
  cmd_report(root_ / "runs", {}, 3);
  const std::string svg = read_text_file(root_ / "runs" / "curves_intersection.svg");
  EXPECT_NE(svg.find("data-band=\"0\""), std::string::npos);
  EXPECT_NE(svg.find("(3 runs, window 3)"), std::string::npos);
}

}  // namespace
}  // namespace jsafe

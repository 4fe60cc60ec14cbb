#include <gtest/gtest.h>

#include <sstream>

#include "jsafe/harness/curves.hpp"
#include "jsafe/metrics/report.hpp"

namespace jsafe {
namespace {

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

ModelReport sample_report() {
  return make_model_report("intersection", "attn-dqn-single", {{100, 50, 40, 3.5}, {100, 60, 30, 2.5}, {100, 61, 30, 2.0}});
}

TEST(ModelReport, ProtocolAndAggregate) {
  const ModelReport r = sample_report();
  EXPECT_EQ(r.protocol, "3x100");
  EXPECT_EQ(r.trials.size(), 3u);
  EXPECT_NEAR(r.aggregate.collision.mean, 57.0, 1e-12);
  EXPECT_EQ(format_mean_std(r.aggregate.collision), "57.00 (6.08)");
}

TEST(ReportCsv, LongFormatWithBlankSpreadForOneTrial) {
  std::ostringstream os;
  write_report_csv(os, {sample_report(), make_model_report("roundabout", "dqn", {{10, 1, 9, 4.0}})});
  const auto l = lines_of(os.str());
  ASSERT_EQ(l.size(), 2u + 8u);
  EXPECT_EQ(l[0], "# jsafe-report v1");
  EXPECT_EQ(l[1], "scenario,model,metric,mean,std,ci95,protocol");
  EXPECT_EQ(l[2].rfind("intersection,attn-dqn-single,collision_rate,57.0000,6.0828,", 0), 0u) << l[2];
  EXPECT_EQ(l[6], "roundabout,dqn,collision_rate,10.0000,,,1x10");
  EXPECT_EQ(l[9], "roundabout,dqn,total_reward,4.0000,,,1x10");
}

TEST(TableCsv, MeanStdCells) {
  std::ostringstream os;
  write_table_csv(os, {sample_report()});
  const auto l = lines_of(os.str());
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[1], "scenario,model,protocol,collision_rate,success_rate,freezing_rate,total_reward");
  EXPECT_EQ(l[2], "intersection,attn-dqn-single,3x100,\"57.00 (6.08)\",\"33.33 (5.77)\",\"9.67 (0.58)\",\"2.67 (0.76)\"");
}

TEST(TrialsCsv, EveryRowSumsToOneHundred) {
  std::ostringstream os;
  write_trials_csv(os, make_model_report("x", "y", {{3, 1, 1, 0.0}, {7, 2, 3, 1.0}, {100, 0, 100, 2.0}}));
  const auto l = lines_of(os.str());
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[2], "0,3,33.33,33.33,33.34,0.0000");
  for (std::size_t i = 2; i < l.size(); ++i) {
    std::vector<std::string> f;
    std::stringstream ss(l[i]);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    const long total = std::lround((std::stod(f[2]) + std::stod(f[3]) + std::stod(f[4])) * 100.0);
    EXPECT_EQ(total, 10000) << l[i];
  }
}

TEST(ReportJson, RoundTrip) {
  const ModelReport r = sample_report();
  const nlohmann::json j = nlohmann::json::parse(to_json(r).dump());
  EXPECT_EQ(j["schema"], "jsafe-report");
  EXPECT_TRUE(j["collision_rate"]["std"].is_number());
  const ModelReport back = model_report_from_json(j);
  EXPECT_EQ(back.protocol, r.protocol);
  EXPECT_EQ(back.aggregate.collision.mean, r.aggregate.collision.mean);
  EXPECT_EQ(*back.aggregate.success.std, *r.aggregate.success.std);
  const nlohmann::json single = to_json(make_model_report("a", "b", {{5, 1, 1, 0.0}}));
  EXPECT_TRUE(single["freezing_rate"]["std"].is_null());
  EXPECT_THROW(model_report_from_json(nlohmann::json{{"schema", "other"}}), std::runtime_error);
}

TrainingLog synthetic_log(std::size_t n, int phase) {
  TrainingLog log;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingRow r;
    r.episode = static_cast<long>(i);
    const int k = static_cast<int>((i + static_cast<std::size_t>(phase)) % 3);
    r.outcome = k == 0 ? EpisodeOutcome::kCollision : (k == 1 ? EpisodeOutcome::kSuccess : EpisodeOutcome::kFreeze);
    r.total_reward = static_cast<double>(i % 7) + phase;
    log.push_back(r);
  }
  return log;
}

TEST(TrainingCurves, FiveRunBandIsNormalHalfWidth) {
  std::vector<TrainingLog> logs;
  for (int p = 0; p < 5; ++p) logs.push_back(synthetic_log(60, p));
  const TrainingCurves c = training_curves(logs, 1);
  ASSERT_EQ(c.length(), 60u);
  ASSERT_EQ(c.total_reward.half_width.size(), 60u);
  for (std::size_t i = 0; i < 60; ++i) {
    std::vector<double> col;
    for (int p = 0; p < 5; ++p) col.push_back(static_cast<double>(i % 7) + p);
    double mean = 0.0, sq = 0.0;
    for (double v : col) mean += v / 5.0;
    for (double v : col) sq += (v - mean) * (v - mean);
    EXPECT_NEAR(c.total_reward.mean[i], mean, 1e-12);
    EXPECT_NEAR(c.total_reward.half_width[i], 1.96 * std::sqrt(sq / 4.0) / std::sqrt(5.0), 1e-12);
    EXPECT_NEAR(c.collision.mean[i] + c.success.mean[i] + c.freezing.mean[i], 100.0, 1e-9);
  }
}

TEST(TrainingCurves, SingleRunHasNoBandAndShortestRunWins) {
  const TrainingCurves one = training_curves({synthetic_log(30, 0)}, 10);
  EXPECT_TRUE(one.collision.half_width.empty());
  EXPECT_EQ(one.runs, 1u);
  const TrainingCurves two = training_curves({synthetic_log(30, 0), synthetic_log(20, 1)}, 10);
  EXPECT_EQ(two.length(), 20u);
  EXPECT_THROW(training_curves({}, 10), std::invalid_argument);
}

TEST(TrainingCurves, SmoothedOutcomeSeries) {
  const TrainingCurves c = training_curves({synthetic_log(9, 0)}, 3);
  // Outcomes cycle collision, success, freeze: every full window holds one of each.
  for (std::size_t i = 2; i < 9; ++i) EXPECT_NEAR(c.collision.mean[i], 100.0 / 3.0, 1e-9);
  EXPECT_EQ(c.collision.mean[0], 100.0);
  EXPECT_EQ(c.collision.mean[1], 50.0);
}

TEST(TailRate, LastEpisodesOnly) {
  const TrainingLog log = synthetic_log(10, 0);  // collisions at 0, 3, 6, 9
  EXPECT_DOUBLE_EQ(tail_rate(log, EpisodeOutcome::kCollision, 4), 50.0);
  EXPECT_DOUBLE_EQ(tail_rate(log, EpisodeOutcome::kCollision, 100), 40.0);
  EXPECT_THROW(tail_rate({}, EpisodeOutcome::kSuccess, 5), std::invalid_argument);
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

TEST(CurvesSvg, PanelsSeriesAndBands) {
  std::vector<TrainingLog> logs;
  for (int p = 0; p < 3; ++p) logs.push_back(synthetic_log(40, p));
  const std::string svg = render_curves_svg(
      {{"dqn", training_curves(logs, 5)}, {"attn-dqn-single", training_curves({synthetic_log(40, 0)}, 5)}}, "intersection");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count(svg, "data-panel="), 4u);
  EXPECT_EQ(count(svg, "data-series="), 8u);
  EXPECT_EQ(count(svg, "data-band=\"0\""), 4u);
  EXPECT_EQ(count(svg, "data-band=\"1\""), 0u);
  EXPECT_NE(svg.find("dqn (3 runs, window 5)"), std::string::npos);
  EXPECT_NE(svg.find("attn-dqn-single (1 run, window 5)"), std::string::npos);
}

}  // namespace
}  // namespace jsafe

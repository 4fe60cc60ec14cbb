#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "jsafe/agents/train.hpp"
#include "jsafe/harness/trace.hpp"

namespace jsafe {
namespace {

EpisodeTrace record(AgentKind kind, ScenarioKind scenario, std::uint64_t seed) {
  const ScenarioConfig sc = ScenarioConfig::defaults(scenario);
  auto agent = make_learner<float>(kind, AgentConfig::defaults(scenario), sc, 3);
  TrafficEnv env(sc);
  return record_episode(*agent, env, seed);
}

TEST(RecordEpisode, TwoHeadsEachADistributionOverObservedSlots) {
  const EpisodeTrace tr = record(AgentKind::kAttentionDqnSingle, ScenarioKind::kIntersection, 4);
  ASSERT_FALSE(tr.steps.empty());
  EXPECT_EQ(tr.header["heads"], 2);
  EXPECT_EQ(tr.header["schema"], "jsafe-trace");
  for (const TraceStep& st : tr.steps) {
    ASSERT_EQ(st.attention.size(), 2u);
    ASSERT_EQ(st.slots.size(), 15u);
    EXPECT_EQ(st.slots[0], 0);
    for (const auto& head : st.attention) {
      double sum = 0.0;
      for (std::size_t j = 0; j < head.size(); ++j) {
        EXPECT_GE(head[j], 0.0);
        if (st.slots[j] < 0) { EXPECT_EQ(head[j], 0.0); }
        sum += head[j];
      }
      EXPECT_NEAR(sum, 1.0, 1e-5);
    }
  }
  EXPECT_FALSE(tr.steps.back().event.empty());
  EXPECT_EQ(tr.header["outcome"], tr.steps.back().event);
}

TEST(RecordEpisode, PosesAreTimeOrderedAndEgoFirstInEachStep) {
  const EpisodeTrace tr = record(AgentKind::kDqn, ScenarioKind::kRoundabout, 5);
  for (std::size_t i = 1; i < tr.poses.size(); ++i) EXPECT_GE(tr.poses[i].t, tr.poses[i - 1].t);
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    EXPECT_EQ(tr.steps[k].vehicles.front().id, 0);
    EXPECT_TRUE(tr.steps[k].attention.empty());
    if (k) { EXPECT_GT(tr.steps[k].t, tr.steps[k - 1].t); }
  }
}

TEST(TraceJsonl, RoundTripRendersIdenticalFrames) {
  const EpisodeTrace tr = record(AgentKind::kAttentionDqnMulti, ScenarioKind::kRoundabout, 6);
  std::ostringstream os;
  write_trace_jsonl(os, tr);
  std::istringstream is(os.str());
  const EpisodeTrace back = read_trace_jsonl(is);
  ASSERT_EQ(back.steps.size(), tr.steps.size());
  EXPECT_EQ(back.poses.size(), tr.poses.size());
  std::ostringstream again;
  write_trace_jsonl(again, back);
  EXPECT_EQ(again.str(), os.str());
  const ScenarioLayout layout = make_roundabout_layout();
  for (std::size_t k = 0; k < tr.steps.size(); ++k) EXPECT_EQ(render_step_svg(back, k, layout), render_step_svg(tr, k, layout));
}

TEST(TraceJsonl, RejectsForeignFiles) {
  std::istringstream empty("");
  EXPECT_THROW(read_trace_jsonl(empty), std::runtime_error);
  std::istringstream other("{\"schema\":\"something\"}\n");
  EXPECT_THROW(read_trace_jsonl(other), std::runtime_error);
}

TEST(StepSvg, AttentionStrokeWidthGrowsWithWeight) {
  const EpisodeTrace tr = record(AgentKind::kAttentionDqnSingle, ScenarioKind::kIntersection, 7);
  const ScenarioLayout layout = make_intersection_layout();
  const std::regex line_re("data-head=\"(\\d+)\" data-slot=\"(\\d+)\" data-weight=\"([0-9.e-]+)\"[^>]*stroke-width=\"([0-9.]+)\"");
  std::size_t lines = 0;
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const std::string svg = render_step_svg(tr, k, layout);
    std::vector<std::pair<double, double>> pairs;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line_re); it != std::sregex_iterator(); ++it) {
      const std::size_t h = std::stoul((*it)[1]), slot = std::stoul((*it)[2]);
      const double w = std::stod((*it)[3]), width = std::stod((*it)[4]);
      EXPECT_NEAR(w, tr.steps[k].attention[h][slot], 1e-6);
      pairs.emplace_back(w, width);
      ++lines;
    }
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i) EXPECT_GE(pairs[i].second, pairs[i - 1].second);
    EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 0, true);
  }
  EXPECT_GT(lines, 0u);
}

TEST(StepSvg, OneFootprintPerVehicle) {
  const EpisodeTrace tr = record(AgentKind::kDqn, ScenarioKind::kIntersection, 8);
  const std::string svg = render_step_svg(tr, 0, make_intersection_layout());
  std::size_t polygons = 0;
  for (auto p = svg.find("data-id="); p != std::string::npos; p = svg.find("data-id=", p + 1)) ++polygons;
  EXPECT_EQ(polygons, tr.steps[0].vehicles.size());
  EXPECT_EQ(svg.find("data-head="), std::string::npos);
  EXPECT_THROW(render_step_svg(tr, tr.steps.size(), make_intersection_layout()), std::out_of_range);
}

}  // namespace
}  // namespace jsafe

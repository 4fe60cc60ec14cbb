#ifndef JSAFE_HARNESS_TRACE_HPP
#define JSAFE_HARNESS_TRACE_HPP

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "jsafe/agents/train.hpp"
#include "jsafe/traffic/env.hpp"

namespace jsafe {

inline constexpr const char* kTraceSchema = "jsafe-trace";
inline constexpr int kTraceVersion = 1;

struct VehicleSnapshot {
  int id = 0;
  double x = 0.0, y = 0.0, heading = 0.0, speed = 0.0;
  double length = 5.0, width = 2.0;
  bool crashed = false;
};

/// One decision: the scene the agent saw, what it did and what followed.
struct TraceStep {
  int step = 0;
  double t = 0.0;
  int action = 0;
  double reward = 0.0;
  std::string event;
  std::vector<VehicleSnapshot> vehicles;  // ego first
  std::vector<int> slots;                 // vehicle id per observation row, -1 when empty
  std::vector<std::vector<double>> attention;  // per head, one weight per observation row
};

struct EpisodeTrace {
  nlohmann::json header = nlohmann::json::object();
  std::vector<TraceStep> steps;
  std::vector<TraceRow> poses;  // every physics sub-step
};

inline VehicleSnapshot snapshot_of(const TrafficVehicle& v) {
  return {v.id, v.state.pose.x, v.state.pose.y, v.state.pose.heading, v.state.speed,
          v.state.length, v.state.width, v.crashed};
}

/// Runs one greedy episode and records it.
template <class S>
EpisodeTrace record_episode(Learner<S>& agent, TrafficEnv& env, std::uint64_t seed) {
  EpisodeTrace tr;
  const ScenarioConfig& cfg = env.config();
  tr.header = {{"schema", kTraceSchema},
               {"version", kTraceVersion},
               {"scenario", to_string(cfg.kind)},
               {"agent", to_string(agent.kind())},
               {"seed", seed},
               {"vehicles", cfg.observed_vehicles}};
  env.set_trace_sink([&](const TraceRow& r) { tr.poses.push_back(r); });
  ObservationMatrix obs = env.reset(seed);
  for (int k = 0;; ++k) {
    TraceStep st;
    st.step = k;
    st.t = env.state().time;
    st.vehicles.push_back(snapshot_of(env.state().ego));
    for (const TrafficVehicle& v : env.state().others)
      if (v.active()) st.vehicles.push_back(snapshot_of(v));
    st.slots.assign(static_cast<std::size_t>(cfg.observed_vehicles), -1);
    st.slots[0] = 0;
    const auto nearest = nearest_vehicles(env.state(), static_cast<std::size_t>(cfg.observed_vehicles - 1));
    for (std::size_t i = 0; i < nearest.size(); ++i) st.slots[i + 1] = env.state().others[nearest[i]].id;

    st.action = agent.greedy_action(obs);
    const Tensor<S> w = agent.decision_network().attention_weights(0);
    for (Eigen::Index h = 0; h < w.rows(); ++h) {
      std::vector<double> row(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j) row[static_cast<std::size_t>(j)] = static_cast<double>(w(h, j));
      st.attention.push_back(std::move(row));
    }
    StepResult r = env.step(st.action);
    st.reward = r.reward;
    if (r.terminated) st.event = to_string(r.outcome);
    tr.steps.push_back(std::move(st));
    if (r.terminated) break;
    obs = std::move(r.observation);
  }
  env.set_trace_sink({});
  tr.header["heads"] = tr.steps.empty() ? 0 : static_cast<int>(tr.steps.front().attention.size());
  tr.header["outcome"] = tr.steps.empty() ? "" : tr.steps.back().event;
  return tr;
}

inline nlohmann::json to_json(const VehicleSnapshot& v) {
  return {{"id", v.id}, {"x", v.x}, {"y", v.y}, {"heading", v.heading}, {"speed", v.speed},
          {"length", v.length}, {"width", v.width}, {"crashed", v.crashed}};
}

inline VehicleSnapshot vehicle_from_json(const nlohmann::json& j) {
  VehicleSnapshot v;
  v.id = j.at("id").get<int>();
  v.x = j.at("x").get<double>();
  v.y = j.at("y").get<double>();
  v.heading = j.at("heading").get<double>();
  v.speed = j.at("speed").get<double>();
  v.length = j.at("length").get<double>();
  v.width = j.at("width").get<double>();
  v.crashed = j.at("crashed").get<bool>();
  return v;
}

/// JSONL: a header line, then "step" records each followed by the
/// sub-step "pose" records produced while executing that step.
inline void write_trace_jsonl(std::ostream& os, const EpisodeTrace& tr) {
  os << tr.header.dump() << '\n';
  std::size_t pose = 0;
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const TraceStep& st = tr.steps[k];
    nlohmann::json j = {{"type", "step"}, {"step", st.step},     {"t", st.t},
                        {"action", st.action}, {"reward", st.reward}, {"event", st.event},
                        {"slots", st.slots}};
    nlohmann::json vs = nlohmann::json::array();
    for (const VehicleSnapshot& v : st.vehicles) vs.push_back(to_json(v));
    j["vehicles"] = std::move(vs);
    if (!st.attention.empty()) j["attention"] = st.attention;
    os << j.dump() << '\n';
    const double next_t = k + 1 < tr.steps.size() ? tr.steps[k + 1].t : 1e300;
    for (; pose < tr.poses.size() && tr.poses[pose].t <= next_t + 1e-9; ++pose) {
      const TraceRow& r = tr.poses[pose];
      nlohmann::json p = {{"type", "pose"},    {"t", r.t},           {"id", r.vehicle_id},
                          {"x", r.x},          {"y", r.y},           {"heading", r.heading},
                          {"speed", r.speed},  {"action", r.ego_action}, {"reward", r.reward},
                          {"event", r.event}};
      os << p.dump() << '\n';
    }
  }
}

inline EpisodeTrace read_trace_jsonl(std::istream& is) {
  EpisodeTrace tr;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace");
  tr.header = nlohmann::json::parse(line);
  if (tr.header.value("schema", "") != kTraceSchema) throw std::runtime_error("not a trace file");
  if (tr.header.value("version", 0) != kTraceVersion) throw std::runtime_error("unsupported trace version");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "step") {
      TraceStep st;
      st.step = j.at("step").get<int>();
      st.t = j.at("t").get<double>();
      st.action = j.at("action").get<int>();
      st.reward = j.at("reward").get<double>();
      st.event = j.at("event").get<std::string>();
      st.slots = j.at("slots").get<std::vector<int>>();
      for (const auto& v : j.at("vehicles")) st.vehicles.push_back(vehicle_from_json(v));
      if (j.contains("attention")) st.attention = j.at("attention").get<std::vector<std::vector<double>>>();
      tr.steps.push_back(std::move(st));
    } else if (type == "pose") {
      TraceRow r;
      r.t = j.at("t").get<double>();
      r.vehicle_id = j.at("id").get<int>();
      r.x = j.at("x").get<double>();
      r.y = j.at("y").get<double>();
      r.heading = j.at("heading").get<double>();
      r.speed = j.at("speed").get<double>();
      r.ego_action = j.at("action").get<int>();
      r.reward = j.at("reward").get<double>();
      r.event = j.at("event").get<std::string>();
      tr.poses.push_back(std::move(r));
    }
  }
  return tr;
}

inline constexpr double kMaxAttentionStroke = 6.0;
inline constexpr const char* kHeadColours[] = {"#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd"};

/// One SVG frame of a decision step: lanes, vehicle footprints and, when the
/// step carries attention, one line per head from the ego to every observed
/// vehicle with stroke width proportional to its weight.
inline std::string render_step_svg(const EpisodeTrace& tr, std::size_t index, const ScenarioLayout& layout) {
  const TraceStep& st = tr.steps.at(index);
  constexpr double kExtent = 110.0;
  std::ostringstream os;
  char buf[256];
  auto fmt = [&](const char* f, auto... args) {
    std::snprintf(buf, sizeof buf, f, args...);
    os << buf;
  };
  fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"660\" height=\"660\" viewBox=\"%.1f %.1f %.1f %.1f\">\n",
      -kExtent, -kExtent, 2 * kExtent, 2 * kExtent);
  os << "<rect x=\"-110\" y=\"-110\" width=\"220\" height=\"220\" fill=\"#f4f4f4\"/>\n";
  // World y points up; SVG y points down.
  os << "<g transform=\"scale(1,-1)\">\n";
  for (const auto& line : lane_polylines(layout.network, 2.0)) {
    os << "<polyline fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"0.4\" points=\"";
    for (std::size_t i = 0; i < line.size(); ++i) fmt(i ? " %.2f,%.2f" : "%.2f,%.2f", line[i].x, line[i].y);
    os << "\"/>\n";
  }
  for (const VehicleSnapshot& v : st.vehicles) {
    const auto c = footprint_corners(Pose{v.x, v.y, v.heading}, v.length, v.width);
    const char* fill = v.id == 0 ? "#2ca02c" : (v.crashed ? "#d62728" : "#555555");
    fmt("<polygon data-id=\"%d\" fill=\"%s\" points=\"%.3f,%.3f %.3f,%.3f %.3f,%.3f %.3f,%.3f\"/>\n", v.id, fill, c[0].x,
        c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y);
  }
  if (!st.attention.empty() && !st.vehicles.empty()) {
    const VehicleSnapshot& ego = st.vehicles.front();
    for (std::size_t h = 0; h < st.attention.size(); ++h) {
      const char* colour = kHeadColours[h % 4];
      for (std::size_t j = 1; j < st.slots.size() && j < st.attention[h].size(); ++j) {
        if (st.slots[j] < 0) continue;
        const VehicleSnapshot* target = nullptr;
        for (const VehicleSnapshot& v : st.vehicles)
          if (v.id == st.slots[j]) target = &v;
        if (!target) continue;
        const double w = st.attention[h][j];
        fmt("<line data-head=\"%zu\" data-slot=\"%zu\" data-weight=\"%.6f\" x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" "
            "y2=\"%.3f\" stroke=\"%s\" stroke-opacity=\"0.7\" stroke-width=\"%.4f\"/>\n",
            h, j, w, ego.x, ego.y, target->x, target->y, colour, kMaxAttentionStroke * w);
      }
    }
  }
  os << "</g>\n";
  fmt("<text x=\"-105\" y=\"-100\" font-size=\"5\" font-family=\"monospace\">t=%.2f s  step %d  action %d  reward %.2f%s%s</text>\n",
      st.t, st.step, st.action, st.reward, st.event.empty() ? "" : "  ", st.event.c_str());
  os << "</svg>\n";
  return os.str();
}

}  // namespace jsafe

#endif  // JSAFE_HARNESS_TRACE_HPP

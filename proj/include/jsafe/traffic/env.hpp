#ifndef JSAFE_TRAFFIC_ENV_HPP
#define JSAFE_TRAFFIC_ENV_HPP

#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsafe/errors.hpp"
#include "jsafe/traffic/behavior.hpp"
#include "jsafe/traffic/observation.hpp"
#include "jsafe/traffic/rewards.hpp"
#include "jsafe/traffic/scenario.hpp"
#include "jsafe/traffic/types.hpp"

namespace jsafe {

struct StepResult {
  ObservationMatrix observation;
  double reward = 0.0;
  bool terminated = false;
  Outcome outcome = Outcome::kNone;
  TransitionEvents events;
};

/// One row per vehicle per physics sub-step.
struct TraceRow {
  double t = 0.0;
  int vehicle_id = 0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  int ego_action = -1;
  double reward = 0.0;
  std::string event;
};

using TraceSink = std::function<void(const TraceRow&)>;

/// A junction MDP: single-owner state machine over EnvState.
class TrafficEnv {
 public:
  explicit TrafficEnv(ScenarioConfig config)
      : config_(std::move(config)), layout_(make_layout(config_.kind)) {
    config_.validate();
    bicycle_.v_max = config_.v_max;
  }

  const ScenarioConfig& config() const { return config_; }
  const ScenarioLayout& layout() const { return layout_; }
  const EnvState& state() const { return state_; }
  int action_count() const { return jsafe::action_count(config_.kind); }
  const BicycleParams& bicycle_params() const { return bicycle_; }

  void set_trace_sink(TraceSink sink) { sink_ = std::move(sink); }

  /// Starts an episode from `seed`; identical seeds give identical states.
  ObservationMatrix reset(std::uint64_t seed) {
    state_ = EnvState{};
    state_.rng.seed(seed);
    place_ego();
    spawn_traffic();
    return observe();
  }

  ObservationMatrix reset() { return reset(config_.seed); }

  ObservationMatrix observe() const {
    return build_observation(state_, config_.observed_vehicles, {config_.position_range, config_.velocity_range});
  }

  /// Distance the ego still has to cover to reach the junction entry.
  double ego_distance_to_junction() const {
    return layout_.distance_to_junction(state_.ego.route_index, state_.ego.state.longitudinal);
  }

  StepResult step(int action) {
    if (state_.terminal) throw ContractViolation("step() called on a terminated episode");
    if (action < 0 || action >= action_count())
      throw std::invalid_argument("action " + std::to_string(action) + " outside the scenario action set");

    TransitionEvents events;
    events.lane_changed = apply_ego_action(action);
    std::vector<TraceRow> rows;

    for (int k = 0; k < config_.substeps_per_decision && !state_.terminal; ++k) {
      physics_substep(events);
      if (sink_) record(rows, action);
      if (events.collision) {
        state_.terminal = true;
        state_.outcome = Outcome::kCollision;
      } else if (events.success) {
        state_.terminal = true;
        state_.outcome = Outcome::kSuccess;
      }
    }
    if (!state_.terminal && state_.time >= config_.max_episode_seconds - 1e-9) {
      state_.terminal = true;
      state_.outcome = Outcome::kTimeout;
    }
    events.at_max_speed = std::abs(state_.ego.state.speed - config_.v_max) <= 1e-6;

    StepResult out;
    out.events = events;
    out.reward = scenario_reward(config_.kind, events);
    out.terminated = state_.terminal;
    out.outcome = state_.outcome;
    out.observation = observe();
    if (sink_) {
      if (out.outcome != Outcome::kNone) {
        for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
          if (it->vehicle_id == 0) {
            it->event = to_string(out.outcome);
            break;
          }
        }
      }
      for (TraceRow& r : rows) {
        r.reward = out.reward;
        sink_(r);
      }
    }
    return out;
  }

 private:
  double target_speed(int index) const { return std::min(config_.v_max, index * config_.speed_step); }
  int top_speed_index() const { return static_cast<int>(std::ceil(config_.v_max / config_.speed_step - 1e-9)); }

  void place_ego() {
    TrafficVehicle& ego = state_.ego;
    ego.id = 0;
    ego.route = layout_.ego_route;
    ego.route_index = 0;
    const Lane& lane = layout_.network.lane(ego.route.front());
    ego.state.lane = lane.id;
    ego.state.longitudinal = layout_.ego_start_longitudinal;
    ego.state.pose = lane.pose_at(ego.state.longitudinal);
    ego.state.speed = config_.ego_start_speed;
    state_.ego_speed_index = static_cast<int>(std::lround(config_.ego_start_speed / config_.speed_step));
    state_.ego_speed_index = std::clamp(state_.ego_speed_index, 0, top_speed_index());
    ego.target_speed = target_speed(state_.ego_speed_index);
  }

  double stop_distance(double speed) const {
    return speed * speed / (2.0 * std::abs(bicycle_.a_min)) + config_.min_spawn_gap;
  }

  bool yields_at_end(const Lane& lane) const {
    for (int next : lane.successors)
      if (layout_.network.lane(next).priority > lane.priority) return true;
    return false;
  }

  bool spawn_clear(const Pose& p) const {
    const double g2 = config_.min_spawn_gap * config_.min_spawn_gap;
    auto far = [&](const TrafficVehicle& v) {
      const double dx = v.state.pose.x - p.x, dy = v.state.pose.y - p.y;
      return dx * dx + dy * dy >= g2;
    };
    if (!far(state_.ego)) return false;
    for (const auto& v : state_.others)
      if (!far(v)) return false;
    return true;
  }

  void spawn_traffic() {
    std::mt19937_64& rng = state_.rng;
    const auto& sites = layout_.spawn_sites;
    std::uniform_int_distribution<std::size_t> pick_site(0, sites.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int next_id = 1;
    for (int n = 0; n < config_.spawn_count; ++n) {
      bool placed = false;
      for (int attempt = 0; attempt < config_.spawn_retries && !placed; ++attempt) {
        const SpawnSite& site = sites[pick_site(rng)];
        double hi = site.max_longitudinal;
        if (site.lane == layout_.ego_route.front()) hi = layout_.ego_start_longitudinal - config_.min_spawn_gap;
        if (hi <= site.min_longitudinal) continue;
        const double s = site.min_longitudinal + unit(rng) * (hi - site.min_longitudinal);
        const int sub_lane = site.max_sub_lane > 0 ? static_cast<int>(unit(rng) * (site.max_sub_lane + 1)) : 0;
        const std::size_t route_pick = static_cast<std::size_t>(unit(rng) * static_cast<double>(site.routes.size()));
        const double speed =
            config_.spawn_speed_min + unit(rng) * (config_.spawn_speed_max - config_.spawn_speed_min);
        const Lane& lane = layout_.network.lane(site.lane);
        if (s > lane.length - stop_distance(speed) && yields_at_end(lane)) continue;
        const int sl = std::min(sub_lane, site.max_sub_lane);
        const Pose pose = lane.pose_at(s, sl * lane.lane_width);
        if (!spawn_clear(pose)) continue;
        TrafficVehicle v;
        v.id = next_id++;
        v.route = site.routes[std::min(route_pick, site.routes.size() - 1)];
        v.route_index = 0;
        v.sub_lane = sl;
        v.target_speed = speed;
        v.state.pose = pose;
        v.state.speed = speed;
        v.state.lane = site.lane;
        v.state.longitudinal = s;
        state_.others.push_back(std::move(v));
        placed = true;
      }
      if (!placed) ++state_.spawn_shortfall;
    }
    if (state_.spawn_shortfall > 0)
      std::clog << "warning: spawned " << state_.others.size() << " of " << config_.spawn_count
                << " vehicles (no free slot after " << config_.spawn_retries << " retries)\n";
  }

  // Returns true iff the action actually moved the ego to another sub-lane.
  bool apply_ego_action(int action) {
    int& idx = state_.ego_speed_index;
    bool changed = false;
    if (config_.kind == ScenarioKind::kIntersection) {
      if (action == intersection_action::kSlower) idx = std::max(0, idx - 1);
      if (action == intersection_action::kFaster) idx = std::min(top_speed_index(), idx + 1);
    } else {
      const Lane& lane = layout_.network.lane(state_.ego.state.lane);
      if (action == roundabout_action::kSlower) idx = std::max(0, idx - 1);
      if (action == roundabout_action::kFaster) idx = std::min(top_speed_index(), idx + 1);
      if (action == roundabout_action::kLaneLeft && state_.ego.sub_lane + 1 < lane.lane_count) {
        ++state_.ego.sub_lane;
        changed = true;
      }
      if (action == roundabout_action::kLaneRight && state_.ego.sub_lane > 0) {
        --state_.ego.sub_lane;
        changed = true;
      }
    }
    state_.ego.target_speed = target_speed(idx);
    return changed;
  }

  // Re-projects a moved vehicle onto its route, advancing through lanes.
  void advance_on_route(TrafficVehicle& v) {
    const RoadNetwork& net = layout_.network;
    for (int guard = 0; guard < 8; ++guard) {
      const Lane& lane = net.lane(v.route[v.route_index]);
      const LaneCoordinates c = lane.project(v.state.pose.position());
      v.state.longitudinal = c.longitudinal;
      if (!(c.out_of_extent && c.longitudinal >= lane.length)) return;
      if (v.route_index + 1 >= v.route.size()) {
        if (v.id != 0) v.finished = true;
        return;
      }
      ++v.route_index;
      v.state.lane = v.route[v.route_index];
      v.sub_lane = std::min(v.sub_lane, net.lane(v.state.lane).lane_count - 1);
    }
  }

  void physics_substep(TransitionEvents& events) {
    const RoadNetwork& net = layout_.network;
    std::vector<const TrafficVehicle*> vehicles;
    vehicles.reserve(state_.others.size() + 1);
    vehicles.push_back(&state_.ego);
    for (const auto& v : state_.others) vehicles.push_back(&v);

    std::vector<Prediction> predictions;
    predictions.reserve(vehicles.size());
    for (const TrafficVehicle* v : vehicles)
      predictions.push_back(v->active() ? predict_vehicle(*v, net, config_) : Prediction{});

    std::vector<BicycleCommand> commands(vehicles.size());
    {
      const TrafficVehicle& ego = state_.ego;
      const Lane& lane = net.lane(ego.state.lane);
      const double dt = config_.physics_dt;
      commands[0].acceleration = std::clamp((ego.target_speed - ego.state.speed) / dt, bicycle_.a_min, bicycle_.a_max);
      commands[0].steering = lane_tracking_steering(ego.state, lane, lane_frame(ego.state.pose, lane),
                                                    ego.sub_lane * lane.lane_width, bicycle_);
    }
    for (std::size_t i = 1; i < vehicles.size(); ++i) {
      if (!vehicles[i]->active() || vehicles[i]->crashed) continue;
      commands[i] = surrounding_policy(net, i, vehicles, predictions, bicycle_).command;
    }

    auto move = [&](TrafficVehicle& v, const BicycleCommand& c) {
      if (!v.active() || v.crashed) return;
      v.state = step_bicycle(v.state, c, config_.physics_dt, bicycle_);
      advance_on_route(v);
    };
    move(state_.ego, commands[0]);
    for (std::size_t i = 0; i < state_.others.size(); ++i) move(state_.others[i], commands[i + 1]);

    ++state_.sim_steps;
    state_.time = state_.sim_steps * config_.physics_dt;

    for (TrafficVehicle& o : state_.others) {
      if (!o.active()) continue;
      if (footprints_collide(state_.ego.state, o.state)) {
        events.collision = true;
        o.crashed = true;
        o.state.speed = 0.0;
      }
    }
    for (std::size_t i = 0; i < state_.others.size(); ++i) {
      TrafficVehicle& a = state_.others[i];
      if (!a.active()) continue;
      for (std::size_t j = i + 1; j < state_.others.size(); ++j) {
        TrafficVehicle& b = state_.others[j];
        if (!b.active() || (a.crashed && b.crashed)) continue;
        if (footprints_collide(a.state, b.state)) {
          a.crashed = b.crashed = true;
          a.state.speed = b.state.speed = 0.0;
        }
      }
    }
    const TrafficVehicle& ego = state_.ego;
    if (!events.collision && ego.state.lane == layout_.goal_lane &&
        ego.state.longitudinal >= layout_.goal_longitudinal)
      events.success = true;
  }

  void record(std::vector<TraceRow>& rows, int action) const {
    auto row = [&](const TrafficVehicle& v) {
      TraceRow r;
      r.t = state_.time;
      r.vehicle_id = v.id;
      r.x = v.state.pose.x;
      r.y = v.state.pose.y;
      r.heading = v.state.pose.heading;
      r.speed = v.state.speed;
      r.ego_action = action;
      if (v.crashed) r.event = "crashed";
      rows.push_back(std::move(r));
    };
    row(state_.ego);
    for (const auto& o : state_.others)
      if (o.active()) row(o);
  }

  ScenarioConfig config_;
  ScenarioLayout layout_;
  BicycleParams bicycle_;
  EnvState state_;
  TraceSink sink_;
};

}  // namespace jsafe

#endif  // JSAFE_TRAFFIC_ENV_HPP

#ifndef JSAFE_TRAFFIC_TYPES_HPP
#define JSAFE_TRAFFIC_TYPES_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsafe/config.hpp"
#include "jsafe/dynamics.hpp"
#include "jsafe/traffic/scenario.hpp"

namespace jsafe {

inline constexpr int kFeatureCount = 7;

enum class Outcome { kNone, kCollision, kSuccess, kTimeout };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kNone: return "none";
    case Outcome::kCollision: return "collision";
    case Outcome::kSuccess: return "success";
    case Outcome::kTimeout: return "timeout";
  }
  return "none";
}

namespace intersection_action {
inline constexpr int kSlower = 0;
inline constexpr int kIdle = 1;
inline constexpr int kFaster = 2;
inline constexpr int kCount = 3;
}  // namespace intersection_action

namespace roundabout_action {
inline constexpr int kLaneLeft = 0;
inline constexpr int kLaneRight = 1;
inline constexpr int kIdle = 2;
inline constexpr int kFaster = 3;
inline constexpr int kSlower = 4;
inline constexpr int kCount = 5;
}  // namespace roundabout_action

inline int action_count(ScenarioKind kind) {
  return kind == ScenarioKind::kIntersection ? intersection_action::kCount : roundabout_action::kCount;
}

inline std::string action_name(ScenarioKind kind, int a) {
  if (kind == ScenarioKind::kIntersection) {
    static const char* n[] = {"slower", "no-operation", "faster"};
    return (a >= 0 && a < 3) ? n[a] : "invalid";
  }
  static const char* n[] = {"lane_left", "lane_right", "idle", "faster", "slower"};
  return (a >= 0 && a < 5) ? n[a] : "invalid";
}

/// Episode parameters for one junction scenario. Times in seconds, speeds in
/// m/s, distances in metres.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kIntersection;
  double max_episode_seconds = 13.0;
  int spawn_count = 10;
  double spawn_speed_min = 6.0;
  double spawn_speed_max = 10.0;
  std::uint64_t seed = 0;
  int observed_vehicles = 15;
  double v_max = 10.0;
  double speed_step = 5.0;
  double ego_start_speed = 10.0;
  double physics_dt = 1.0 / 15.0;
  int substeps_per_decision = 15;
  double prediction_horizon = 3.0;
  double prediction_dt = 0.25;
  double min_spawn_gap = 10.0;
  int spawn_retries = 50;
  double position_range = 100.0;
  double velocity_range = 20.0;

  double decision_seconds() const { return physics_dt * substeps_per_decision; }

  static ScenarioConfig defaults(ScenarioKind kind) {
    ScenarioConfig c;
    c.kind = kind;
    if (kind == ScenarioKind::kRoundabout) {
      c.spawn_count = 8;
      c.spawn_speed_min = 8.0;
      c.spawn_speed_max = 16.0;
      c.v_max = 20.0;
      c.ego_start_speed = 20.0;
    }
    return c;
  }

  /// Reads the documented keys; anything absent keeps the scenario default.
  static ScenarioConfig from_key_values(const KeyValueConfig& kv) {
    ScenarioConfig c = defaults(parse_scenario(kv.get_string("kind", kv.get_string("scenario", "intersection"))));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    c.spawn_count = static_cast<int>(kv.get_int("spawn_count", c.spawn_count));
    c.spawn_speed_min = kv.get_double("spawn_speed_min", c.spawn_speed_min);
    c.spawn_speed_max = kv.get_double("spawn_speed_max", c.spawn_speed_max);
    c.v_max = kv.get_double("v_max", c.v_max);
    c.speed_step = kv.get_double("speed_step", c.speed_step);
    c.ego_start_speed = kv.get_double("ego_start_speed", std::min(c.ego_start_speed, c.v_max));
    c.observed_vehicles = static_cast<int>(kv.get_int("V", kv.get_int("observed_vehicles", c.observed_vehicles)));
    c.max_episode_seconds = kv.get_double("max_episode_seconds", c.max_episode_seconds);
    c.physics_dt = kv.get_double("physics_dt", c.physics_dt);
    c.substeps_per_decision = static_cast<int>(kv.get_int("substeps_per_decision", c.substeps_per_decision));
    c.prediction_horizon = kv.get_double("prediction_horizon", c.prediction_horizon);
    c.validate();
    return c;
  }

  void validate() const {
    if (spawn_count < 0) throw std::invalid_argument("spawn_count must be >= 0");
    if (observed_vehicles < 1) throw std::invalid_argument("observed vehicle limit V must be >= 1");
    if (!(max_episode_seconds > 0.0)) throw std::invalid_argument("max_episode_seconds must be positive");
    if (!(physics_dt > 0.0) || substeps_per_decision < 1) throw std::invalid_argument("bad time step settings");
    if (!(v_max > 0.0) || !(speed_step > 0.0)) throw std::invalid_argument("v_max and speed_step must be positive");
    if (spawn_speed_min < 0.0 || spawn_speed_max < spawn_speed_min || spawn_speed_max > v_max)
      throw std::invalid_argument("spawn speed range must lie inside [0, v_max]");
    if (ego_start_speed < 0.0 || ego_start_speed > v_max) throw std::invalid_argument("ego start speed out of range");
  }
};

/// One vehicle in the simulation together with its route plan.
struct TrafficVehicle {
  int id = 0;
  VehicleState state;
  std::vector<int> route;
  std::size_t route_index = 0;
  int sub_lane = 0;
  double target_speed = 0.0;
  bool crashed = false;
  bool finished = false;

  bool active() const { return !finished; }
  std::span<const int> remaining_route() const {
    return std::span<const int>(route).subspan(route_index);
  }
  bool operator==(const TrafficVehicle&) const = default;
};

struct EnvState {
  int sim_steps = 0;
  double time = 0.0;
  TrafficVehicle ego;
  int ego_speed_index = 0;
  std::vector<TrafficVehicle> others;
  std::mt19937_64 rng;
  bool terminal = false;
  Outcome outcome = Outcome::kNone;
  int spawn_shortfall = 0;

  bool operator==(const EnvState&) const = default;
};

/// Events that occurred during one decision interval; the reward functions
/// consume these.
struct TransitionEvents {
  bool collision = false;
  bool success = false;
  bool at_max_speed = false;
  bool lane_changed = false;
};

}  // namespace jsafe

#endif  // JSAFE_TRAFFIC_TYPES_HPP

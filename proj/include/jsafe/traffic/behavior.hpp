#ifndef JSAFE_TRAFFIC_BEHAVIOR_HPP
#define JSAFE_TRAFFIC_BEHAVIOR_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "jsafe/dynamics.hpp"
#include "jsafe/traffic/types.hpp"

namespace jsafe {

/// Gains for the scripted traffic. The tracking controller is a linear
/// curvature law in arc length with critical damping over `tracking_length`.
struct BehaviorParams {
  double tracking_length = 5.0;
  double speed_gain = 1.0;        // 1/s
  double gap_gain = 0.6;          // 1/s^2
  double closing_gain = 1.0;      // 1/s
  double standstill_gap = 5.0;    // m
  double time_headway = 1.2;      // s
  double leader_lookahead = 60.0; // m
};

/// Steering that brings the vehicle onto the sub-lane at `target_lateral`
/// and holds it there.
inline double lane_tracking_steering(const VehicleState& s, const Lane& lane, const LaneCoordinates& coords,
                                     double target_lateral, const BicycleParams& bp, const BehaviorParams& p = {}) {
  const double e = coords.lateral - target_lateral;
  const double eh = normalize_angle(s.pose.heading - lane.heading_at(coords.longitudinal));
  double kappa_ff = 0.0;
  if (lane.shape == LaneShape::kArc) kappa_ff = lane.curvature / (1.0 - lane.curvature * coords.lateral);
  const double l = p.tracking_length;
  const double lateral_term = std::clamp(e / (l * l), -0.2, 0.2);
  const double kappa = kappa_ff - lateral_term - 2.0 * eh / l;
  return std::atan(bp.wheelbase * kappa);
}

/// Distance along `self`'s remaining route to `other`, if `other` is on it
/// (same sub-lane) within `lookahead` metres. Centre to centre.
inline std::optional<double> distance_ahead_on_route(const RoadNetwork& net, const TrafficVehicle& self,
                                                     const TrafficVehicle& other, double lookahead) {
  double cum = -self.state.longitudinal;
  for (std::size_t i = self.route_index; i < self.route.size(); ++i) {
    const int lane = self.route[i];
    if (lane == other.state.lane) {
      const bool same_sub_lane = net.lane(lane).lane_count == 1 || other.sub_lane == self.sub_lane;
      const double d = cum + other.state.longitudinal;
      if (same_sub_lane && d > 0.0 && d <= lookahead) return d;
      if (d > 0.0) return std::nullopt;
    }
    cum += net.lane(lane).length;
    if (cum > lookahead) break;
  }
  return std::nullopt;
}

struct LeaderInfo {
  bool found = false;
  double gap = std::numeric_limits<double>::infinity();
  double speed = 0.0;
};

inline LeaderInfo find_leader(const RoadNetwork& net, const TrafficVehicle& self,
                              std::span<const TrafficVehicle* const> vehicles, const BehaviorParams& p = {}) {
  LeaderInfo out;
  for (const TrafficVehicle* o : vehicles) {
    if (o == &self || !o->active()) continue;
    const auto d = distance_ahead_on_route(net, self, *o, p.leader_lookahead);
    if (!d) continue;
    const double gap = *d - 0.5 * (self.state.length + o->state.length);
    if (gap < out.gap) {
      out.found = true;
      out.gap = gap;
      out.speed = o->state.speed;
    }
  }
  return out;
}

/// True iff `a` keeps going when its predicted path conflicts with `b`'s.
/// Higher lane priority wins; a crashed vehicle cannot move and always
/// wins; on equal priority the vehicle ahead (along the other's route, else
/// geometrically) wins, then the ego, then the lower id.
inline bool has_right_of_way(const RoadNetwork& net, const TrafficVehicle& a, const TrafficVehicle& b) {
  if (a.crashed != b.crashed) return a.crashed;
  const Vec2 ab = b.state.pose.position() - a.state.pose.position();
  const bool b_in_front_of_a = ab.dot(a.state.pose.forward()) > 0.0;
  const bool a_in_front_of_b = ab.dot(b.state.pose.forward()) < 0.0;
  const bool merging = std::cos(a.state.pose.heading - b.state.pose.heading) > std::cos(kPi / 4);
  if (merging && a_in_front_of_b != b_in_front_of_a) return a_in_front_of_b;
  const int pa = net.lane(a.state.lane).priority;
  const int pb = net.lane(b.state.lane).priority;
  if (pa != pb) return pa > pb;
  constexpr double kFar = 1e9;
  // On a loop each vehicle can be ahead on the other's route; the smaller
  // lead counts.
  const auto a_leads = distance_ahead_on_route(net, b, a, kFar);
  const auto b_leads = distance_ahead_on_route(net, a, b, kFar);
  if (a_leads && b_leads) return *a_leads < *b_leads || (*a_leads == *b_leads && a.id < b.id);
  if (a_leads) return true;
  if (b_leads) return false;
  if (a.state.lane != b.state.lane && a.state.longitudinal != b.state.longitudinal)
    return a.state.longitudinal > b.state.longitudinal;
  if (a_in_front_of_b && !b_in_front_of_a) return true;
  if (b_in_front_of_a && !a_in_front_of_b) return false;
  if (a.id == 0) return true;
  if (b.id == 0) return false;
  return a.id < b.id;
}

/// Whether two predicted trajectories overlap at any shared time index.
inline bool predictions_conflict(const Prediction& a, const VehicleState& sa, const Prediction& b,
                                 const VehicleState& sb) {
  const std::size_t n = std::min(a.poses.size(), b.poses.size());
  for (std::size_t k = 0; k < n; ++k)
    if (rectangles_overlap(a.poses[k], sa.length, sa.width, b.poses[k], sb.length, sb.width)) return true;
  return false;
}

/// Conservative variant for the yielding side: `a` at step k conflicts with
/// `b` anywhere between its current pose and its predicted pose at step k,
/// which covers `b` slowing down.
inline bool lagged_conflict(const Prediction& a, const VehicleState& sa, const Prediction& b,
                            const VehicleState& sb) {
  const std::size_t n = std::min(a.poses.size(), b.poses.size());
  const double reach = 0.5 * std::hypot(sa.length, sa.width) + 0.5 * std::hypot(sb.length, sb.width);
  const double reach2 = reach * reach;
  auto overlap = [&](const Pose& pa, const Pose& pb) {
    const double dx = pa.x - pb.x, dy = pa.y - pb.y;
    if (dx * dx + dy * dy > reach2) return false;
    return rectangles_overlap(pa, sa.length, sa.width, pb, sb.length, sb.width);
  };
  for (std::size_t k = 0; k < n; ++k) {
    if (overlap(a.poses[k], sb.pose)) return true;
    for (std::size_t j = 0; j <= k; ++j)
      if (overlap(a.poses[k], b.poses[j])) return true;
  }
  return false;
}

/// Below this speed a vehicle is treated as an obstacle that will not clear
/// by itself.
inline constexpr double kStationarySpeed = 1.0;

/// Whether the predicted path of `a` runs into `b` where it stands now.
inline bool path_blocked(const Prediction& a, const VehicleState& sa, const VehicleState& sb) {
  for (const Pose& p : a.poses)
    if (rectangles_overlap(p, sa.length, sa.width, sb.pose, sb.length, sb.width)) return true;
  return false;
}

inline Prediction predict_vehicle(const TrafficVehicle& v, const RoadNetwork& net, const ScenarioConfig& cfg) {
  if (v.crashed) {
    Prediction p;
    const int steps = static_cast<int>(std::ceil(cfg.prediction_horizon / cfg.prediction_dt - 1e-9));
    p.poses.assign(static_cast<std::size_t>(steps), v.state.pose);
    return p;
  }
  return predict_positions(v.state, net, v.remaining_route(), cfg.prediction_horizon, cfg.prediction_dt);
}

/// Does `self` have to give way to anybody given everyone's predictions?
/// `vehicles[i]` pairs with `predictions[i]`.
inline bool must_yield(const RoadNetwork& net, std::size_t self_index, std::span<const TrafficVehicle* const> vehicles,
                       std::span<const Prediction> predictions) {
  const TrafficVehicle& self = *vehicles[self_index];
  for (std::size_t j = 0; j < vehicles.size(); ++j) {
    if (j == self_index || !vehicles[j]->active()) continue;
    const TrafficVehicle& other = *vehicles[j];
    if (has_right_of_way(net, self, other)) {
      if (other.state.speed < kStationarySpeed && path_blocked(predictions[self_index], self.state, other.state))
        return true;
      continue;
    }
    if (lagged_conflict(predictions[self_index], self.state, predictions[j], other.state)) return true;
  }
  return false;
}

struct PolicyDecision {
  BicycleCommand command;
  bool yielding = false;
};

/// Scripted driver: speed tracking with leader-gap braking, overridden by a
/// full brake while a higher-priority conflict is predicted.
inline PolicyDecision surrounding_policy(const RoadNetwork& net, std::size_t self_index,
                                         std::span<const TrafficVehicle* const> vehicles,
                                         std::span<const Prediction> predictions, const BicycleParams& bp,
                                         const BehaviorParams& p = {}) {
  const TrafficVehicle& self = *vehicles[self_index];
  PolicyDecision out;
  const Lane& lane = net.lane(self.state.lane);
  const LaneCoordinates coords = lane_frame(self.state.pose, lane);
  out.command.steering = lane_tracking_steering(self.state, lane, coords, self.sub_lane * lane.lane_width, bp, p);

  double accel = p.speed_gain * (self.target_speed - self.state.speed);
  const LeaderInfo leader = find_leader(net, self, vehicles, p);
  if (leader.found) {
    const double desired = p.standstill_gap + p.time_headway * self.state.speed;
    accel = std::min(accel, p.gap_gain * (leader.gap - desired) + p.closing_gain * (leader.speed - self.state.speed));
  }
  out.yielding = must_yield(net, self_index, vehicles, predictions);
  if (out.yielding) accel = bp.a_min;
  out.command.acceleration = std::clamp(accel, bp.a_min, bp.a_max);
  return out;
}

}  // namespace jsafe

#endif  // JSAFE_TRAFFIC_BEHAVIOR_HPP

#ifndef JSAFE_TRAFFIC_SCENARIO_HPP
#define JSAFE_TRAFFIC_SCENARIO_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsafe/geometry.hpp"

namespace jsafe {

enum class ScenarioKind { kIntersection, kRoundabout };

inline std::string to_string(ScenarioKind k) { return k == ScenarioKind::kIntersection ? "intersection" : "roundabout"; }

inline ScenarioKind parse_scenario(const std::string& s) {
  if (s == "intersection") return ScenarioKind::kIntersection;
  if (s == "roundabout") return ScenarioKind::kRoundabout;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

/// Where surrounding vehicles may appear, and the routes they may follow
/// from there. `max_longitudinal` limits spawns on the ego's own approach to
/// the stretch behind the ego.
struct SpawnSite {
  int lane = -1;
  double min_longitudinal = 0.0;
  double max_longitudinal = 0.0;
  int max_sub_lane = 0;
  std::vector<std::vector<int>> routes;
};

/// Static description of one junction: road network, ego task and spawn
/// sites. Distances are metres.
struct ScenarioLayout {
  ScenarioKind kind = ScenarioKind::kIntersection;
  RoadNetwork network;
  std::vector<int> ego_route;
  double ego_start_longitudinal = 0.0;
  int junction_entry_lane = -1;  // the ego enters the junction where this lane begins
  int goal_lane = -1;
  double goal_longitudinal = 0.0;
  std::vector<SpawnSite> spawn_sites;

  /// Distance the ego must still travel along its route to reach the
  /// junction entry, given its position on route lane `route_index`.
  double distance_to_junction(std::size_t route_index, double longitudinal) const {
    double d = -longitudinal;
    for (std::size_t i = route_index; i < ego_route.size(); ++i) {
      if (ego_route[i] == junction_entry_lane) return d;
      d += network.lane(ego_route[i]).length;
    }
    return -1.0;
  }
};

namespace detail {

inline Pose rotate_pose(const Pose& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y, normalize_angle(p.heading + angle)};
}

inline Lane make_straight(std::string name, Pose start, double length, int priority) {
  Lane l;
  l.name = std::move(name);
  l.shape = LaneShape::kStraight;
  l.start = start;
  l.length = length;
  l.priority = priority;
  return l;
}

inline Lane make_arc(std::string name, Pose start, double curvature, double sweep, int priority) {
  Lane l;
  l.name = std::move(name);
  l.shape = LaneShape::kArc;
  l.start = start;
  l.curvature = curvature;
  l.length = std::abs(sweep / curvature);
  l.priority = priority;
  return l;
}

inline const char* arm_name(int k) {
  static const char* names[] = {"south", "east", "north", "west"};
  return names[k & 3];
}

}  // namespace detail

inline constexpr double kLaneWidth = 4.0;

/// Four-way crossing of two two-lane roads, right-hand traffic. Arm k is the
/// south arm rotated by k quarter turns (south, east, north, west). The
/// east-west road has priority over the north-south road; a vehicle already
/// inside the junction outranks any vehicle still approaching it. The ego
/// approaches from the south and turns left to the west.
inline ScenarioLayout make_intersection_layout(double approach_length = 90.0, double distance_to_junction = 60.0,
                                               double goal_distance = 25.0) {
  constexpr double kHalfBox = 10.0;
  constexpr double kOffset = 0.5 * kLaneWidth;
  ScenarioLayout lay;
  lay.kind = ScenarioKind::kIntersection;
  RoadNetwork& net = lay.network;

  int incoming[4], outgoing[4], straight[4], left[4], right[4];
  for (int k = 0; k < 4; ++k) {
    const double rot = k * kPi / 2.0;
    const bool horizontal = (k % 2) == 1;
    const int approach_rank = horizontal ? 2 : 1;
    const int connector_rank = 3;
    const Pose in_start = detail::rotate_pose({kOffset, -kHalfBox - approach_length, kPi / 2}, rot);
    incoming[k] = net.add_lane(detail::make_straight(std::string(detail::arm_name(k)) + "_in", in_start,
                                                     approach_length, approach_rank));
    const Pose out_start = detail::rotate_pose({-kOffset, -kHalfBox, -kPi / 2}, rot);
    outgoing[k] = net.add_lane(
        detail::make_straight(std::string(detail::arm_name(k)) + "_out", out_start, approach_length, 5));
    const Pose entry = detail::rotate_pose({kOffset, -kHalfBox, kPi / 2}, rot);
    straight[k] = net.add_lane(
        detail::make_straight(std::string(detail::arm_name(k)) + "_straight", entry, 2.0 * kHalfBox, connector_rank));
    left[k] = net.add_lane(detail::make_arc(std::string(detail::arm_name(k)) + "_left", entry,
                                            1.0 / (kHalfBox + kOffset), kPi / 2, connector_rank));
    right[k] = net.add_lane(detail::make_arc(std::string(detail::arm_name(k)) + "_right", entry,
                                             -1.0 / (kHalfBox - kOffset), -kPi / 2, connector_rank));
  }
  for (int k = 0; k < 4; ++k) {
    net.connect(incoming[k], straight[k]);
    net.connect(incoming[k], left[k]);
    net.connect(incoming[k], right[k]);
    net.connect(straight[k], outgoing[(k + 2) % 4]);
    net.connect(left[k], outgoing[(k + 3) % 4]);
    net.connect(right[k], outgoing[(k + 1) % 4]);
  }
  net.validate();

  lay.ego_route = {incoming[0], left[0], outgoing[3]};
  lay.ego_start_longitudinal = approach_length - distance_to_junction;
  lay.junction_entry_lane = left[0];
  lay.goal_lane = outgoing[3];
  lay.goal_longitudinal = goal_distance;

  for (int k = 0; k < 4; ++k) {
    SpawnSite site;
    site.lane = incoming[k];
    site.min_longitudinal = 0.0;
    site.max_longitudinal = approach_length;
    site.routes = {{incoming[k], straight[k], outgoing[(k + 2) % 4]},
                   {incoming[k], left[k], outgoing[(k + 3) % 4]},
                   {incoming[k], right[k], outgoing[(k + 1) % 4]}};
    lay.spawn_sites.push_back(std::move(site));
  }
  return lay;
}

/// Two-lane roundabout with four entries. Ring traffic circulates
/// counter-clockwise on an outer reference lane of radius `ring_radius` and an
/// inner sub-lane; entries and exits join the outer lane through tangent
/// arcs. Vehicles in the ring have priority. The ego approaches from the
/// south and takes the second exit (north).
inline ScenarioLayout make_roundabout_layout(double ego_approach_length = 150.0, double approach_length = 80.0,
                                             double distance_to_junction = 125.0, double goal_distance = 10.0,
                                             double ring_radius = 16.0, double link_radius = 10.0) {
  constexpr double kOffset = 0.5 * kLaneWidth;
  ScenarioLayout lay;
  lay.kind = ScenarioKind::kRoundabout;
  RoadNetwork& net = lay.network;

  // Entry arc geometry in the south frame: a right-hand arc tangent to the
  // approach line x = kOffset and externally tangent to the ring.
  const double cx = kOffset + link_radius;
  const double cy = -std::sqrt((ring_radius + link_radius) * (ring_radius + link_radius) - cx * cx);
  const double link_turn = kPi - std::atan2(-cy, -cx);
  const double entry_angle = std::atan2(cy, cx);   // ring node where the entry merges
  const double exit_angle = -kPi - entry_angle;    // ring node where the south exit leaves

  // Ring nodes, counter-clockwise from the south exit.
  std::vector<double> nodes;
  for (int k = 0; k < 4; ++k) {
    nodes.push_back(exit_angle + k * kPi / 2);
    nodes.push_back(entry_angle + k * kPi / 2);
  }
  int ring[8];
  for (int i = 0; i < 8; ++i) {
    const double a0 = nodes[static_cast<std::size_t>(i)];
    const double a1 = nodes[static_cast<std::size_t>((i + 1) % 8)] + (i == 7 ? 2 * kPi : 0.0);
    Lane l = detail::make_arc("ring_" + std::to_string(i),
                              {ring_radius * std::cos(a0), ring_radius * std::sin(a0), normalize_angle(a0 + kPi / 2)},
                              1.0 / ring_radius, a1 - a0, 3);
    l.lane_count = 2;
    ring[i] = net.add_lane(std::move(l));
  }
  for (int i = 0; i < 8; ++i) net.connect(ring[i], ring[(i + 1) % 8]);

  int incoming[4], entry[4], exit_arc[4], outgoing[4];
  for (int k = 0; k < 4; ++k) {
    const double rot = k * kPi / 2.0;
    const double len = k == 0 ? ego_approach_length : approach_length;
    incoming[k] = net.add_lane(detail::make_straight(std::string(detail::arm_name(k)) + "_in",
                                                     detail::rotate_pose({kOffset, cy - len, kPi / 2}, rot), len, 0));
    entry[k] = net.add_lane(detail::make_arc(std::string(detail::arm_name(k)) + "_entry",
                                             detail::rotate_pose({kOffset, cy, kPi / 2}, rot), -1.0 / link_radius,
                                             -link_turn, 1));
    const Pose exit_start{ring_radius * std::cos(exit_angle), ring_radius * std::sin(exit_angle),
                          normalize_angle(exit_angle + kPi / 2)};
    exit_arc[k] = net.add_lane(detail::make_arc(std::string(detail::arm_name(k)) + "_exit",
                                                detail::rotate_pose(exit_start, rot), -1.0 / link_radius, -link_turn, 3));
    outgoing[k] = net.add_lane(detail::make_straight(std::string(detail::arm_name(k)) + "_out",
                                                     detail::rotate_pose({-kOffset, cy, -kPi / 2}, rot),
                                                     approach_length, 3));
    net.connect(incoming[k], entry[k]);
    net.connect(entry[k], ring[2 * k + 1]);
    net.connect(ring[(2 * k + 7) % 8], exit_arc[k]);
    net.connect(exit_arc[k], outgoing[k]);
  }
  net.validate();

  // Ring segment i ends at node i+1; the exit for arm k leaves at node 2k.
  auto ring_path = [&](int first_segment, int exit_arm) {
    std::vector<int> path;
    int seg = first_segment;
    for (int guard = 0; guard < 9; ++guard) {
      path.push_back(ring[seg]);
      if ((seg + 1) % 8 == 2 * exit_arm) break;
      seg = (seg + 1) % 8;
    }
    path.push_back(exit_arc[exit_arm]);
    path.push_back(outgoing[exit_arm]);
    return path;
  };

  lay.ego_route = {incoming[0], entry[0]};
  for (int lane : ring_path(1, 2)) lay.ego_route.push_back(lane);
  lay.ego_start_longitudinal = ego_approach_length - distance_to_junction;
  lay.junction_entry_lane = entry[0];
  lay.goal_lane = outgoing[2];
  lay.goal_longitudinal = goal_distance;

  for (int k = 0; k < 4; ++k) {
    SpawnSite site;
    site.lane = incoming[k];
    site.min_longitudinal = 0.0;
    site.max_longitudinal = k == 0 ? ego_approach_length : approach_length;
    for (int j = 1; j < 4; ++j) {
      std::vector<int> route = {incoming[k], entry[k]};
      for (int lane : ring_path(2 * k + 1, (k + j) % 4)) route.push_back(lane);
      site.routes.push_back(std::move(route));
    }
    lay.spawn_sites.push_back(std::move(site));
  }
  for (int i = 0; i < 8; ++i) {
    SpawnSite site;
    site.lane = ring[i];
    site.min_longitudinal = 0.0;
    site.max_longitudinal = net.lane(ring[i]).length;
    site.max_sub_lane = 1;
    for (int arm = 0; arm < 4; ++arm) site.routes.push_back(ring_path(i, arm));
    lay.spawn_sites.push_back(std::move(site));
  }
  return lay;
}

inline ScenarioLayout make_layout(ScenarioKind kind) {
  return kind == ScenarioKind::kIntersection ? make_intersection_layout() : make_roundabout_layout();
}

}  // namespace jsafe

#endif  // JSAFE_TRAFFIC_SCENARIO_HPP

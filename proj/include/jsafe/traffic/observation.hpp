#ifndef JSAFE_TRAFFIC_OBSERVATION_HPP
#define JSAFE_TRAFFIC_OBSERVATION_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "jsafe/traffic/types.hpp"

namespace jsafe {

/// V x 7 feature array, one row per vehicle: (p, x, y, vx, vy, cos_h, sin_h).
/// Row 0 is the ego in world coordinates; the other rows are expressed in
/// the ego frame (x forward, y left) relative to the ego.
using ObservationMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureCount, Eigen::RowMajor>;

namespace feature {
inline constexpr int kPresence = 0;
inline constexpr int kX = 1;
inline constexpr int kY = 2;
inline constexpr int kVx = 3;
inline constexpr int kVy = 4;
inline constexpr int kCosH = 5;
inline constexpr int kSinH = 6;
}  // namespace feature

struct ObservationRanges {
  double position = 100.0;
  double velocity = 20.0;
};

/// Indices into `others` of the `count` nearest active vehicles to the ego,
/// nearest first (ties by id).
inline std::vector<std::size_t> nearest_vehicles(const EnvState& st, std::size_t count) {
  std::vector<std::pair<double, std::size_t>> order;
  const Vec2 ego = st.ego.state.pose.position();
  for (std::size_t i = 0; i < st.others.size(); ++i) {
    if (!st.others[i].active()) continue;
    order.emplace_back((st.others[i].state.pose.position() - ego).norm(), i);
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return st.others[a.second].id < st.others[b.second].id;
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < order.size() && k < count; ++k) out.push_back(order[k].second);
  return out;
}

inline ObservationMatrix build_observation(const EnvState& st, int observed_vehicles,
                                           const ObservationRanges& ranges = {}) {
  ObservationMatrix obs = ObservationMatrix::Zero(observed_vehicles, kFeatureCount);
  auto clip = [](double v) { return std::clamp(v, -1.0, 1.0); };
  const VehicleState& ego = st.ego.state;
  const Vec2 ego_v = ego.velocity();
  obs.row(0) << 1.0, clip(ego.pose.x / ranges.position), clip(ego.pose.y / ranges.position),
      clip(ego_v.x / ranges.velocity), clip(ego_v.y / ranges.velocity), std::cos(ego.pose.heading),
      std::sin(ego.pose.heading);

  const Vec2 fwd = ego.pose.forward();
  const Vec2 left = ego.pose.left();
  const auto nearest = nearest_vehicles(st, static_cast<std::size_t>(observed_vehicles - 1));
  int row = 1;
  for (std::size_t idx : nearest) {
    const VehicleState& o = st.others[idx].state;
    const Vec2 rel = o.pose.position() - ego.pose.position();
    const Vec2 rel_v = o.velocity() - ego_v;
    const double rel_h = o.pose.heading - ego.pose.heading;
    obs.row(row) << 1.0, clip(rel.dot(fwd) / ranges.position), clip(rel.dot(left) / ranges.position),
        clip(rel_v.dot(fwd) / ranges.velocity), clip(rel_v.dot(left) / ranges.velocity), std::cos(rel_h),
        std::sin(rel_h);
    ++row;
  }
  return obs;
}

}  // namespace jsafe

#endif  // JSAFE_TRAFFIC_OBSERVATION_HPP

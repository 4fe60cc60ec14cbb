#ifndef JSAFE_DYNAMICS_HPP
#define JSAFE_DYNAMICS_HPP

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "jsafe/geometry.hpp"

namespace jsafe {

class InvalidStateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pose, speed and footprint of one vehicle. `lane` and `longitudinal`
/// locate it on the road network; the pose is the footprint centre.
struct VehicleState {
  Pose pose;
  double speed = 0.0;
  double length = 5.0;
  double width = 2.0;
  int lane = -1;
  double longitudinal = 0.0;

  Vec2 velocity() const { return pose.forward() * speed; }
  bool operator==(const VehicleState&) const = default;
};

struct BicycleCommand {
  double acceleration = 0.0;
  double steering = 0.0;
};

struct BicycleParams {
  double wheelbase = 2.5;
  double v_max = 10.0;
  double a_min = -5.0;
  double a_max = 5.0;
  double steering_max = kPi / 4.0;

  BicycleCommand clamp(BicycleCommand c) const {
    return {std::clamp(c.acceleration, a_min, a_max), std::clamp(c.steering, -steering_max, steering_max)};
  }
};

namespace detail {

// Distance covered in dt by a speed ramp v0 + a t that saturates at [0, v_max].
inline double clamped_ramp_distance(double v0, double a, double dt, double v_max) {
  if (a == 0.0) return v0 * dt;
  const double bound = a > 0.0 ? v_max : 0.0;
  const double t_hit = (bound - v0) / a;
  if (t_hit >= dt || t_hit < 0.0) {
    if (t_hit < 0.0) return bound * dt;
    return v0 * dt + 0.5 * a * dt * dt;
  }
  return v0 * t_hit + 0.5 * a * t_hit * t_hit + bound * (dt - t_hit);
}

}  // namespace detail

/// Advances one vehicle by dt under the kinematic bicycle model. The
/// steering angle and acceleration are held constant over the interval, so
/// the path is a circle of curvature tan(steering) / wheelbase and the update
/// below is the exact solution of the ODE.
inline VehicleState step_bicycle(const VehicleState& state, BicycleCommand cmd, double dt,
                                 const BicycleParams& params = {}) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidStateError("step_bicycle: dt must be positive");
  if (!std::isfinite(state.pose.x) || !std::isfinite(state.pose.y) || !std::isfinite(state.pose.heading) ||
      !std::isfinite(state.speed) || !std::isfinite(cmd.acceleration) || !std::isfinite(cmd.steering))
    throw InvalidStateError("step_bicycle: non-finite input");
  cmd = params.clamp(cmd);

  VehicleState next = state;
  const double v0 = std::clamp(state.speed, 0.0, params.v_max);
  const double distance = detail::clamped_ramp_distance(v0, cmd.acceleration, dt, params.v_max);
  next.speed = std::clamp(v0 + cmd.acceleration * dt, 0.0, params.v_max);

  const double kappa = std::tan(cmd.steering) / params.wheelbase;
  const double h0 = state.pose.heading;
  const double dh = kappa * distance;
  // Chord of the arc: |chord| = distance * sinc(dh / 2), direction h0 + dh / 2.
  const double half = 0.5 * dh;
  const double sinc = std::abs(half) < 1e-6 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
  next.pose.x = state.pose.x + distance * sinc * std::cos(h0 + half);
  next.pose.y = state.pose.y + distance * sinc * std::sin(h0 + half);
  next.pose.heading = normalize_angle(h0 + dh);
  return next;
}

struct Prediction {
  std::vector<Pose> poses;
  bool off_network = false;
};

/// Constant-speed, lane-following projection along `route` (which starts
/// with the vehicle's current lane). Returns poses at dt, 2dt, ... up to the
/// horizon. Travel beyond the end of the route continues straight.
inline Prediction predict_positions(const VehicleState& state, const RoadNetwork& net, std::span<const int> route,
                                    double horizon, double dt) {
  Prediction out;
  if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("predict_positions: horizon and dt must be positive");
  if (!net.contains(state.lane) || route.empty() || route.front() != state.lane) {
    out.off_network = true;
    return out;
  }
  const int steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  out.poses.reserve(static_cast<std::size_t>(steps));
  const double lateral = lane_frame(state.pose, net.lane(state.lane)).lateral;

  std::size_t idx = 0;
  double offset = 0.0;  // distance from the vehicle's lane start to route[idx] start
  for (int k = 1; k <= steps; ++k) {
    double s = state.longitudinal + state.speed * dt * k - offset;
    while (s > net.lane(route[idx]).length && idx + 1 < route.size()) {
      const double len = net.lane(route[idx]).length;
      offset += len;
      s -= len;
      ++idx;
    }
    const Lane& lane = net.lane(route[idx]);
    if (s <= lane.length) {
      out.poses.push_back(lane.pose_at(s, lateral));
    } else {
      const Pose end = lane.pose_at(lane.length, lateral);
      const double extra = s - lane.length;
      out.poses.push_back({end.x + extra * std::cos(end.heading), end.y + extra * std::sin(end.heading), end.heading});
    }
  }
  return out;
}

/// Corners of the footprint rectangle, counter-clockwise from front-left.
inline std::array<Vec2, 4> footprint_corners(const Pose& pose, double length, double width) {
  const Vec2 c = pose.position();
  const Vec2 f = pose.forward() * (0.5 * length);
  const Vec2 l = pose.left() * (0.5 * width);
  return {c + f + l, c - f + l, c - f - l, c + f - l};
}

/// Separating-axis test for two oriented rectangles.
inline bool rectangles_overlap(const Pose& a, double a_len, double a_wid, const Pose& b, double b_len, double b_wid) {
  const double ra = 0.5 * std::hypot(a_len, a_wid);
  const double rb = 0.5 * std::hypot(b_len, b_wid);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  if (dx * dx + dy * dy > (ra + rb) * (ra + rb)) return false;

  const auto ca = footprint_corners(a, a_len, a_wid);
  const auto cb = footprint_corners(b, b_len, b_wid);
  const std::array<Vec2, 4> axes = {a.forward(), a.left(), b.forward(), b.left()};
  for (const Vec2& axis : axes) {
    double amin = ca[0].dot(axis), amax = amin;
    double bmin = cb[0].dot(axis), bmax = bmin;
    for (int i = 1; i < 4; ++i) {
      const double pa = ca[static_cast<std::size_t>(i)].dot(axis);
      const double pb = cb[static_cast<std::size_t>(i)].dot(axis);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

inline bool footprints_collide(const VehicleState& a, const VehicleState& b) {
  return rectangles_overlap(a.pose, a.length, a.width, b.pose, b.length, b.width);
}

}  // namespace jsafe

#endif  // JSAFE_DYNAMICS_HPP

#ifndef JSAFE_GEOMETRY_HPP
#define JSAFE_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jsafe {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

/// Planar pose; heading is counter-clockwise from +x.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 left() const { return {-std::sin(heading), std::cos(heading)}; }
};

inline bool operator==(const Pose& a, const Pose& b) {
  return a.x == b.x && a.y == b.y && a.heading == b.heading;
}

enum class LaneShape { kStraight, kArc };

/// Coordinates of a point in a lane's reference frame. Lateral is positive
/// to the left of the driving direction.
struct LaneCoordinates {
  double longitudinal = 0.0;
  double lateral = 0.0;
  bool out_of_extent = false;
};

/// One lane curve: a straight segment or a circular arc. A lane may carry
/// several parallel sub-lanes; sub-lane k sits k * lane_width to the left of
/// the reference curve.
struct Lane {
  int id = 0;
  std::string name;
  LaneShape shape = LaneShape::kStraight;
  Pose start;
  double length = 0.0;
  double curvature = 0.0;  // signed 1/radius, positive turns left
  int lane_count = 1;
  double lane_width = 4.0;
  int priority = 0;
  std::vector<int> successors;

  double radius() const { return 1.0 / std::abs(curvature); }

  double heading_at(double s) const {
    if (shape == LaneShape::kStraight) return start.heading;
    return normalize_angle(start.heading + curvature * s);
  }

  Vec2 arc_center() const {
    return start.position() + start.left() * (1.0 / curvature);
  }

  Pose pose_at(double s, double lateral = 0.0) const {
    Pose p;
    if (shape == LaneShape::kStraight) {
      const Vec2 c = start.position() + start.forward() * s + start.left() * lateral;
      p = {c.x, c.y, start.heading};
    } else {
      const double h = start.heading + curvature * s;
      const double inv = 1.0 / curvature;
      p.x = start.x + (std::sin(h) - std::sin(start.heading)) * inv;
      p.y = start.y - (std::cos(h) - std::cos(start.heading)) * inv;
      p.heading = normalize_angle(h);
      p.x -= std::sin(h) * lateral;
      p.y += std::cos(h) * lateral;
    }
    return p;
  }

  Pose end_pose() const { return pose_at(length); }

  /// Projects a point onto the lane curve. Positions beyond either end are
  /// clamped to the extent and flagged.
  LaneCoordinates project(Vec2 point) const {
    LaneCoordinates out;
    double s = 0.0;
    if (shape == LaneShape::kStraight) {
      const Vec2 rel = point - start.position();
      s = rel.dot(start.forward());
      out.lateral = rel.dot(start.left());
    } else {
      const Vec2 c = arc_center();
      const Vec2 rel = point - c;
      const double r = rel.norm();
      const double sweep = curvature * length;
      const double start_angle = std::atan2(start.y - c.y, start.x - c.x);
      const double mid_angle = start_angle + 0.5 * sweep;
      const double d = normalize_angle(std::atan2(rel.y, rel.x) - mid_angle);
      s = 0.5 * length + d / curvature;
      out.lateral = curvature > 0.0 ? radius() - r : r - radius();
    }
    if (s < 0.0) {
      s = 0.0;
      out.out_of_extent = true;
    } else if (s > length) {
      s = length;
      out.out_of_extent = true;
    }
    out.longitudinal = s;
    return out;
  }
};

/// Lane-based road network. Lane ids equal their index in `lanes`.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  explicit RoadNetwork(std::vector<Lane> lanes) : lanes_(std::move(lanes)) { validate(); }

  int add_lane(Lane lane) {
    lane.id = static_cast<int>(lanes_.size());
    lanes_.push_back(std::move(lane));
    return lanes_.back().id;
  }

  void connect(int from, int to) { lanes_.at(static_cast<std::size_t>(from)).successors.push_back(to); }

  bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < lanes_.size(); }
  const Lane& lane(int id) const { return lanes_.at(static_cast<std::size_t>(id)); }
  std::span<const Lane> lanes() const { return lanes_; }
  std::size_t size() const { return lanes_.size(); }

  void validate() const {
    for (std::size_t i = 0; i < lanes_.size(); ++i) {
      const Lane& l = lanes_[i];
      if (l.id != static_cast<int>(i)) throw std::invalid_argument("lane id does not match index");
      if (!(l.length > 0.0)) throw std::invalid_argument("lane " + l.name + " has non-positive length");
      if (l.shape == LaneShape::kArc && !(std::abs(l.curvature) > 0.0 && std::isfinite(l.curvature)))
        throw std::invalid_argument("arc lane " + l.name + " needs a finite positive radius");
      if (l.lane_count < 1) throw std::invalid_argument("lane " + l.name + " has no sub-lanes");
      for (int s : l.successors)
        if (!contains(s)) throw std::invalid_argument("lane " + l.name + " has a dangling successor");
    }
  }

 private:
  std::vector<Lane> lanes_;
};

inline LaneCoordinates lane_frame(const Pose& pose, const Lane& lane) { return lane.project(pose.position()); }

/// Samples every lane's reference curve (and extra sub-lanes) as polylines.
inline std::vector<std::vector<Vec2>> lane_polylines(const RoadNetwork& net, double spacing = 1.0) {
  std::vector<std::vector<Vec2>> out;
  for (const Lane& l : net.lanes()) {
    for (int k = 0; k < l.lane_count; ++k) {
      std::vector<Vec2> line;
      const int n = std::max(1, static_cast<int>(std::ceil(l.length / spacing)));
      for (int i = 0; i <= n; ++i) {
        const Pose p = l.pose_at(l.length * i / n, k * l.lane_width);
        line.push_back(p.position());
      }
      out.push_back(std::move(line));
    }
  }
  return out;
}

}  // namespace jsafe

#endif  // JSAFE_GEOMETRY_HPP

#ifndef JSAFE_TRAFFIC_REWARDS_HPP
#define JSAFE_TRAFFIC_REWARDS_HPP

#include <span>

#include "jsafe/traffic/types.hpp"

namespace jsafe {

inline constexpr double kIntersectionCollisionReward = -5.0;
inline constexpr double kIntersectionProgressReward = 1.0;

inline constexpr double kRoundaboutSpeedReward = 0.5;
inline constexpr double kRoundaboutCollisionReward = -1.0;
inline constexpr double kRoundaboutLaneChangeReward = -0.05;
inline constexpr double kRoundaboutSuccessReward = 1.0;

/// -5 on collision, otherwise 1 when at maximum speed or arriving, else 0.
inline double reward_intersection(const TransitionEvents& e) {
  if (e.collision) return kIntersectionCollisionReward;
  if (e.at_max_speed || e.success) return kIntersectionProgressReward;
  return 0.0;
}

/// Additive: speed bonus, collision penalty, lane-change cost, success bonus.
inline double reward_roundabout(const TransitionEvents& e) {
  double r = 0.0;
  if (e.at_max_speed) r += kRoundaboutSpeedReward;
  if (e.collision) r += kRoundaboutCollisionReward;
  if (e.lane_changed) r += kRoundaboutLaneChangeReward;
  if (e.success) r += kRoundaboutSuccessReward;
  return r;
}

inline double scenario_reward(ScenarioKind kind, const TransitionEvents& e) {
  return kind == ScenarioKind::kIntersection ? reward_intersection(e) : reward_roundabout(e);
}

enum class EpisodeOutcome { kCollision, kSuccess, kFreeze };

inline std::string to_string(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::kCollision: return "collision";
    case EpisodeOutcome::kSuccess: return "success";
    case EpisodeOutcome::kFreeze: return "freeze";
  }
  return "freeze";
}

inline EpisodeOutcome parse_episode_outcome(const std::string& s) {
  if (s == "collision") return EpisodeOutcome::kCollision;
  if (s == "success") return EpisodeOutcome::kSuccess;
  if (s == "freeze") return EpisodeOutcome::kFreeze;
  throw std::invalid_argument("unknown outcome '" + s + "'");
}

/// Per-decision outcomes of a finished episode, in order. A collision
/// anywhere dominates; success counts only within the time budget;
/// everything else (timeout without either) is a freeze.
inline EpisodeOutcome classify_outcome(std::span<const Outcome> trace, std::span<const double> times = {},
                                       double max_episode_seconds = 13.0) {
  bool success = false;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace[i] == Outcome::kCollision) return EpisodeOutcome::kCollision;
    if (trace[i] == Outcome::kSuccess && (times.empty() || times[i] <= max_episode_seconds + 1e-9)) success = true;
  }
  return success ? EpisodeOutcome::kSuccess : EpisodeOutcome::kFreeze;
}

inline EpisodeOutcome classify_outcome(Outcome terminal) {
  const Outcome one[] = {terminal};
  return classify_outcome(std::span<const Outcome>(one));
}

}  // namespace jsafe

#endif  // JSAFE_TRAFFIC_REWARDS_HPP

#ifndef JSAFE_AGENTS_EXPLORATION_HPP
#define JSAFE_AGENTS_EXPLORATION_HPP

#include <algorithm>
#include <random>
#include <span>

#include "jsafe/errors.hpp"

namespace jsafe {

/// Index of the largest value; the lowest index wins ties.
template <class T>
int argmax(std::span<const T> values) {
  if (values.empty()) throw ContractViolation("argmax of an empty action set");
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

/// Epsilon-greedy: uniform random action with probability epsilon, else argmax.
template <class T>
int select_action(std::span<const T> qvalues, double epsilon, std::mt19937_64& rng) {
  if (qvalues.empty()) throw ContractViolation("select_action on an empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("epsilon must lie in [0, 1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (epsilon > 0.0 && unit(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(qvalues.size()) - 1);
    return pick(rng);
  }
  return argmax(qvalues);
}

/// Linear decay from `start` to `end` over the first `fraction` of the
/// episodes, then constant.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double fraction = 0.5;

  double at(long episode, long total_episodes) const {
    const double horizon = fraction * static_cast<double>(total_episodes);
    if (horizon <= 0.0) return end;
    const double t = std::clamp(static_cast<double>(episode) / horizon, 0.0, 1.0);
    if (t >= 1.0) return end;
    return start + (end - start) * t;
  }
};

}  // namespace jsafe

#endif  // JSAFE_AGENTS_EXPLORATION_HPP

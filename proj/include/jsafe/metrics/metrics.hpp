#ifndef JSAFE_METRICS_METRICS_HPP
#define JSAFE_METRICS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsafe/traffic/rewards.hpp"

namespace jsafe {

struct EpisodeRecord {
  EpisodeOutcome outcome = EpisodeOutcome::kFreeze;
  double total_reward = 0.0;
  int length = 0;
  std::uint64_t seed = 0;
  bool operator==(const EpisodeRecord&) const = default;
};

/// Rates in hundredths of a percent. Freezing is the residual, so the three
/// always add up to 10000.
struct BasisPoints {
  long collision = 0;
  long success = 0;
  long freezing = 0;
};

/// Freezing as 100% minus collision and success, all in basis points.
inline BasisPoints residual_freezing(long collision_bp, long success_bp) {
  if (collision_bp < 0 || success_bp < 0 || collision_bp + success_bp > 10000)
    throw std::invalid_argument("collision + success must lie within [0, 100]%");
  return {collision_bp, success_bp, 10000 - collision_bp - success_bp};
}

inline long to_basis_points(double percent) { return std::lround(percent * 100.0); }

/// Outcome counts of one block of evaluation episodes.
struct TrialSummary {
  long episodes = 0;
  long collisions = 0;
  long successes = 0;
  double mean_total_reward = 0.0;

  long freezes() const { return episodes - collisions - successes; }
  double collision_rate() const { return 100.0 * static_cast<double>(collisions) / static_cast<double>(episodes); }
  double success_rate() const { return 100.0 * static_cast<double>(successes) / static_cast<double>(episodes); }
  double freezing_rate() const { return 100.0 * static_cast<double>(freezes()) / static_cast<double>(episodes); }

  BasisPoints basis_points() const {
    const auto bp = [&](long count) {
      return (20000 * count + episodes) / (2 * episodes);  // round half up of 10000*count/episodes
    };
    return residual_freezing(bp(collisions), bp(successes));
  }
};

inline TrialSummary compute_rates(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw std::invalid_argument("compute_rates needs at least one episode");
  TrialSummary t;
  t.episodes = static_cast<long>(records.size());
  double reward = 0.0;
  for (const EpisodeRecord& r : records) {
    t.collisions += r.outcome == EpisodeOutcome::kCollision;
    t.successes += r.outcome == EpisodeOutcome::kSuccess;
    reward += r.total_reward;
  }
  t.mean_total_reward = reward / static_cast<double>(records.size());
  return t;
}

struct MetricAggregate {
  double mean = 0.0;
  std::optional<double> std;   // sample standard deviation, absent for one value
  std::optional<double> ci95;  // 1.96 * std / sqrt(n)
  std::size_t count = 0;
};

/// Sample mean, sample standard deviation (n - 1) and normal-approximation
/// 95% half-width. Summation runs in input order.
inline MetricAggregate aggregate_values(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate needs at least one value");
  MetricAggregate a;
  a.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  a.mean = std::clamp(sum / static_cast<double>(values.size()), *lo, *hi);
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) sq += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    a.ci95 = 1.96 * *a.std / std::sqrt(static_cast<double>(values.size()));
  }
  return a;
}

struct AggregateReport {
  MetricAggregate collision;
  MetricAggregate success;
  MetricAggregate freezing;
  MetricAggregate total_reward;
  std::size_t trials = 0;
};

inline AggregateReport aggregate(std::span<const TrialSummary> trials) {
  if (trials.empty()) throw std::invalid_argument("aggregate needs at least one trial");
  std::vector<double> c, s, f, r;
  for (const TrialSummary& t : trials) {
    c.push_back(t.collision_rate());
    s.push_back(t.success_rate());
    f.push_back(t.freezing_rate());
    r.push_back(t.mean_total_reward);
  }
  AggregateReport out;
  out.collision = aggregate_values(c);
  out.success = aggregate_values(s);
  out.freezing = aggregate_values(f);
  out.total_reward = aggregate_values(r);
  out.trials = trials.size();
  return out;
}

/// Trailing moving average; element i averages the last min(i+1, window)
/// values.
inline std::vector<double> smooth_curve(std::span<const double> series, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smoothing window must be at least 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += series[j];
    out[i] = s / static_cast<double>(i + 1 - lo);
  }
  return out;
}

/// "mean (std)" with two decimals; "mean" alone without a std.
inline std::string format_mean_std(double mean, std::optional<double> std) {
  char buf[64];
  if (std)
    std::snprintf(buf, sizeof buf, "%.2f (%.2f)", mean, *std);
  else
    std::snprintf(buf, sizeof buf, "%.2f", mean);
  return buf;
}

inline std::string format_mean_std(const MetricAggregate& a) { return format_mean_std(a.mean, a.std); }

}  // namespace jsafe

#endif  // JSAFE_METRICS_METRICS_HPP

#ifndef JSAFE_HARNESS_CURVES_HPP
#define JSAFE_HARNESS_CURVES_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsafe/agents/train.hpp"
#include "jsafe/metrics/metrics.hpp"

namespace jsafe {

/// Parses the CSV written by write_training_log.
inline TrainingLog read_training_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrainingLogHeader) throw std::runtime_error("not a training log");
  TrainingLog log;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 5) throw std::runtime_error("malformed training log row: " + line);
    TrainingRow r;
    r.episode = std::stol(f[0]);
    r.outcome = parse_episode_outcome(f[1]);
    r.total_reward = std::stod(f[2]);
    r.epsilon = std::stod(f[3]);
    if (!f[4].empty()) r.loss = std::stod(f[4]);
    log.push_back(r);
  }
  return log;
}

/// Pointwise mean over runs and, for two or more runs, the 95% half-width.
struct CurveBand {
  std::vector<double> mean;
  std::vector<double> half_width;  // empty for a single run
};

struct TrainingCurves {
  CurveBand collision, success, freezing, total_reward;
  std::size_t runs = 0;
  std::size_t window = 1;
  std::size_t length() const { return collision.mean.size(); }
};

/// Averages equally long per-run series point by point.
inline CurveBand band_over_runs(const std::vector<std::vector<double>>& runs) {
  CurveBand b;
  if (runs.empty()) return b;
  const std::size_t n = runs.front().size();
  b.mean.resize(n);
  if (runs.size() >= 2) b.half_width.resize(n);
  std::vector<double> column(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < runs.size(); ++r) column[r] = runs[r].at(i);
    const MetricAggregate a = aggregate_values(column);
    b.mean[i] = a.mean;
    if (a.ci95) b.half_width[i] = *a.ci95;
  }
  return b;
}

/// Smoothed training curves; outcome series are percentages. Runs are
/// truncated to the shortest log.
inline TrainingCurves training_curves(const std::vector<TrainingLog>& logs, std::size_t window) {
  if (logs.empty()) throw std::invalid_argument("training_curves needs at least one log");
  std::size_t n = logs.front().size();
  for (const TrainingLog& l : logs) n = std::min(n, l.size());
  std::vector<std::vector<double>> c, s, f, r;
  for (const TrainingLog& l : logs) {
    std::vector<double> ci(n), si(n), fi(n), ri(n);
    for (std::size_t i = 0; i < n; ++i) {
      ci[i] = 100.0 * (l[i].outcome == EpisodeOutcome::kCollision);
      si[i] = 100.0 * (l[i].outcome == EpisodeOutcome::kSuccess);
      fi[i] = 100.0 * (l[i].outcome == EpisodeOutcome::kFreeze);
      ri[i] = l[i].total_reward;
    }
    c.push_back(smooth_curve(ci, window));
    s.push_back(smooth_curve(si, window));
    f.push_back(smooth_curve(fi, window));
    r.push_back(smooth_curve(ri, window));
  }
  TrainingCurves out;
  out.collision = band_over_runs(c);
  out.success = band_over_runs(s);
  out.freezing = band_over_runs(f);
  out.total_reward = band_over_runs(r);
  out.runs = logs.size();
  out.window = window;
  return out;
}

/// Outcome rate over the last `tail` episodes of a log, in percent.
inline double tail_rate(const TrainingLog& log, EpisodeOutcome outcome, std::size_t tail) {
  if (log.empty()) throw std::invalid_argument("tail_rate of an empty log");
  const std::size_t n = std::min(tail, log.size());
  long hits = 0;
  for (std::size_t i = log.size() - n; i < log.size(); ++i) hits += log[i].outcome == outcome;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

struct CurveSeries {
  std::string label;
  TrainingCurves curves;
};

inline constexpr const char* kSeriesColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

/// Four panels (collision, success, freezing, total reward) side by side,
/// one line per series with a translucent band where a half-width exists.
inline std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& title) {
  constexpr double kPanelW = 300, kPanelH = 220, kPad = 45;
  std::ostringstream os;
  char buf[256];
  auto fmt = [&](const char* f, auto... args) {
    std::snprintf(buf, sizeof buf, f, args...);
    os << buf;
  };
  const double width = 4 * (kPanelW + kPad) + kPad;
  const double height = kPanelH + 2 * kPad + 20.0 * static_cast<double>(series.size());
  fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\">\n", width,
      height);
  fmt("<rect width=\"%.0f\" height=\"%.0f\" fill=\"white\"/>\n", width, height);
  os << "<text x=\"" << kPad << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";

  const char* names[] = {"collision rate (%)", "success rate (%)", "freezing rate (%)", "total reward"};
  for (int p = 0; p < 4; ++p) {
    auto band_of = [p](const TrainingCurves& c) -> const CurveBand& {
      switch (p) {
        case 0: return c.collision;
        case 1: return c.success;
        case 2: return c.freezing;
        default: return c.total_reward;
      }
    };
    double lo = p < 3 ? 0.0 : 1e300, hi = p < 3 ? 100.0 : -1e300;
    std::size_t n = 1;
    for (const CurveSeries& s : series) {
      const CurveBand& b = band_of(s.curves);
      n = std::max(n, b.mean.size());
      if (p < 3) continue;
      for (std::size_t i = 0; i < b.mean.size(); ++i) {
        const double h = b.half_width.empty() ? 0.0 : b.half_width[i];
        lo = std::min(lo, b.mean[i] - h);
        hi = std::max(hi, b.mean[i] + h);
      }
    }
    if (!(hi > lo)) {
      lo = lo > 1e299 ? 0.0 : lo - 1.0;
      hi = lo + 2.0;
    }
    const double x0 = kPad + p * (kPanelW + kPad), y0 = kPad;
    auto px = [&](std::size_t i) { return x0 + kPanelW * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n - 1, 1)); };
    auto py = [&](double v) { return y0 + kPanelH * (1.0 - (v - lo) / (hi - lo)); };

    fmt("<g data-panel=\"%d\">\n", p);
    fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n", x0, y0, kPanelW,
        kPanelH);
    fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">%s</text>\n", x0, y0 - 6, names[p]);
    fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\">%.2f</text>\n", x0 - 3, y0 + 10, hi);
    fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\">%.2f</text>\n", x0 - 3, y0 + kPanelH, lo);
    fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\">%zu episodes</text>\n", x0 + kPanelW,
        y0 + kPanelH + 14, n);
    for (std::size_t k = 0; k < series.size(); ++k) {
      const CurveBand& b = band_of(series[k].curves);
      const char* colour = kSeriesColours[k % 6];
      if (b.mean.empty()) continue;
      if (!b.half_width.empty()) {
        fmt("<polygon data-band=\"%zu\" fill=\"%s\" fill-opacity=\"0.2\" stroke=\"none\" points=\"", k, colour);
        for (std::size_t i = 0; i < b.mean.size(); ++i) fmt("%.2f,%.2f ", px(i), py(b.mean[i] + b.half_width[i]));
        for (std::size_t i = b.mean.size(); i-- > 0;) fmt("%.2f,%.2f ", px(i), py(b.mean[i] - b.half_width[i]));
        os << "\"/>\n";
      }
      fmt("<polyline data-series=\"%zu\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.2\" points=\"", k, colour);
      for (std::size_t i = 0; i < b.mean.size(); ++i) fmt(i ? " %.2f,%.2f" : "%.2f,%.2f", px(i), py(b.mean[i]));
      os << "\"/>\n";
    }
    os << "</g>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = kPad + kPanelH + 36 + 20.0 * static_cast<double>(k);
    fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"14\" height=\"4\" fill=\"%s\"/>\n", kPad, y - 4, kSeriesColours[k % 6]);
    fmt("<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%s (%zu run%s, window %zu)</text>\n", kPad + 20, y,
        series[k].label.c_str(), series[k].curves.runs, series[k].curves.runs == 1 ? "" : "s", series[k].curves.window);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace jsafe

#endif  // JSAFE_HARNESS_CURVES_HPP

#ifndef JSAFE_METRICS_REPORT_HPP
#define JSAFE_METRICS_REPORT_HPP

#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "jsafe/metrics/metrics.hpp"

namespace jsafe {

inline constexpr const char* kReportSchema = "jsafe-report";
inline constexpr int kReportVersion = 1;

/// One evaluated model: the per-trial summaries and their aggregate.
struct ModelReport {
  std::string scenario;
  std::string model;
  std::string protocol;  // e.g. "20x100": trials x episodes per trial
  std::vector<TrialSummary> trials;
  AggregateReport aggregate;
};

inline ModelReport make_model_report(std::string scenario, std::string model, std::vector<TrialSummary> trials) {
  ModelReport r;
  r.scenario = std::move(scenario);
  r.model = std::move(model);
  r.protocol = std::to_string(trials.size()) + "x" + (trials.empty() ? "0" : std::to_string(trials.front().episodes));
  r.aggregate = aggregate(trials);
  r.trials = std::move(trials);
  return r;
}

inline std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

/// Long format: scenario,model,metric,mean,std,ci95,protocol. std and ci95
/// are blank for a single trial.
inline void write_report_csv(std::ostream& os, const std::vector<ModelReport>& reports) {
  os << "# " << kReportSchema << " v" << kReportVersion << '\n';
  os << "scenario,model,metric,mean,std,ci95,protocol\n";
  for (const ModelReport& r : reports) {
    const std::pair<const char*, const MetricAggregate*> metrics[] = {{"collision_rate", &r.aggregate.collision},
                                                                      {"success_rate", &r.aggregate.success},
                                                                      {"freezing_rate", &r.aggregate.freezing},
                                                                      {"total_reward", &r.aggregate.total_reward}};
    for (const auto& [name, m] : metrics)
      os << r.scenario << ',' << r.model << ',' << name << ',' << format_number(m->mean) << ','
         << format_optional(m->std) << ',' << format_optional(m->ci95) << ',' << r.protocol << '\n';
  }
}

/// Wide format with "mean (std)" cells, one row per model.
inline void write_table_csv(std::ostream& os, const std::vector<ModelReport>& reports) {
  os << "# " << kReportSchema << "-table v" << kReportVersion << '\n';
  os << "scenario,model,protocol,collision_rate,success_rate,freezing_rate,total_reward\n";
  for (const ModelReport& r : reports)
    os << r.scenario << ',' << r.model << ',' << r.protocol << ",\"" << format_mean_std(r.aggregate.collision)
       << "\",\"" << format_mean_std(r.aggregate.success) << "\",\"" << format_mean_std(r.aggregate.freezing) << "\",\""
       << format_mean_std(r.aggregate.total_reward) << "\"\n";
}

/// Per-trial rows; every row satisfies collision + success + freezing = 100.00.
inline void write_trials_csv(std::ostream& os, const ModelReport& r) {
  os << "# " << kReportSchema << "-trials v" << kReportVersion << '\n';
  os << "trial,episodes,collision_rate,success_rate,freezing_rate,mean_total_reward\n";
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    const TrialSummary& t = r.trials[i];
    const BasisPoints bp = t.basis_points();
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%ld,%ld.%02ld,%ld.%02ld,%ld.%02ld,%.4f\n", i, t.episodes, bp.collision / 100,
                  bp.collision % 100, bp.success / 100, bp.success % 100, bp.freezing / 100, bp.freezing % 100,
                  t.mean_total_reward);
    os << buf;
  }
}

inline nlohmann::json to_json(const MetricAggregate& m) {
  nlohmann::json j = {{"mean", m.mean}, {"count", m.count}};
  j["std"] = m.std ? nlohmann::json(*m.std) : nlohmann::json(nullptr);
  j["ci95"] = m.ci95 ? nlohmann::json(*m.ci95) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ModelReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const TrialSummary& t : r.trials)
    trials.push_back({{"episodes", t.episodes},
                      {"collisions", t.collisions},
                      {"successes", t.successes},
                      {"freezes", t.freezes()},
                      {"mean_total_reward", t.mean_total_reward}});
  return {{"schema", kReportSchema},
          {"version", kReportVersion},
          {"scenario", r.scenario},
          {"model", r.model},
          {"protocol", r.protocol},
          {"collision_rate", to_json(r.aggregate.collision)},
          {"success_rate", to_json(r.aggregate.success)},
          {"freezing_rate", to_json(r.aggregate.freezing)},
          {"total_reward", to_json(r.aggregate.total_reward)},
          {"trials", trials}};
}

inline ModelReport model_report_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kReportSchema) throw std::runtime_error("not an evaluation report");
  std::vector<TrialSummary> trials;
  for (const auto& t : j.at("trials")) {
    TrialSummary s;
    s.episodes = t.at("episodes").get<long>();
    s.collisions = t.at("collisions").get<long>();
    s.successes = t.at("successes").get<long>();
    s.mean_total_reward = t.at("mean_total_reward").get<double>();
    trials.push_back(s);
  }
  ModelReport r = make_model_report(j.at("scenario").get<std::string>(), j.at("model").get<std::string>(), trials);
  r.protocol = j.value("protocol", r.protocol);
  return r;
}

}  // namespace jsafe

#endif  // JSAFE_METRICS_REPORT_HPP

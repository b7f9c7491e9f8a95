#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "abr5g/qoe.hpp"

namespace abr5g {

struct ResultRow {
  std::string scenario;
  std::string algorithm;
  std::string kind;  // bb | rb | bola | mpc | robust_mpc | rl
  std::string metric;
  double qoe = 0.0;
  double total_rebuffer_s = 0.0;
  double mean_rung = 0.0;
  int switches_down = 0;
  int switches_up = 0;
  std::optional<double> normalized;
  bool failed = false;
};

struct SessionSummary {
  double total_rebuffer_s = 0.0;
  double mean_rung = 0.0;
  int switches_down = 0;
  int switches_up = 0;
};

inline SessionSummary summarize_session(const SessionRecord& record) {
  SessionSummary s;
  double rung_sum = 0.0;
  for (std::size_t i = 0; i < record.chunks.size(); ++i) {
    s.total_rebuffer_s += record.chunks[i].rebuffer_s;
    rung_sum += record.chunks[i].rung;
    if (i > 0) {
      if (record.chunks[i].rung < record.chunks[i - 1].rung) ++s.switches_down;
      if (record.chunks[i].rung > record.chunks[i - 1].rung) ++s.switches_up;
    }
  }
  if (!record.chunks.empty()) s.mean_rung = rung_sum / static_cast<double>(record.chunks.size());
  return s;
}

// Fill the normalized column per (scenario, metric) group. Returns false
// (leaving raw scores) when the reference is missing or zero in any group.
inline bool normalize_rows(std::vector<ResultRow>& rows, const std::string& reference) {
  if (reference.empty()) return false;
  std::map<std::pair<std::string, std::string>, double> ref_scores;
  for (const auto& r : rows)
    if (r.algorithm == reference && !r.failed) ref_scores[{r.scenario, r.metric}] = r.qoe;
  for (const auto& r : rows) {
    auto it = ref_scores.find({r.scenario, r.metric});
    if (it == ref_scores.end() || it->second == 0.0) return false;
  }
  for (auto& r : rows) r.normalized = r.qoe / ref_scores[{r.scenario, r.metric}];
  return true;
}

inline bool is_conventional_kind(const std::string& kind) {
  return kind == "bb" || kind == "rb" || kind == "bola" || kind == "mpc" || kind == "robust_mpc";
}

struct Aggregates {
  // mean relative improvement of the reference over the best conventional
  // baseline and over the named RL baseline, across (scenario, metric) cells
  double vs_best_conventional = 0.0;
  int conventional_cells = 0;
  double vs_rl_baseline = 0.0;
  int rl_baseline_cells = 0;
};

inline Aggregates compute_aggregates(const std::vector<ResultRow>& rows, const std::string& reference,
                                     const std::string& rl_baseline) {
  Aggregates agg;
  std::map<std::pair<std::string, std::string>, double> ref_scores, baseline_scores;
  std::map<std::pair<std::string, std::string>, double> best_conventional;
  for (const auto& r : rows) {
    if (r.failed) continue;
    const auto key = std::make_pair(r.scenario, r.metric);
    if (r.algorithm == reference) ref_scores[key] = r.qoe;
    if (!rl_baseline.empty() && r.algorithm == rl_baseline) baseline_scores[key] = r.qoe;
    if (is_conventional_kind(r.kind)) {
      auto it = best_conventional.find(key);
      if (it == best_conventional.end() || r.qoe > it->second) best_conventional[key] = r.qoe;
    }
  }
  auto improvement = [](double ref, double other) { return (ref - other) / std::abs(other); };
  for (const auto& [key, ref] : ref_scores) {
    auto c = best_conventional.find(key);
    if (c != best_conventional.end() && c->second != 0.0) {
      agg.vs_best_conventional += improvement(ref, c->second);
      ++agg.conventional_cells;
    }
    auto b = baseline_scores.find(key);
    if (b != baseline_scores.end() && b->second != 0.0) {
      agg.vs_rl_baseline += improvement(ref, b->second);
      ++agg.rl_baseline_cells;
    }
  }
  if (agg.conventional_cells > 0) agg.vs_best_conventional /= agg.conventional_cells;
  if (agg.rl_baseline_cells > 0) agg.vs_rl_baseline /= agg.rl_baseline_cells;
  return agg;
}

inline std::string format_double(double v) {
  std::ostringstream out;
  out.precision(9);
  out << v;
  return out.str();
}

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << "scenario,algorithm,kind,metric,qoe,total_rebuffer_s,mean_rung,switches_down,switches_up,normalized,"
         "failed\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.algorithm << ',' << r.kind << ',' << r.metric << ',' << format_double(r.qoe)
        << ',' << format_double(r.total_rebuffer_s) << ',' << format_double(r.mean_rung) << ',' << r.switches_down
        << ',' << r.switches_up << ',' << (r.normalized ? format_double(*r.normalized) : std::string("")) << ','
        << (r.failed ? 1 : 0) << '\n';
  }
  return out.str();
}

// Bar-chart-style plot data: one file per metric, one row per bar.
inline std::map<std::string, std::string> plot_data_by_metric(const std::vector<ResultRow>& rows) {
  std::map<std::string, std::ostringstream> streams;
  for (const auto& r : rows) {
    auto& s = streams[r.metric];
    if (s.tellp() == 0) s << "x_label,series,value\n";
    s << r.scenario << ',' << r.algorithm << ',' << format_double(r.normalized.value_or(r.qoe)) << '\n';
  }
  std::map<std::string, std::string> out;
  for (auto& [metric, s] : streams) out[metric] = s.str();
  return out;
}

}  // namespace abr5g

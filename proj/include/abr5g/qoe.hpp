#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "abr5g/errors.hpp"

namespace abr5g {

// One encoded quality level of the ladder.
struct Representation {
  int rung = 0;
  int vertical_resolution = 0;
  double bitrate_kbps = 0.0;
};

class BitrateLadder {
 public:
  explicit BitrateLadder(std::vector<Representation> reps) : reps_(std::move(reps)) {
    if (reps_.empty()) throw InvalidSpec("empty ladder");
    for (std::size_t i = 0; i < reps_.size(); ++i) {
      reps_[i].rung = static_cast<int>(i);
      if (i > 0 && (reps_[i].bitrate_kbps <= reps_[i - 1].bitrate_kbps ||
                    reps_[i].vertical_resolution <= reps_[i - 1].vertical_resolution))
        throw InvalidSpec("ladder must be strictly increasing in bitrate and resolution");
    }
  }

  // The 10-rung UHD ladder used throughout (144p .. 8K).
  static BitrateLadder uhd10() {
    return BitrateLadder({{0, 144, 100},
                          {1, 240, 300},
                          {2, 360, 500},
                          {3, 480, 1000},
                          {4, 720, 2000},
                          {5, 1080, 4000},
                          {6, 1440, 8000},
                          {7, 2160, 18000},
                          {8, 2880, 28000},
                          {9, 4320, 37500}});
  }

  // The original 6-rung 240p..1080p configuration, kept for the comparison
  // baseline.
  static BitrateLadder legacy6() {
    return BitrateLadder({{0, 240, 300},
                          {1, 360, 750},
                          {2, 480, 1200},
                          {3, 720, 1850},
                          {4, 1080, 2850},
                          {5, 1088, 4300}});
  }

  int size() const { return static_cast<int>(reps_.size()); }
  int top_rung() const { return size() - 1; }
  const Representation& at(int rung) const {
    if (rung < 0 || rung >= size()) throw InvalidRung("rung " + std::to_string(rung) + " out of range");
    return reps_[static_cast<std::size_t>(rung)];
  }
  const std::vector<Representation>& representations() const { return reps_; }

 private:
  std::vector<Representation> reps_;
};

enum class MetricId { lin, log, hd, smartphone, tv, vr };

inline std::string to_string(MetricId id) {
  switch (id) {
    case MetricId::lin: return "lin";
    case MetricId::log: return "log";
    case MetricId::hd: return "hd";
    case MetricId::smartphone: return "smartphone";
    case MetricId::tv: return "tv";
    case MetricId::vr: return "vr";
  }
  return "?";
}

inline MetricId metric_from_string(const std::string& s) {
  if (s == "lin") return MetricId::lin;
  if (s == "log") return MetricId::log;
  if (s == "hd") return MetricId::hd;
  if (s == "smartphone") return MetricId::smartphone;
  if (s == "tv") return MetricId::tv;
  if (s == "vr") return MetricId::vr;
  throw InvalidSpec("unknown QoE metric `" + s + "`");
}

// A quality mapping q(rung) plus the rebuffer weight mu.
struct QoeMetric {
  MetricId id = MetricId::hd;
  double mu = 24.0;
  std::vector<double> score_table;  // empty for the formula-based metrics

  double quality(const BitrateLadder& ladder, int rung) const {
    const auto& rep = ladder.at(rung);
    switch (id) {
      case MetricId::lin:
        return rep.bitrate_kbps / 1000.0;  // Mbps
      case MetricId::log:
        return std::log(rep.bitrate_kbps / ladder.at(0).bitrate_kbps);
      case MetricId::hd:
        return 50.0 * static_cast<double>(rep.vertical_resolution) / 4320.0;
      default:
        break;
    }
    if (rung >= static_cast<int>(score_table.size()))
      throw InvalidRung("no score-table entry for rung " + std::to_string(rung));
    return score_table[static_cast<std::size_t>(rung)];
  }

  static QoeMetric builtin(MetricId id) {
    switch (id) {
      case MetricId::lin: return {id, 37.5, {}};
      case MetricId::log: return {id, 5.93, {}};
      case MetricId::hd: return {id, 24.0, {}};
      case MetricId::smartphone: return {id, 25.0, {1, 10, 25, 35, 42, 45, 47, 48, 49, 50}};
      case MetricId::tv: return {id, 45.0, {1, 8, 18, 24, 30, 35, 42, 46, 48, 50}};
      case MetricId::vr: return {id, 50.0, {1, 6, 14, 18, 25, 32, 38, 42, 46, 50}};
    }
    throw InvalidSpec("unknown metric id");
  }
};

inline double quality(const QoeMetric& metric, const BitrateLadder& ladder, int rung) {
  return metric.quality(ladder, rung);
}

// 1 iff the quality strictly decreases; upgrades and holds are free.
inline int downgrade_indicator(double q_prev, double q_next) { return q_next < q_prev ? 1 : 0; }

// Per-chunk reward: q(rung) - mu * rebuffer - S * (q(prev) - q(rung)).
// The first chunk of a session has no smoothness term.
inline double chunk_reward(const QoeMetric& metric, const BitrateLadder& ladder, std::optional<int> prev_rung,
                           int rung, double rebuffer_s, std::optional<double> mu_override = std::nullopt) {
  const double q = metric.quality(ladder, rung);
  const double mu = mu_override.value_or(metric.mu);
  double smooth = 0.0;
  if (prev_rung) {
    const double qp = metric.quality(ladder, *prev_rung);
    smooth = static_cast<double>(downgrade_indicator(qp, q)) * (qp - q);
  }
  return q - mu * rebuffer_s - smooth;
}

struct SessionChunk {
  int rung = 0;
  double rebuffer_s = 0.0;
};

struct SessionRecord {
  std::vector<SessionChunk> chunks;
};

// Session score with downgrade-only smoothness penalty.
inline double session_qoe(const QoeMetric& metric, const BitrateLadder& ladder, const SessionRecord& record,
                          std::optional<double> mu_override = std::nullopt) {
  if (record.chunks.empty()) throw EmptyRecord("empty session record");
  double total = 0.0;
  std::optional<int> prev;
  for (const auto& c : record.chunks) {
    total += chunk_reward(metric, ladder, prev, c.rung, c.rebuffer_s, mu_override);
    prev = c.rung;
  }
  return total;
}

// Legacy session score: smoothness penalizes switches in both directions.
inline double session_qoe_legacy(const QoeMetric& metric, const BitrateLadder& ladder,
                                 const SessionRecord& record, std::optional<double> mu_override = std::nullopt) {
  if (record.chunks.empty()) throw EmptyRecord("empty session record");
  const double mu = mu_override.value_or(metric.mu);
  double total = 0.0;
  std::optional<double> prev_q;
  for (const auto& c : record.chunks) {
    const double q = metric.quality(ladder, c.rung);
    total += q - mu * c.rebuffer_s;
    if (prev_q) total -= std::abs(q - *prev_q);
    prev_q = q;
  }
  return total;
}

// Scores divided by a reference algorithm's score (reference maps to 1.0).
inline std::map<std::string, double> normalize_scores(const std::map<std::string, double>& scores,
                                                      const std::string& reference_algorithm) {
  auto it = scores.find(reference_algorithm);
  if (it == scores.end() || it->second == 0.0)
    throw DegenerateReference("reference `" + reference_algorithm + "` missing or zero");
  std::map<std::string, double> out;
  for (const auto& [k, v] : scores) out[k] = v / it->second;
  return out;
}

}  // namespace abr5g

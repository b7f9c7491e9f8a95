#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "abr5g/errors.hpp"
#include "abr5g/observation.hpp"
#include "abr5g/qoe.hpp"
#include "abr5g/sim.hpp"

namespace abr5g {

class DecisionPolicy {
 public:
  virtual ~DecisionPolicy() = default;
  virtual int decide(const Observation& obs) = 0;
  virtual const char* name() const = 0;
};

// Harmonic mean of the positive entries among the last `window` history
// slots; 0 when the history holds no positive entry.
inline double harmonic_mean_kbps(const std::array<double, kHistoryLen>& history, int window) {
  double inv_sum = 0.0;
  int n = 0;
  const int start = std::max(0, kHistoryLen - window);
  for (int i = start; i < kHistoryLen; ++i) {
    const double v = history[static_cast<std::size_t>(i)];
    if (v > 0) {
      inv_sum += 1.0 / v;
      ++n;
    }
  }
  return n == 0 ? 0.0 : static_cast<double>(n) / inv_sum;
}

// --- Buffer-Based ------------------------------------------------------------

struct BbParams {
  double reservoir_s = 4.0;
  double cushion_s = 16.0;
};

inline int bb_decide(double buffer_s, int top_rung, const BbParams& params = {}) {
  if (buffer_s < params.reservoir_s) return 0;
  if (buffer_s >= params.reservoir_s + params.cushion_s) return top_rung;
  const int rung = static_cast<int>(
      std::floor(static_cast<double>(top_rung) * (buffer_s - params.reservoir_s) / params.cushion_s));
  return std::clamp(rung, 0, top_rung);
}

class BbPolicy final : public DecisionPolicy {
 public:
  explicit BbPolicy(int top_rung, BbParams params = {}) : top_rung_(top_rung), params_(params) {}
  int decide(const Observation& obs) override { return bb_decide(obs.buffer_s, top_rung_, params_); }
  const char* name() const override { return "bb"; }

 private:
  int top_rung_;
  BbParams params_;
};

// --- Rate-Based --------------------------------------------------------------

struct RbParams {
  int window = 5;
};

inline int rb_decide(const std::array<double, kHistoryLen>& past_throughputs, const BitrateLadder& ladder,
                     const RbParams& params = {}) {
  const double prediction = harmonic_mean_kbps(past_throughputs, params.window);
  int rung = 0;
  for (int r = 0; r < ladder.size(); ++r)
    if (ladder.at(r).bitrate_kbps <= prediction) rung = r;
  if (prediction < ladder.at(0).bitrate_kbps) rung = 0;
  return rung;
}

class RbPolicy final : public DecisionPolicy {
 public:
  RbPolicy(BitrateLadder ladder, RbParams params = {}) : ladder_(std::move(ladder)), params_(params) {}
  int decide(const Observation& obs) override { return rb_decide(obs.past_throughputs_kbps, ladder_, params_); }
  const char* name() const override { return "rb"; }

 private:
  BitrateLadder ladder_;
  RbParams params_;
};

// --- BOLA --------------------------------------------------------------------

// Objective per rung m: (V * (u_m + gamma_p) - buffer) / chunk_bits_m with
// u_m = ln(bitrate_m / bitrate_0). V and gamma_p are calibrated from two
// anchors: rung 0 wins at buffer <= low_anchor_s, the top rung wins at
// buffer >= high_anchor_fraction * capacity.
struct BolaParams {
  double gamma_p = 0.0;
  double v = 0.0;
  double low_anchor_s = 3.0;
  double high_anchor_fraction = 0.9;
};

inline BolaParams bola_calibrate(const BitrateLadder& ladder, double buffer_capacity_s,
                                 double low_anchor_s = 3.0, double high_anchor_fraction = 0.9) {
  // tie point between consecutive rungs m and m+1 sits at buffer
  // V * (c_m + gamma_p), c_m = (r_{m+1} u_m - r_m u_{m+1}) / (r_{m+1} - r_m)
  const int n = ladder.size();
  double c_min = 0.0, c_max = 0.0;
  for (int m = 0; m + 1 < n; ++m) {
    const double rm = ladder.at(m).bitrate_kbps;
    const double rn = ladder.at(m + 1).bitrate_kbps;
    const double um = std::log(rm / ladder.at(0).bitrate_kbps);
    const double un = std::log(rn / ladder.at(0).bitrate_kbps);
    const double c = (rn * um - rm * un) / (rn - rm);
    if (m == 0) c_min = c_max = c;
    c_min = std::min(c_min, c);
    c_max = std::max(c_max, c);
  }
  const double high = high_anchor_fraction * buffer_capacity_s;
  if (c_max <= c_min) throw InvalidSpec("degenerate ladder for BOLA calibration");
  BolaParams p;
  p.low_anchor_s = low_anchor_s;
  p.high_anchor_fraction = high_anchor_fraction;
  p.v = (high - low_anchor_s) / (c_max - c_min);
  p.gamma_p = low_anchor_s / p.v - c_min;
  return p;
}

inline int bola_decide(double buffer_s, const BitrateLadder& ladder, const std::vector<double>& chunk_bits,
                       const BolaParams& params) {
  int best = 0;
  double best_obj = 0.0;
  for (int m = 0; m < ladder.size(); ++m) {
    const double u = std::log(ladder.at(m).bitrate_kbps / ladder.at(0).bitrate_kbps);
    const double obj = (params.v * (u + params.gamma_p) - buffer_s) / chunk_bits[static_cast<std::size_t>(m)];
    if (m == 0 || obj >= best_obj) {  // ties break toward the higher rung
      best = m;
      best_obj = obj;
    }
  }
  return best;
}

class BolaPolicy final : public DecisionPolicy {
 public:
  BolaPolicy(BitrateLadder ladder, double buffer_capacity_s)
      : ladder_(std::move(ladder)), params_(bola_calibrate(ladder_, buffer_capacity_s)) {}
  BolaPolicy(BitrateLadder ladder, BolaParams params) : ladder_(std::move(ladder)), params_(params) {}
  int decide(const Observation& obs) override { return bola_decide(obs.buffer_s, ladder_, obs.next_chunk_bits, params_); }
  const char* name() const override { return "bola"; }
  const BolaParams& params() const { return params_; }

 private:
  BitrateLadder ladder_;
  BolaParams params_;
};

// --- MPC / robustMPC ---------------------------------------------------------

struct MpcParams {
  int horizon = 5;
  bool robust = false;
  int predictor_window = 5;
  double chunk_duration_s = 2.0;
  double buffer_capacity_s = 24.0;
  MetricId metric = MetricId::hd;
};

namespace detail {

struct MpcSearch {
  const BitrateLadder& ladder;
  const QoeMetric& metric;
  const MpcParams& params;
  double bandwidth_bps = 0.0;
  double q_max = 0.0;
  double best_reward = 0.0;
  int best_first = 0;
  bool have_best = false;

  void dfs(int depth, int horizon, double buffer, std::optional<int> prev, double reward, int first) {
    if (depth == horizon) {
      if (!have_best || reward > best_reward) {
        have_best = true;
        best_reward = reward;
        best_first = first;
      }
      return;
    }
    // admissible bound: no future chunk can score above q_max
    if (have_best && reward + static_cast<double>(horizon - depth) * q_max <= best_reward) return;
    for (int r = 0; r < ladder.size(); ++r) {
      const double bits = ladder.at(r).bitrate_kbps * 1000.0 * params.chunk_duration_s;
      const double dl = bits / bandwidth_bps;
      const double rebuffer = std::max(0.0, dl - buffer);
      double next_buffer = std::max(buffer - dl, 0.0) + params.chunk_duration_s;
      next_buffer = std::min(next_buffer, params.buffer_capacity_s);
      const double step = chunk_reward(metric, ladder, prev, r, rebuffer);
      dfs(depth + 1, horizon, next_buffer, r, reward + step, depth == 0 ? r : first);
    }
  }
};

}  // namespace detail

class MpcPolicy final : public DecisionPolicy {
 public:
  MpcPolicy(BitrateLadder ladder, MpcParams params = {})
      : ladder_(std::move(ladder)), params_(params), metric_(QoeMetric::builtin(params.metric)) {}

  int decide(const Observation& obs) override {
    const double actual = obs.past_throughputs_kbps[kHistoryLen - 1];
    if (params_.robust && last_prediction_ > 0 && actual > 0) {
      errors_.push_back(std::abs(last_prediction_ - actual) / actual);
      while (errors_.size() > 5) errors_.pop_front();
    }
    double prediction = harmonic_mean_kbps(obs.past_throughputs_kbps, params_.predictor_window);
    last_prediction_ = prediction;
    if (params_.robust && !errors_.empty())
      prediction /= 1.0 + *std::max_element(errors_.begin(), errors_.end());
    return plan(obs, prediction);
  }

  // Deterministic planning step, exposed for the enumeration oracle tests.
  int plan(const Observation& obs, double prediction_kbps) const {
    if (prediction_kbps <= 0) return 0;
    detail::MpcSearch search{ladder_, metric_, params_};
    search.bandwidth_bps = prediction_kbps * 1000.0;
    search.q_max = metric_.quality(ladder_, ladder_.top_rung());
    const int horizon = std::min(params_.horizon, std::max(1, obs.chunks_remaining));
    search.dfs(0, horizon, obs.buffer_s, obs.last_rung, 0.0, 0);
    return search.best_first;
  }

  const char* name() const override { return params_.robust ? "robust_mpc" : "mpc"; }

 private:
  BitrateLadder ladder_;
  MpcParams params_;
  QoeMetric metric_;
  double last_prediction_ = 0.0;
  std::deque<double> errors_;
};

inline PolicyFn as_policy_fn(const std::shared_ptr<DecisionPolicy>& policy) {
  return [policy](const Observation& obs) { return policy->decide(obs); };
}

}  // namespace abr5g

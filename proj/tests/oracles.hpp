#pragma once

// Independent brute-force oracles used by the test suites. These must stay
// decoupled from the library's closed-form implementations.

#include <cmath>
#include <optional>
#include <vector>

#include "abr5g/policy.hpp"
#include "abr5g/qoe.hpp"
#include "abr5g/trace.hpp"

namespace oracle {

// 1 ms-step packetized download simulation: walk milliseconds from
// start_s + rtt and accumulate delivered bits until the chunk is complete.
inline double brute_force_download_time_s(const abr5g::ThroughputTrace& trace, double start_s, double chunk_bits,
                                          double rtt_s, double efficiency) {
  const double begin_ms = (start_s + rtt_s) * 1000.0;
  double acc = 0.0;
  const double need = chunk_bits / efficiency;
  std::int64_t ms = 0;
  while (acc < need && ms < 100'000'000) {
    const double t0 = (begin_ms + static_cast<double>(ms)) / 1000.0;
    acc += trace.integrate_bits(t0, t0 + 0.001);
    ++ms;
  }
  return rtt_s + static_cast<double>(ms) / 1000.0;
}

// Exhaustive MPC horizon enumeration with no pruning: bandwidth held
// constant, buffer evolution per the simulator, sum of per-chunk rewards,
// first rung of the best sequence, ties -> lower.
inline int mpc_enumeration(const abr5g::BitrateLadder& ladder, const abr5g::QoeMetric& metric, double bandwidth_kbps,
                           double buffer_s, std::optional<int> last_rung, int horizon, double chunk_duration_s,
                           double buffer_capacity_s) {
  if (bandwidth_kbps <= 0) return 0;
  const int n = ladder.size();
  long total = 1;
  for (int i = 0; i < horizon; ++i) total *= n;
  double best_reward = 0.0;
  int best_first = 0;
  bool have = false;
  for (long code = 0; code < total; ++code) {
    long c = code;
    std::vector<int> seq(static_cast<std::size_t>(horizon));
    for (int i = horizon - 1; i >= 0; --i) {
      seq[static_cast<std::size_t>(i)] = static_cast<int>(c % n);
      c /= n;
    }
    double buffer = buffer_s;
    std::optional<int> prev = last_rung;
    double reward = 0.0;
    for (int i = 0; i < horizon; ++i) {
      const int r = seq[static_cast<std::size_t>(i)];
      const double bits = ladder.at(r).bitrate_kbps * 1000.0 * chunk_duration_s;
      const double dl = bits / (bandwidth_kbps * 1000.0);
      const double rebuffer = std::max(0.0, dl - buffer);
      buffer = std::min(std::max(buffer - dl, 0.0) + chunk_duration_s, buffer_capacity_s);
      reward += abr5g::chunk_reward(metric, ladder, prev, r, rebuffer);
      prev = r;
    }
    if (!have || reward > best_reward) {
      have = true;
      best_reward = reward;
      best_first = seq[0];
    }
  }
  return best_first;
}

// Direct BOLA objective evaluation (no calibration shortcuts).
inline int bola_argmax(const abr5g::BitrateLadder& ladder, double buffer_s, const std::vector<double>& chunk_bits,
                       double v, double gamma_p) {
  int best = 0;
  double best_obj = -1e300;
  for (int m = 0; m < ladder.size(); ++m) {
    const double u = std::log(ladder.at(m).bitrate_kbps / ladder.at(0).bitrate_kbps);
    const double obj = (v * (u + gamma_p) - buffer_s) / chunk_bits[static_cast<std::size_t>(m)];
    if (obj >= best_obj) {
      best = m;
      best_obj = obj;
    }
  }
  return best;
}

}  // namespace oracle

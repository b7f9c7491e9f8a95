#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abr5g/errors.hpp"
#include "abr5g/trace.hpp"

namespace abr5g {

// One throughput regime (e.g. low-band FDD, mid-band TDD, NR-DC, outage).
struct BandState {
  std::string label;
  double mean_kbps = 0.0;
  double stddev_kbps = 0.0;
  double mean_dwell_s = 1.0;
};

// Markov-chain band-switching trace description. Stands in for drive-test
// captures: throughput alternates between Gaussian regimes with exponential
// dwell times.
struct SyntheticSpec {
  std::string name;
  std::vector<BandState> states;
  std::vector<std::vector<double>> transition;  // row-stochastic
  std::int64_t sample_interval_ms = 1000;
  double duration_s = 1800.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (states.empty()) throw InvalidSpec("no band states");
    if (transition.size() != states.size()) throw InvalidSpec("transition matrix shape mismatch");
    bool any_positive_mean = false;
    for (const auto& s : states) {
      if (s.mean_dwell_s <= 0) throw InvalidSpec("dwell times must be positive");
      if (s.mean_kbps < 0 || s.stddev_kbps < 0) throw InvalidSpec("negative band parameters");
      if (s.mean_kbps > 0) any_positive_mean = true;
    }
    if (!any_positive_mean) throw InvalidSpec("all band states have zero mean throughput");
    for (const auto& row : transition) {
      if (row.size() != states.size()) throw InvalidSpec("transition matrix shape mismatch");
      double sum = 0.0;
      for (double p : row) {
        if (p < 0) throw InvalidSpec("negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw InvalidSpec("transition matrix rows must sum to 1");
    }
    if (sample_interval_ms <= 0) throw InvalidSpec("sample interval must be positive");
    if (duration_s <= 0) throw InvalidSpec("duration must be positive");
  }

  // Stationary distribution of the embedded jump chain (power iteration).
  std::vector<double> stationary() const {
    const std::size_t n = states.size();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    for (int iter = 0; iter < 10000; ++iter) {
      for (std::size_t j = 0; j < n; ++j) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += pi[i] * transition[i][j];
        next[j] = v;
      }
      double delta = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        delta += std::abs(next[j] - pi[j]);
        pi[j] = next[j];
      }
      if (delta < 1e-14) break;
    }
    return pi;
  }
};

// Deterministic for a fixed seed. Gaussian noise is clipped at zero so
// outage states produce genuinely dead air.
inline ThroughputTrace synthesize(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto duration_ms = static_cast<std::int64_t>(std::llround(spec.duration_s * 1000.0));
  std::size_t state = 0;
  double dwell_end_s = -std::log(1.0 - unit(rng)) * spec.states[state].mean_dwell_s;

  std::vector<TraceSample> samples;
  for (std::int64_t t = 0; t < duration_ms; t += spec.sample_interval_ms) {
    const double now_s = static_cast<double>(t) / 1000.0;
    while (now_s >= dwell_end_s) {
      // jump per the transition row
      double u = unit(rng);
      std::size_t next = spec.states.size() - 1;
      double acc = 0.0;
      for (std::size_t j = 0; j < spec.states.size(); ++j) {
        acc += spec.transition[state][j];
        if (u < acc) {
          next = j;
          break;
        }
      }
      state = next;
      dwell_end_s += -std::log(1.0 - unit(rng)) * spec.states[state].mean_dwell_s;
    }
    const auto& band = spec.states[state];
    double kbps = band.mean_kbps;
    if (band.stddev_kbps > 0) {
      std::normal_distribution<double> noise(band.mean_kbps, band.stddev_kbps);
      kbps = noise(rng);
    }
    samples.push_back({t, std::max(0.0, kbps)});
  }
  return ThroughputTrace(std::move(samples), duration_ms, spec.name, TraceSource::synthetic,
                         /*require_positive=*/false);
}

}  // namespace abr5g

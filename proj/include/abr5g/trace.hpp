#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "abr5g/errors.hpp"

namespace abr5g {

// Mahimahi grants delivery opportunities in fixed 1500-byte packets.
inline constexpr double kPacketBits = 12000.0;

enum class TraceSource { measured, synthetic, mahimahi };

struct TraceSample {
  std::int64_t t_ms = 0;
  double throughput_kbps = 0.0;  // kbps == bits per millisecond
};

// Piecewise-constant downlink throughput. Each sample holds until the next
// one; the last sample holds until duration_ms. Sessions that outlast the
// trace loop back to t = 0.
class ThroughputTrace {
 public:
  ThroughputTrace() = default;

  ThroughputTrace(std::vector<TraceSample> samples, std::int64_t duration_ms,
                  std::string name = "", TraceSource source = TraceSource::measured,
                  bool require_positive = true)
      : samples_(std::move(samples)), duration_ms_(duration_ms), name_(std::move(name)), source_(source) {
    validate(require_positive);
    build_cumulative();
  }

  // Duration defaults to the last timestamp plus the final sample interval
  // (1 s for a single-sample trace).
  static ThroughputTrace from_samples(std::vector<TraceSample> samples, std::string name = "",
                                      TraceSource source = TraceSource::measured) {
    std::int64_t dur = 1000;
    if (samples.size() >= 2) {
      const auto last = samples.back().t_ms;
      const auto prev = samples[samples.size() - 2].t_ms;
      dur = last + (last - prev);
    } else if (samples.size() == 1) {
      dur = samples.front().t_ms + 1000;
    }
    return ThroughputTrace(std::move(samples), dur, std::move(name), source);
  }

  const std::vector<TraceSample>& samples() const { return samples_; }
  std::int64_t duration_ms() const { return duration_ms_; }
  double duration_s() const { return static_cast<double>(duration_ms_) / 1000.0; }
  const std::string& name() const { return name_; }
  TraceSource source() const { return source_; }
  double total_bits_per_loop() const { return loop_bits_; }

  // Throughput in effect at looped time t_ms.
  double rate_at_ms(double t_ms) const {
    const double local = wrap_ms(t_ms);
    auto it = std::upper_bound(samples_.begin(), samples_.end(), local,
                               [](double t, const TraceSample& s) { return t < static_cast<double>(s.t_ms); });
    return std::prev(it)->throughput_kbps;
  }

  // ∫ throughput dt over [t0, t1] seconds, in bits, with looping.
  double integrate_bits(double t0_s, double t1_s) const {
    if (t0_s < 0 || t1_s < t0_s) throw InvalidInterval("integrate_bits: need 0 <= t0 <= t1");
    return antiderivative_bits(t1_s * 1000.0) - antiderivative_bits(t0_s * 1000.0);
  }

  // Smallest dt (seconds) such that integrate_bits(t0, t0 + dt) >= bits.
  double time_to_deliver_s(double t0_s, double bits) const {
    if (bits <= 0) return 0.0;
    if (loop_bits_ <= 0) throw DeadTrace("trace has no positive throughput");
    const double start_ms = t0_s * 1000.0;
    double target = antiderivative_bits(start_ms) + bits;
    const double loops = std::floor(target / loop_bits_);
    double end_ms = 0.0;
    // position within a loop where cumulative bits reach (target - loops*loop_bits)
    double rem = target - loops * loop_bits_;
    if (rem <= 0) {
      end_ms = loops * static_cast<double>(duration_ms_);
    } else {
      end_ms = loops * static_cast<double>(duration_ms_) + invert_partial(rem);
    }
    return std::max(0.0, (end_ms - start_ms) / 1000.0);
  }

 private:
  void validate(bool require_positive) const {
    if (samples_.empty()) throw MalformedTrace("trace has no samples");
    if (samples_.front().t_ms != 0) throw MalformedTrace("first sample must be at t=0");
    std::int64_t prev = -1;
    bool any_positive = false;
    for (const auto& s : samples_) {
      if (s.t_ms <= prev) throw MalformedTrace("timestamps must be strictly increasing");
      if (s.throughput_kbps < 0) throw MalformedTrace("negative throughput");
      if (!std::isfinite(s.throughput_kbps)) throw MalformedTrace("non-finite throughput");
      if (s.throughput_kbps > 0) any_positive = true;
      prev = s.t_ms;
    }
    if (duration_ms_ <= samples_.back().t_ms)
      throw MalformedTrace("duration must exceed the last timestamp");
    if (require_positive && !any_positive) throw DeadTrace("trace has no positive sample");
  }

  void build_cumulative() {
    cum_bits_.resize(samples_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      cum_bits_[i] = acc;
      const std::int64_t seg_end = (i + 1 < samples_.size()) ? samples_[i + 1].t_ms : duration_ms_;
      acc += samples_[i].throughput_kbps * static_cast<double>(seg_end - samples_[i].t_ms);
    }
    loop_bits_ = acc;
  }

  double wrap_ms(double t_ms) const {
    const double d = static_cast<double>(duration_ms_);
    double local = std::fmod(t_ms, d);
    if (local < 0) local += d;
    return local;
  }

  // Bits accumulated from a local (non-looped) time 0 to local_ms in [0, duration].
  double partial_bits(double local_ms) const {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), local_ms,
                               [](double t, const TraceSample& s) { return t < static_cast<double>(s.t_ms); });
    const std::size_t i = static_cast<std::size_t>(std::distance(samples_.begin(), std::prev(it)));
    return cum_bits_[i] + samples_[i].throughput_kbps * (local_ms - static_cast<double>(samples_[i].t_ms));
  }

  // Bits accumulated from t=0 to t_ms with looping.
  double antiderivative_bits(double t_ms) const {
    const double d = static_cast<double>(duration_ms_);
    const double loops = std::floor(t_ms / d);
    return loops * loop_bits_ + partial_bits(t_ms - loops * d);
  }

  // Earliest local ms position where partial_bits reaches `bits`
  // (0 < bits <= loop_bits).
  double invert_partial(double bits) const {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const double end_cum = (i + 1 < samples_.size()) ? cum_bits_[i + 1] : loop_bits_;
      if (end_cum >= bits) {
        if (bits <= cum_bits_[i]) return static_cast<double>(samples_[i].t_ms);
        return static_cast<double>(samples_[i].t_ms) + (bits - cum_bits_[i]) / samples_[i].throughput_kbps;
      }
    }
    return static_cast<double>(duration_ms_);
  }

  std::vector<TraceSample> samples_;
  std::int64_t duration_ms_ = 0;
  std::string name_;
  TraceSource source_ = TraceSource::measured;
  std::vector<double> cum_bits_;
  double loop_bits_ = 0.0;
};

// --- CSV ingestion -----------------------------------------------------------

// Lines of `timestamp_ms,throughput_kbps`, optional single header line.
// The trace is rebased so the first timestamp becomes 0.
inline ThroughputTrace parse_csv(const std::string& text, std::string name = "") {
  std::vector<TraceSample> samples;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::int64_t t = 0;
    double kbps = 0.0;
    char comma = 0;
    std::istringstream ls(line);
    if (!(ls >> t >> comma >> kbps) || comma != ',') {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw MalformedTrace("line " + std::to_string(line_no) + ": expected `timestamp_ms,throughput_kbps`");
    }
    header_allowed = false;
    if (kbps < 0) throw MalformedTrace("line " + std::to_string(line_no) + ": negative throughput");
    samples.push_back({t, kbps});
  }
  if (samples.empty()) throw MalformedTrace("no samples");
  const std::int64_t base = samples.front().t_ms;
  for (auto& s : samples) s.t_ms -= base;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].t_ms <= samples[i - 1].t_ms) throw MalformedTrace("non-monotonic timestamps");
  return ThroughputTrace::from_samples(std::move(samples), std::move(name), TraceSource::measured);
}

inline std::string to_csv(const ThroughputTrace& trace) {
  std::ostringstream out;
  out << "timestamp_ms,throughput_kbps\n";
  for (const auto& s : trace.samples()) {
    out << s.t_ms << ',';
    std::ostringstream v;
    v.precision(10);
    v << s.throughput_kbps;
    out << v.str() << '\n';
  }
  return out.str();
}

// --- Mahimahi conversion -----------------------------------------------------

// One non-decreasing integer per line; each grants one 1500-byte packet
// delivery opportunity at that millisecond. A fractional-packet accumulator
// carries across milliseconds.
inline std::vector<std::int64_t> to_mahimahi(const ThroughputTrace& trace) {
  std::vector<std::int64_t> out;
  double acc = 0.0;
  for (std::int64_t ms = 1; ms <= trace.duration_ms(); ++ms) {
    acc += trace.integrate_bits(static_cast<double>(ms - 1) / 1000.0, static_cast<double>(ms) / 1000.0) / kPacketBits;
    const auto whole = static_cast<std::int64_t>(std::floor(acc + 1e-9));
    for (std::int64_t k = 0; k < whole; ++k) out.push_back(ms);
    acc -= static_cast<double>(whole);
  }
  return out;
}

// Per-bucket throughput reconstruction. total_duration_ms = 0 infers the
// duration from the last timestamp (rounded up to a full bucket).
inline ThroughputTrace from_mahimahi(const std::vector<std::int64_t>& lines, std::int64_t bucket_ms = 1000,
                                     std::int64_t total_duration_ms = 0, std::string name = "") {
  if (bucket_ms <= 0) throw InvalidInterval("bucket_ms must be positive");
  std::int64_t prev = 0;
  for (auto t : lines) {
    if (t < prev) throw MalformedTrace("decreasing timestamps");
    prev = t;
  }
  std::int64_t dur = total_duration_ms;
  if (dur <= 0) dur = lines.empty() ? bucket_ms : ((lines.back() + bucket_ms - 1) / bucket_ms) * bucket_ms;
  const std::int64_t buckets = (dur + bucket_ms - 1) / bucket_ms;
  std::vector<TraceSample> samples(static_cast<std::size_t>(buckets));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(buckets), 0);
  for (auto t : lines) {
    auto b = (t - 1) / bucket_ms;  // packet at ms t belongs to the bucket covering (t-1, t]
    if (b < 0) b = 0;
    if (b >= buckets) b = buckets - 1;
    ++counts[static_cast<std::size_t>(b)];
  }
  for (std::int64_t b = 0; b < buckets; ++b) {
    samples[static_cast<std::size_t>(b)] = {
        b * bucket_ms, static_cast<double>(counts[static_cast<std::size_t>(b)]) * kPacketBits / static_cast<double>(bucket_ms)};
  }
  return ThroughputTrace(std::move(samples), buckets * bucket_ms, std::move(name), TraceSource::mahimahi,
                         /*require_positive=*/false);
}

inline std::string mahimahi_to_text(const std::vector<std::int64_t>& lines) {
  std::ostringstream out;
  for (auto t : lines) out << t << '\n';
  return out.str();
}

inline std::vector<std::int64_t> mahimahi_from_text(const std::string& text) {
  std::vector<std::int64_t> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::stoll(line));
  }
  return lines;
}

// --- Windowing ---------------------------------------------------------------

// Rebased sub-trace of exactly duration_s starting at start_s, looping over
// the source trace as needed.
inline ThroughputTrace slice_window(const ThroughputTrace& trace, double start_s, double duration_s = 900.0) {
  if (duration_s <= 0) throw InvalidInterval("duration_s must be positive");
  const auto dur_ms = static_cast<std::int64_t>(std::llround(duration_s * 1000.0));
  const auto start_ms = static_cast<std::int64_t>(std::llround(start_s * 1000.0));
  const std::int64_t src_dur = trace.duration_ms();
  std::vector<TraceSample> samples;
  samples.push_back({0, trace.rate_at_ms(static_cast<double>(start_ms))});
  // walk source segment boundaries from start_ms, wrapping mod src_dur
  std::int64_t local = start_ms % src_dur;
  std::int64_t emitted = 0;
  while (emitted < dur_ms) {
    // next boundary strictly after `local`
    const auto& ss = trace.samples();
    auto it = std::upper_bound(ss.begin(), ss.end(), local,
                               [](std::int64_t t, const TraceSample& s) { return t < s.t_ms; });
    std::int64_t next = (it == ss.end()) ? src_dur : it->t_ms;
    std::int64_t step = next - local;
    if (emitted + step >= dur_ms) break;
    emitted += step;
    local = next % src_dur;
    const double rate = trace.rate_at_ms(static_cast<double>(local));
    if (rate != samples.back().throughput_kbps)
      samples.push_back({emitted, rate});
  }
  return ThroughputTrace(std::move(samples), dur_ms, trace.name(), trace.source(), /*require_positive=*/false);
}

}  // namespace abr5g

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "abr5g/errors.hpp"
#include "abr5g/observation.hpp"
#include "abr5g/qoe.hpp"
#include "abr5g/trace.hpp"

namespace abr5g {

struct SimConfig {
  double chunk_duration_s = 2.0;
  double buffer_capacity_s = 24.0;
  std::int64_t pause_on_full_ms = 2000;
  std::int64_t link_rtt_ms = 80;
  double payload_efficiency = 0.95;
  int total_chunks = 390;  // 13-minute video in 2 s chunks

  void validate() const {
    if (chunk_duration_s <= 0 || buffer_capacity_s <= 0 || pause_on_full_ms <= 0 || link_rtt_ms < 0 ||
        payload_efficiency <= 0 || payload_efficiency > 1 || total_chunks <= 0)
      throw InvalidSpec("invalid simulator config");
    if (buffer_capacity_s < chunk_duration_s) throw InvalidSpec("buffer capacity below chunk duration");
  }
};

// Optional per-chunk size overrides keyed by (chunk index, rung).
using ChunkSizeManifest = std::map<std::pair<int, int>, double>;

inline double chunk_size_bits(const BitrateLadder& ladder, int rung, const SimConfig& config,
                              int chunk_index = -1, const ChunkSizeManifest* manifest = nullptr) {
  const auto& rep = ladder.at(rung);  // throws InvalidRung
  if (manifest != nullptr && chunk_index >= 0) {
    auto it = manifest->find({chunk_index, rung});
    if (it != manifest->end()) return it->second;
  }
  return rep.bitrate_kbps * 1000.0 * config.chunk_duration_s;
}

struct StreamSession {
  double clock_s = 0.0;
  double buffer_s = 0.0;
  int next_chunk = 0;
  std::optional<int> last_rung;
  double cursor_s = 0.0;  // seconds into the (looped) trace
};

inline void reset(StreamSession& session) { session = StreamSession{}; }

struct ChunkOutcome {
  int rung = 0;
  double download_time_s = 0.0;
  double rebuffer_s = 0.0;
  double pause_s = 0.0;
  double buffer_after_s = 0.0;
  double chunk_bits = 0.0;
};

// Fetch one chunk: solve the piecewise-constant link for the download time,
// evolve the buffer, and drain in pause_on_full steps while over capacity.
inline ChunkOutcome download_chunk(StreamSession& session, const ThroughputTrace& trace, int rung,
                                   const BitrateLadder& ladder, const SimConfig& config,
                                   const ChunkSizeManifest* manifest = nullptr) {
  if (session.next_chunk >= config.total_chunks) throw SessionComplete("all chunks fetched");
  const double bits = chunk_size_bits(ladder, rung, config, session.next_chunk, manifest);
  const double rtt_s = static_cast<double>(config.link_rtt_ms) / 1000.0;
  const double delta =
      trace.time_to_deliver_s(session.cursor_s + rtt_s, bits / config.payload_efficiency);
  const double download_time = rtt_s + delta;

  ChunkOutcome out;
  out.rung = rung;
  out.chunk_bits = bits;
  out.download_time_s = download_time;
  out.rebuffer_s = std::max(0.0, download_time - session.buffer_s);
  session.buffer_s = std::max(session.buffer_s - download_time, 0.0) + config.chunk_duration_s;

  double pause_total = 0.0;
  const double pause_step = static_cast<double>(config.pause_on_full_ms) / 1000.0;
  while (session.buffer_s > config.buffer_capacity_s) {
    session.buffer_s -= pause_step;  // playback continues during the pause
    pause_total += pause_step;
  }
  if (session.buffer_s < 0) session.buffer_s = 0;
  out.pause_s = pause_total;
  out.buffer_after_s = session.buffer_s;

  session.clock_s += download_time + pause_total;
  session.cursor_s += download_time + pause_total;
  session.last_rung = rung;
  ++session.next_chunk;
  return out;
}

using PolicyFn = std::function<int(const Observation&)>;

struct SessionResult {
  SessionRecord record;
  std::vector<ChunkOutcome> outcomes;
  std::vector<Observation> observations;  // state seen before each decision
};

// Play the whole video: consult the policy before each chunk, fetch it,
// update the observation history. Deterministic given its inputs.
inline SessionResult run_session(const ThroughputTrace& trace, const PolicyFn& policy,
                                 const BitrateLadder& ladder, const SimConfig& config,
                                 const ChunkSizeManifest* manifest = nullptr) {
  config.validate();
  StreamSession session;
  SessionResult result;
  Observation obs;
  obs.next_chunk_bits.resize(static_cast<std::size_t>(ladder.size()));
  for (int chunk = 0; chunk < config.total_chunks; ++chunk) {
    obs.buffer_s = session.buffer_s;
    obs.chunks_remaining = config.total_chunks - chunk;
    obs.last_rung = session.last_rung;
    for (int r = 0; r < ladder.size(); ++r)
      obs.next_chunk_bits[static_cast<std::size_t>(r)] = chunk_size_bits(ladder, r, config, chunk, manifest);

    const int rung = policy(obs);
    if (rung < 0 || rung >= ladder.size())
      throw PolicyFault("policy returned rung " + std::to_string(rung) + " for chunk " + std::to_string(chunk));

    result.observations.push_back(obs);
    const ChunkOutcome out = download_chunk(session, trace, rung, ladder, config, manifest);
    obs.push_history(out.chunk_bits / out.download_time_s / 1000.0, out.download_time_s);
    result.outcomes.push_back(out);
    result.record.chunks.push_back({out.rung, out.rebuffer_s});
  }
  return result;
}

// One CSV row per chunk, stable formatting for reproducible logs.
inline std::string session_log_csv(const SessionResult& result) {
  std::ostringstream out;
  out << "chunk,rung,bits,download_time_s,rebuffer_s,pause_s,buffer_after_s\n";
  out.precision(9);
  for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
    const auto& c = result.outcomes[i];
    out << i << ',' << c.rung << ',' << c.chunk_bits << ',' << c.download_time_s << ',' << c.rebuffer_s << ','
        << c.pause_s << ',' << c.buffer_after_s << '\n';
  }
  return out.str();
}

}  // namespace abr5g

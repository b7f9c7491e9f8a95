#include <doctest.h>

#include <random>

#include "abr5g/sim.hpp"
#include "oracles.hpp"

using namespace abr5g;

namespace {

const BitrateLadder kLadder = BitrateLadder::uhd10();

SimConfig default_config() {
  SimConfig c;
  return c;
}

ThroughputTrace constant_trace(double kbps, std::int64_t duration_ms = 60'000) {
  return ThroughputTrace({{0, kbps}}, duration_ms);
}

}  // namespace

TEST_CASE("chunk_size_bits") {
  SimConfig c = default_config();
  CHECK(chunk_size_bits(kLadder, 7, c) == doctest::Approx(36'000'000.0));
  CHECK(chunk_size_bits(kLadder, 0, c) == doctest::Approx(200'000.0));
  CHECK_THROWS_AS(chunk_size_bits(kLadder, 10, c), InvalidRung);

  ChunkSizeManifest manifest{{{7, 9}, 70'000'000.0}};
  CHECK(chunk_size_bits(kLadder, 9, c, 7, &manifest) == doctest::Approx(70'000'000.0));
  CHECK(chunk_size_bits(kLadder, 9, c, 8, &manifest) == doctest::Approx(75'000'000.0));
}

TEST_CASE("download_chunk worked examples") {
  SimConfig c = default_config();
  c.payload_efficiency = 1.0;
  auto trace = constant_trace(36'000);

  SUBCASE("healthy buffer") {
    StreamSession s;
    s.buffer_s = 3.0;
    auto out = download_chunk(s, trace, 7, kLadder, c);
    CHECK(out.download_time_s == doctest::Approx(1.08));
    CHECK(out.rebuffer_s == doctest::Approx(0.0));
    CHECK(out.buffer_after_s == doctest::Approx(3.92));
  }

  SUBCASE("stall") {
    StreamSession s;
    s.buffer_s = 0.5;
    auto out = download_chunk(s, trace, 7, kLadder, c);
    CHECK(out.rebuffer_s == doctest::Approx(0.58));
    CHECK(out.buffer_after_s == doctest::Approx(2.0));
  }

  SUBCASE("pause drain") {
    // near-instant download against a very fast link
    auto fast = constant_trace(400'000);
    c.link_rtt_ms = 80;
    StreamSession s;
    s.buffer_s = 23.5;
    auto out = download_chunk(s, fast, 0, kLadder, c);
    CHECK(out.download_time_s < 0.2);
    CHECK(out.pause_s == doctest::Approx(2.0));
    CHECK(out.buffer_after_s == doctest::Approx(23.5 - out.download_time_s + 2.0 - 2.0));
    CHECK(out.buffer_after_s <= c.buffer_capacity_s);
  }
}

TEST_CASE("session completion guard") {
  SimConfig c = default_config();
  c.total_chunks = 1;
  auto trace = constant_trace(50'000);
  StreamSession s;
  download_chunk(s, trace, 0, kLadder, c);
  CHECK_THROWS_AS(download_chunk(s, trace, 0, kLadder, c), SessionComplete);
}

TEST_CASE("reset restores a fresh session") {
  SimConfig c = default_config();
  auto trace = constant_trace(50'000);
  StreamSession s;
  download_chunk(s, trace, 3, kLadder, c);
  reset(s);
  CHECK(s.buffer_s == 0.0);
  CHECK(s.clock_s == 0.0);
  CHECK(s.next_chunk == 0);
  CHECK(!s.last_rung.has_value());

  // reset-then-run equals a fresh run
  auto out1 = download_chunk(s, trace, 3, kLadder, c);
  StreamSession fresh;
  auto out2 = download_chunk(fresh, trace, 3, kLadder, c);
  CHECK(out1.download_time_s == out2.download_time_s);
  CHECK(out1.buffer_after_s == out2.buffer_after_s);
}

TEST_CASE("run_session with an oversupplied link") {
  SimConfig c = default_config();
  c.total_chunks = 50;
  auto trace = constant_trace(200'000);
  auto result = run_session(trace, [](const Observation&) { return 0; }, kLadder, c);
  CHECK(result.record.chunks.size() == 50);
  // startup delay counts as the first chunk's stall; afterwards the buffer
  // never empties on a 200 Mbps link
  CHECK(result.record.chunks[0].rebuffer_s == doctest::Approx(result.outcomes[0].download_time_s));
  for (std::size_t i = 1; i < result.record.chunks.size(); ++i) {
    CHECK(result.record.chunks[i].rung == 0);
    CHECK(result.record.chunks[i].rebuffer_s == 0.0);
  }
}

TEST_CASE("dead-air prefix stalls the first chunk") {
  SimConfig c = default_config();
  c.total_chunks = 5;
  ThroughputTrace trace({{0, 0.0}, {10'000, 100'000.0}}, 20'000);
  auto result = run_session(trace, [](const Observation&) { return 9; }, kLadder, c);
  CHECK(result.record.chunks[0].rebuffer_s >= 10.0 - 0.001);
}

TEST_CASE("run_session determinism") {
  SimConfig c = default_config();
  c.total_chunks = 60;
  ThroughputTrace trace({{0, 30'000}, {5'000, 2'000}, {9'000, 80'000}}, 15'000);
  auto policy = [](const Observation& obs) { return obs.buffer_s > 10 ? 7 : 2; };
  auto a = run_session(trace, policy, kLadder, c);
  auto b = run_session(trace, policy, kLadder, c);
  REQUIRE(a.outcomes.size() == b.outcomes.size());
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    CHECK(a.outcomes[i].download_time_s == b.outcomes[i].download_time_s);
    CHECK(a.outcomes[i].buffer_after_s == b.outcomes[i].buffer_after_s);
  }
  CHECK(session_log_csv(a) == session_log_csv(b));
}

TEST_CASE("policy fault aborts with a diagnostic") {
  SimConfig c = default_config();
  c.total_chunks = 3;
  auto trace = constant_trace(50'000);
  CHECK_THROWS_AS(run_session(trace, [](const Observation&) { return 12; }, kLadder, c), PolicyFault);
}

TEST_CASE("buffer stays within bounds at every decision") {
  SimConfig c = default_config();
  c.total_chunks = 120;
  ThroughputTrace trace({{0, 500'000}, {30'000, 1'000}, {45'000, 250'000}}, 60'000);
  auto result = run_session(trace, [](const Observation& obs) {
    CHECK(obs.buffer_s >= 0.0);
    CHECK(obs.buffer_s <= 24.0 + 1e-9);
    return 4;
  }, kLadder, c);
  for (const auto& out : result.outcomes) CHECK(out.buffer_after_s <= 24.0 + 1e-9);
}

TEST_CASE("clock accounting closes") {
  SimConfig c = default_config();
  c.total_chunks = 80;
  ThroughputTrace trace({{0, 60'000}, {20'000, 4'000}, {35'000, 150'000}}, 50'000);
  StreamSession s;
  double dl_sum = 0.0, pause_sum = 0.0, rebuf_sum = 0.0;
  for (int i = 0; i < c.total_chunks; ++i) {
    auto out = download_chunk(s, trace, 5, kLadder, c);
    dl_sum += out.download_time_s;
    pause_sum += out.pause_s;
    rebuf_sum += out.rebuffer_s;
  }
  CHECK(s.clock_s == doctest::Approx(dl_sum + pause_sum).epsilon(1e-9));
  // played media + residual buffer = chunks fetched; wall clock = played + stalls
  const double played = s.clock_s - rebuf_sum + 0.0;
  const double media = static_cast<double>(c.total_chunks) * c.chunk_duration_s;
  CHECK(played + s.buffer_s == doctest::Approx(media).epsilon(1e-6));
}

TEST_CASE("raising a rung never shortens its download") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> buf(0.0, 24.0);
  std::uniform_real_distribution<double> kbps(500.0, 100'000.0);
  for (int iter = 0; iter < 100; ++iter) {
    SimConfig c = default_config();
    ThroughputTrace trace({{0, kbps(rng)}, {3'000, kbps(rng)}, {7'000, kbps(rng)}}, 12'000);
    const double b = buf(rng);
    double prev_dl = 0.0;
    for (int r = 0; r < 10; ++r) {
      StreamSession s;
      s.buffer_s = b;
      auto out = download_chunk(s, trace, r, kLadder, c);
      CHECK(out.download_time_s >= prev_dl - 1e-12);
      prev_dl = out.download_time_s;
    }
  }
}

TEST_CASE("scaling the trace up never slows a download") {
  SimConfig c = default_config();
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> kbps(1'000.0, 50'000.0);
  for (int iter = 0; iter < 50; ++iter) {
    const double a = kbps(rng), b = kbps(rng);
    ThroughputTrace base({{0, a}, {4'000, b}}, 9'000);
    ThroughputTrace scaled({{0, 2 * a}, {4'000, 2 * b}}, 9'000);
    for (int r = 0; r < 10; ++r) {
      StreamSession s1, s2;
      s1.buffer_s = s2.buffer_s = 12.0;
      auto o1 = download_chunk(s1, base, r, kLadder, c);
      auto o2 = download_chunk(s2, scaled, r, kLadder, c);
      CHECK(o2.download_time_s <= o1.download_time_s + 1e-12);
      CHECK(o2.download_time_s >= static_cast<double>(c.link_rtt_ms) / 1000.0);
    }
  }
}

TEST_CASE("closed-form download matches the 1ms packet oracle") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> kbps(1'000.0, 120'000.0);
  std::uniform_real_distribution<double> start(0.0, 20.0);
  std::uniform_int_distribution<int> rung(0, 9);
  SimConfig c = default_config();
  for (int iter = 0; iter < 1000; ++iter) {
    ThroughputTrace trace({{0, kbps(rng)}, {2'000, kbps(rng)}, {5'500, kbps(rng)}}, 8'000);
    const int r = rung(rng);
    const double cursor = start(rng);
    StreamSession s;
    s.cursor_s = cursor;
    s.buffer_s = 10.0;
    auto out = download_chunk(s, trace, r, kLadder, c);
    const double oracle_dl = oracle::brute_force_download_time_s(
        trace, cursor, chunk_size_bits(kLadder, r, c), static_cast<double>(c.link_rtt_ms) / 1000.0,
        c.payload_efficiency);
    CHECK(std::abs(out.download_time_s - oracle_dl) <= 0.002);
  }
}

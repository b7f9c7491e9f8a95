#pragma once

#include <array>
#include <optional>
#include <vector>

namespace abr5g {

inline constexpr int kHistoryLen = 8;

// What a policy sees before each chunk decision. Histories hold the most
// recent entry last and are zero-padded while fewer chunks have elapsed.
struct Observation {
  double buffer_s = 0.0;
  std::array<double, kHistoryLen> past_throughputs_kbps{};
  std::array<double, kHistoryLen> past_download_times_s{};
  std::vector<double> next_chunk_bits;  // one entry per rung
  int chunks_remaining = 0;
  std::optional<int> last_rung;

  void push_history(double throughput_kbps, double download_time_s) {
    for (int i = 0; i + 1 < kHistoryLen; ++i) {
      past_throughputs_kbps[static_cast<std::size_t>(i)] = past_throughputs_kbps[static_cast<std::size_t>(i + 1)];
      past_download_times_s[static_cast<std::size_t>(i)] = past_download_times_s[static_cast<std::size_t>(i + 1)];
    }
    past_throughputs_kbps[kHistoryLen - 1] = throughput_kbps;
    past_download_times_s[kHistoryLen - 1] = download_time_s;
  }
};

}  // namespace abr5g

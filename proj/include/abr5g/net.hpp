#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "abr5g/errors.hpp"
#include "abr5g/observation.hpp"
#include "abr5g/qoe.hpp"

namespace abr5g {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// --- Input conditioning ------------------------------------------------------

struct NormalizerContext {
  double max_chunk_bits = 1.0;
  double buffer_capacity_s = 24.0;
  int total_chunks = 390;
  int max_resolution = 4320;

  static NormalizerContext from(const BitrateLadder& ladder, double chunk_duration_s, double buffer_capacity_s,
                                int total_chunks) {
    NormalizerContext ctx;
    ctx.max_chunk_bits = ladder.at(ladder.top_rung()).bitrate_kbps * 1000.0 * chunk_duration_s;
    ctx.buffer_capacity_s = buffer_capacity_s;
    ctx.total_chunks = total_chunks;
    ctx.max_resolution = ladder.at(ladder.top_rung()).vertical_resolution;
    return ctx;
  }
};

struct NormalizedObs {
  Vec throughputs;  // kbps / 10 Mbps
  Vec download_times;  // seconds / 10 s
  Vec chunk_sizes;  // bits / largest ladder chunk
  double buffer = 0.0;  // fraction of capacity
  double remaining = 0.0;  // fraction of total chunks
  double last_quality = 0.0;  // q_hd(last rung) / 50
};

inline NormalizedObs normalize_observation(const Observation& obs, const BitrateLadder& ladder,
                                           const NormalizerContext& ctx) {
  NormalizedObs n;
  n.throughputs.resize(kHistoryLen);
  n.download_times.resize(kHistoryLen);
  for (int i = 0; i < kHistoryLen; ++i) {
    n.throughputs[i] = obs.past_throughputs_kbps[static_cast<std::size_t>(i)] / 10000.0;
    n.download_times[i] = obs.past_download_times_s[static_cast<std::size_t>(i)] / 10.0;
  }
  n.chunk_sizes.resize(static_cast<Eigen::Index>(obs.next_chunk_bits.size()));
  for (std::size_t i = 0; i < obs.next_chunk_bits.size(); ++i)
    n.chunk_sizes[static_cast<Eigen::Index>(i)] = obs.next_chunk_bits[i] / ctx.max_chunk_bits;
  n.buffer = obs.buffer_s / ctx.buffer_capacity_s;
  n.remaining = static_cast<double>(obs.chunks_remaining) / static_cast<double>(ctx.total_chunks);
  n.last_quality = obs.last_rung
                       ? static_cast<double>(ladder.at(*obs.last_rung).vertical_resolution) /
                             static_cast<double>(ctx.max_resolution)
                       : 0.0;
  return n;
}

// --- Network -----------------------------------------------------------------

struct NetShape {
  int units = 320;
  int kernel = 4;
  int hist_len = kHistoryLen;
  int n_sizes = 10;   // one per ladder rung
  int head_dim = 10;  // actions for the actor, 1 for the critic

  int kernel_for(int len) const { return std::min(kernel, len); }
  int conv_positions(int len) const { return len - kernel_for(len) + 1; }
  int merged_dim() const {
    return units * (conv_positions(hist_len) * 2 + conv_positions(n_sizes)) + 3 * units;
  }
};

// One conv bank / dense trunk with a linear head. Actor and critic are two
// independent instances of this.
struct TrunkParams {
  NetShape shape;
  Mat conv_tp_w, conv_dt_w, conv_sz_w;  // units x kernel
  Vec conv_tp_b, conv_dt_b, conv_sz_b;
  Vec dense_buf_w, dense_buf_b, dense_rem_w, dense_rem_b, dense_rung_w, dense_rung_b;
  Mat hidden_w;  // units x merged
  Vec hidden_b;
  Mat head_w;  // head_dim x units
  Vec head_b;

  explicit TrunkParams(const NetShape& s) : shape(s) {
    const int u = s.units;
    conv_tp_w.setZero(u, s.kernel_for(s.hist_len));
    conv_dt_w.setZero(u, s.kernel_for(s.hist_len));
    conv_sz_w.setZero(u, s.kernel_for(s.n_sizes));
    conv_tp_b.setZero(u);
    conv_dt_b.setZero(u);
    conv_sz_b.setZero(u);
    dense_buf_w.setZero(u);
    dense_buf_b.setZero(u);
    dense_rem_w.setZero(u);
    dense_rem_b.setZero(u);
    dense_rung_w.setZero(u);
    dense_rung_b.setZero(u);
    hidden_w.setZero(u, s.merged_dim());
    hidden_b.setZero(u);
    head_w.setZero(s.head_dim, u);
    head_b.setZero(s.head_dim);
  }

  template <typename F>
  void for_each_block(F&& f) {
    f(conv_tp_w);
    f(conv_tp_b);
    f(conv_dt_w);
    f(conv_dt_b);
    f(conv_sz_w);
    f(conv_sz_b);
    f(dense_buf_w);
    f(dense_buf_b);
    f(dense_rem_w);
    f(dense_rem_b);
    f(dense_rung_w);
    f(dense_rung_b);
    f(hidden_w);
    f(hidden_b);
    f(head_w);
    f(head_b);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    const_cast<TrunkParams*>(this)->for_each_block([&](auto& m) { f(const_cast<const std::decay_t<decltype(m)>&>(m)); });
  }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for_each_block([&](const auto& m) { n += m.size(); });
    return n;
  }

  Vec flatten() const {
    Vec out(param_count());
    Eigen::Index off = 0;
    for_each_block([&](const auto& m) {
      out.segment(off, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
      off += m.size();
    });
    return out;
  }

  void unflatten(const Vec& flat) {
    Eigen::Index off = 0;
    for_each_block([&](auto& m) {
      Eigen::Map<Vec>(m.data(), m.size()) = flat.segment(off, m.size());
      off += m.size();
    });
  }

  void init_uniform(std::mt19937_64& rng, double half_range = 0.05) {
    std::uniform_real_distribution<double> dist(-half_range, half_range);
    for_each_block([&](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    });
  }

  void accumulate(const TrunkParams& other, double scale = 1.0) {
    conv_tp_w += scale * other.conv_tp_w;
    conv_tp_b += scale * other.conv_tp_b;
    conv_dt_w += scale * other.conv_dt_w;
    conv_dt_b += scale * other.conv_dt_b;
    conv_sz_w += scale * other.conv_sz_w;
    conv_sz_b += scale * other.conv_sz_b;
    dense_buf_w += scale * other.dense_buf_w;
    dense_buf_b += scale * other.dense_buf_b;
    dense_rem_w += scale * other.dense_rem_w;
    dense_rem_b += scale * other.dense_rem_b;
    dense_rung_w += scale * other.dense_rung_w;
    dense_rung_b += scale * other.dense_rung_b;
    hidden_w += scale * other.hidden_w;
    hidden_b += scale * other.hidden_b;
    head_w += scale * other.head_w;
    head_b += scale * other.head_b;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_block([&](const auto& m) { ok = ok && m.allFinite(); });
    return ok;
  }
};

// Intermediate activations kept for the backward pass.
struct TrunkActivations {
  NormalizedObs input;
  Mat conv_tp_a, conv_dt_a, conv_sz_a;  // units x positions, post-ReLU
  Vec dense_buf_a, dense_rem_a, dense_rung_a;
  Vec merged;
  Vec hidden_a;  // post-ReLU
  Vec output;    // linear head output (logits or value)
};

namespace detail {

inline Mat conv1d_relu(const Mat& w, const Vec& b, const Vec& x) {
  const int k = static_cast<int>(w.cols());
  const int positions = static_cast<int>(x.size()) - k + 1;
  Mat out(w.rows(), positions);
  for (int p = 0; p < positions; ++p) out.col(p) = (w * x.segment(p, k) + b).cwiseMax(0.0);
  return out;
}

}  // namespace detail

inline TrunkActivations trunk_forward(const TrunkParams& net, const NormalizedObs& obs) {
  TrunkActivations act;
  act.input = obs;
  act.conv_tp_a = detail::conv1d_relu(net.conv_tp_w, net.conv_tp_b, obs.throughputs);
  act.conv_dt_a = detail::conv1d_relu(net.conv_dt_w, net.conv_dt_b, obs.download_times);
  act.conv_sz_a = detail::conv1d_relu(net.conv_sz_w, net.conv_sz_b, obs.chunk_sizes);
  act.dense_buf_a = (net.dense_buf_w * obs.buffer + net.dense_buf_b).cwiseMax(0.0);
  act.dense_rem_a = (net.dense_rem_w * obs.remaining + net.dense_rem_b).cwiseMax(0.0);
  act.dense_rung_a = (net.dense_rung_w * obs.last_quality + net.dense_rung_b).cwiseMax(0.0);

  act.merged.resize(net.shape.merged_dim());
  Eigen::Index off = 0;
  auto append = [&](const auto& m) {
    act.merged.segment(off, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
    off += m.size();
  };
  append(act.conv_tp_a);
  append(act.conv_dt_a);
  append(act.conv_sz_a);
  append(act.dense_buf_a);
  append(act.dense_rem_a);
  append(act.dense_rung_a);

  act.hidden_a = (net.hidden_w * act.merged + net.hidden_b).cwiseMax(0.0);
  act.output = net.head_w * act.hidden_a + net.head_b;
  if (!act.output.allFinite()) throw NumericalFault("non-finite network output");
  return act;
}

// Backward pass for dLoss/d(head output); accumulates parameter gradients
// into `grad` (same shape as the network).
inline void trunk_backward(const TrunkParams& net, const TrunkActivations& act, const Vec& d_output,
                           TrunkParams& grad) {
  grad.head_w.noalias() += d_output * act.hidden_a.transpose();
  grad.head_b += d_output;

  Vec d_hidden = net.head_w.transpose() * d_output;
  d_hidden = d_hidden.cwiseProduct((act.hidden_a.array() > 0.0).cast<double>().matrix());

  grad.hidden_w.noalias() += d_hidden * act.merged.transpose();
  grad.hidden_b += d_hidden;

  Vec d_merged = net.hidden_w.transpose() * d_hidden;

  Eigen::Index off = 0;
  auto take = [&](Eigen::Index n) {
    Vec v = d_merged.segment(off, n);
    off += n;
    return v;
  };

  auto back_conv = [&](const Mat& w, const Mat& a, const Vec& x, Mat& gw, Vec& gb) {
    const int k = static_cast<int>(w.cols());
    Vec d_flat = take(a.size());
    Eigen::Map<const Mat> d_conv(d_flat.data(), a.rows(), a.cols());
    for (int p = 0; p < a.cols(); ++p) {
      Vec d = d_conv.col(p).cwiseProduct((a.col(p).array() > 0.0).cast<double>().matrix());
      gw.noalias() += d * x.segment(p, k).transpose();
      gb += d;
    }
  };
  back_conv(net.conv_tp_w, act.conv_tp_a, act.input.throughputs, grad.conv_tp_w, grad.conv_tp_b);
  back_conv(net.conv_dt_w, act.conv_dt_a, act.input.download_times, grad.conv_dt_w, grad.conv_dt_b);
  back_conv(net.conv_sz_w, act.conv_sz_a, act.input.chunk_sizes, grad.conv_sz_w, grad.conv_sz_b);

  auto back_dense = [&](const Vec& a, double x, Vec& gw, Vec& gb) {
    Vec d = take(a.size()).cwiseProduct((a.array() > 0.0).cast<double>().matrix());
    gw += d * x;
    gb += d;
  };
  back_dense(act.dense_buf_a, act.input.buffer, grad.dense_buf_w, grad.dense_buf_b);
  back_dense(act.dense_rem_a, act.input.remaining, grad.dense_rem_w, grad.dense_rem_b);
  back_dense(act.dense_rung_a, act.input.last_quality, grad.dense_rung_w, grad.dense_rung_b);
}

inline Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

// Actor + critic pair. The critic shares the trunk shape but not parameters.
struct PolicyNetwork {
  NetShape actor_shape;
  NetShape critic_shape;
  TrunkParams actor;
  TrunkParams critic;

  PolicyNetwork(int n_actions, int units = 320, int kernel = 4)
      : actor_shape{units, kernel, kHistoryLen, n_actions, n_actions},
        critic_shape{units, kernel, kHistoryLen, n_actions, 1},
        actor(actor_shape),
        critic(critic_shape) {}

  void init(std::uint64_t seed, double half_range = 0.05) {
    std::mt19937_64 rng(seed);
    actor.init_uniform(rng, half_range);
    critic.init_uniform(rng, half_range);
  }

  int n_actions() const { return actor_shape.head_dim; }

  // (action distribution, value)
  std::pair<Vec, double> forward(const NormalizedObs& obs) const {
    const Vec logits = trunk_forward(actor, obs).output;
    const Vec probs = softmax(logits);
    const double value = trunk_forward(critic, obs).output[0];
    return {probs, value};
  }

  Vec action_distribution(const NormalizedObs& obs) const { return softmax(trunk_forward(actor, obs).output); }
  double value(const NormalizedObs& obs) const { return trunk_forward(critic, obs).output[0]; }
};

// --- Gradient verification ---------------------------------------------------

struct GradientCheckReport {
  double max_rel_error_actor = 0.0;
  double max_rel_error_critic = 0.0;
  int coordinates_checked = 0;
  bool passed(double tolerance = 1e-4) const {
    return max_rel_error_actor < tolerance && max_rel_error_critic < tolerance;
  }
};

// Analytic gradient of the actor log-prob and the critic value against
// central finite differences on a random parameter subset.
inline GradientCheckReport gradient_check(PolicyNetwork& net, const NormalizedObs& obs, int action,
                                          int coords_per_net = 200, std::uint64_t seed = 1,
                                          double epsilon = 1e-6, const Vec* corrupt_actor_grad = nullptr) {
  GradientCheckReport report;
  std::mt19937_64 rng(seed);

  // analytic: d log pi(a) / d theta
  TrunkParams actor_grad(net.actor_shape);
  {
    const TrunkActivations act = trunk_forward(net.actor, obs);
    const Vec probs = softmax(act.output);
    Vec d_logits = -probs;
    d_logits[action] += 1.0;
    trunk_backward(net.actor, act, d_logits, actor_grad);
  }
  Vec actor_grad_flat = actor_grad.flatten();
  if (corrupt_actor_grad != nullptr) actor_grad_flat = *corrupt_actor_grad;

  TrunkParams critic_grad(net.critic_shape);
  {
    const TrunkActivations act = trunk_forward(net.critic, obs);
    trunk_backward(net.critic, act, Vec::Ones(1), critic_grad);
  }
  const Vec critic_grad_flat = critic_grad.flatten();

  auto check = [&](TrunkParams& params, const Vec& grad_flat, auto scalar_fn, double& max_rel) {
    Vec flat = params.flatten();
    std::uniform_int_distribution<Eigen::Index> pick(0, flat.size() - 1);
    for (int c = 0; c < coords_per_net; ++c) {
      const Eigen::Index i = pick(rng);
      const double orig = flat[i];
      flat[i] = orig + epsilon;
      params.unflatten(flat);
      const double hi = scalar_fn();
      flat[i] = orig - epsilon;
      params.unflatten(flat);
      const double lo = scalar_fn();
      flat[i] = orig;
      params.unflatten(flat);
      const double fd = (hi - lo) / (2.0 * epsilon);
      const double denom = std::max({std::abs(fd), std::abs(grad_flat[i]), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - grad_flat[i]) / denom);
      ++report.coordinates_checked;
    }
  };

  check(
      net.actor, actor_grad_flat,
      [&] { return std::log(softmax(trunk_forward(net.actor, obs).output)[action]); },
      report.max_rel_error_actor);
  check(
      net.critic, critic_grad_flat, [&] { return trunk_forward(net.critic, obs).output[0]; },
      report.max_rel_error_critic);
  return report;
}

}  // namespace abr5g

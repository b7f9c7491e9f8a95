#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "abr5g/errors.hpp"
#include "abr5g/net.hpp"
#include "abr5g/policy.hpp"
#include "abr5g/sim.hpp"
#include "abr5g/synth.hpp"
#include "abr5g/trace.hpp"

namespace abr5g {

struct TrainConfig {
  double actor_lr = 5.0e-5;
  double critic_lr = 1.0e-3;
  double gamma = 0.99;
  double entropy_weight_start = 1.0;
  double entropy_weight_end = 0.1;
  int workers = 8;
  int epochs = 2000;  // desk-scale default; the full run uses 120000
  double training_mu = 80.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 100;
  double window_s = 240.0;
  double lte_fraction = 0.1;  // share of rollouts drawn from the LTE-like pool
  int units = 320;
  int kernel = 4;
  double rmsprop_decay = 0.99;
  double rmsprop_eps = 1e-6;
  double validation_mu = 24.0;

  double entropy_weight(int epoch) const {
    if (epochs <= 1) return entropy_weight_end;
    const double t = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(epochs - 1));
    return entropy_weight_start + (entropy_weight_end - entropy_weight_start) * t;
  }
};

struct TrajectoryStep {
  Observation observation;
  NormalizedObs normalized;
  int action = 0;
  double reward = 0.0;
  double value = 0.0;
  double rebuffer_s = 0.0;
};

using Trajectory = std::vector<TrajectoryStep>;

enum class RolloutMode { sample, argmax };

// Play one session with the network choosing rungs. Reward per step is the
// training chunk reward (QoE_hd with the configured mu).
inline Trajectory rollout(const PolicyNetwork& net, const ThroughputTrace& trace, const BitrateLadder& ladder,
                          const SimConfig& config, RolloutMode mode, std::uint64_t seed, double mu = 80.0) {
  const QoeMetric metric = QoeMetric::builtin(MetricId::hd);
  const NormalizerContext ctx =
      NormalizerContext::from(ladder, config.chunk_duration_s, config.buffer_capacity_s, config.total_chunks);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(config.total_chunks));
  StreamSession session;
  Observation obs;
  obs.next_chunk_bits.resize(static_cast<std::size_t>(ladder.size()));
  for (int chunk = 0; chunk < config.total_chunks; ++chunk) {
    obs.buffer_s = session.buffer_s;
    obs.chunks_remaining = config.total_chunks - chunk;
    obs.last_rung = session.last_rung;
    for (int r = 0; r < ladder.size(); ++r)
      obs.next_chunk_bits[static_cast<std::size_t>(r)] = chunk_size_bits(ladder, r, config);

    TrajectoryStep step;
    step.observation = obs;
    step.normalized = normalize_observation(obs, ladder, ctx);
    const auto [probs, value] = net.forward(step.normalized);
    step.value = value;
    if (mode == RolloutMode::argmax) {
      Eigen::Index best = 0;
      probs.maxCoeff(&best);
      step.action = static_cast<int>(best);
    } else {
      const double u = unit(rng);
      double acc = 0.0;
      step.action = net.n_actions() - 1;
      for (int a = 0; a < net.n_actions(); ++a) {
        acc += probs[a];
        if (u < acc) {
          step.action = a;
          break;
        }
      }
    }

    const std::optional<int> prev = session.last_rung;
    const ChunkOutcome out = download_chunk(session, trace, step.action, ladder, config);
    step.reward = chunk_reward(metric, ladder, prev, step.action, out.rebuffer_s, mu);
    step.rebuffer_s = out.rebuffer_s;
    obs.push_history(out.chunk_bits / out.download_time_s / 1000.0, out.download_time_s);
    traj.push_back(std::move(step));
  }
  return traj;
}

struct UpdateStats {
  double mean_entropy = 0.0;
  double mean_advantage = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_reward = 0.0;
  bool skipped = false;
};

namespace detail {

// Per-trajectory gradient of the synchronous A3C objective.
inline void trajectory_gradients(const PolicyNetwork& net, const Trajectory& traj, double gamma,
                                 double entropy_weight, TrunkParams& actor_grad, TrunkParams& critic_grad,
                                 UpdateStats& stats) {
  const std::size_t n = traj.size();
  std::vector<double> returns(n);
  double g = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    g = traj[i].reward + gamma * g;
    returns[i] = g;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& step = traj[i];
    const double advantage = returns[i] - step.value;

    const TrunkActivations actor_act = trunk_forward(net.actor, step.normalized);
    const Vec probs = softmax(actor_act.output);
    const Vec log_probs = probs.array().max(1e-300).log();
    const double entropy = -(probs.cwiseProduct(log_probs)).sum();

    // minimize -A log pi(a) - beta H(pi)
    Vec d_logits = advantage * probs;
    d_logits[step.action] -= advantage;
    d_logits += entropy_weight * probs.cwiseProduct((log_probs.array() + entropy).matrix());
    trunk_backward(net.actor, actor_act, d_logits, actor_grad);

    const TrunkActivations critic_act = trunk_forward(net.critic, step.normalized);
    const double v = critic_act.output[0];
    trunk_backward(net.critic, critic_act, Vec::Constant(1, 2.0 * (v - returns[i])), critic_grad);

    stats.mean_entropy += entropy;
    stats.mean_advantage += advantage;
    stats.actor_loss += -advantage * log_probs[step.action] - entropy_weight * entropy;
    stats.critic_loss += (v - returns[i]) * (v - returns[i]);
    stats.mean_reward += step.reward;
  }
}

}  // namespace detail

// RMSProp state for one trunk.
struct RmsPropState {
  Vec mean_square;
  void ensure(Eigen::Index n) {
    if (mean_square.size() != n) mean_square = Vec::Zero(n);
  }
  void apply(TrunkParams& params, const TrunkParams& grad, double lr, double decay, double eps) {
    Vec flat = params.flatten();
    const Vec g = grad.flatten();
    ensure(flat.size());
    mean_square = decay * mean_square + (1.0 - decay) * g.cwiseProduct(g);
    flat -= lr * g.cwiseQuotient((mean_square.array() + eps).sqrt().matrix());
    params.unflatten(flat);
  }
};

struct Optimizer {
  RmsPropState actor;
  RmsPropState critic;
};

// Sum gradients over all trajectories, apply once. NaN/Inf gradients skip
// the update and report it.
inline UpdateStats a3c_update(PolicyNetwork& net, const std::vector<Trajectory>& trajectories,
                              const TrainConfig& config, Optimizer& opt, double entropy_weight) {
  if (trajectories.empty()) throw NoData("no trajectories");
  TrunkParams actor_grad(net.actor_shape);
  TrunkParams critic_grad(net.critic_shape);
  UpdateStats stats;
  std::size_t steps = 0;
  for (const auto& traj : trajectories) {
    detail::trajectory_gradients(net, traj, config.gamma, entropy_weight, actor_grad, critic_grad, stats);
    steps += traj.size();
  }
  if (steps > 0) {
    stats.mean_entropy /= static_cast<double>(steps);
    stats.mean_advantage /= static_cast<double>(steps);
    stats.mean_reward /= static_cast<double>(steps);
  }
  if (!actor_grad.all_finite() || !critic_grad.all_finite()) {
    stats.skipped = true;
    return stats;
  }
  opt.actor.apply(net.actor, actor_grad, config.actor_lr, config.rmsprop_decay, config.rmsprop_eps);
  opt.critic.apply(net.critic, critic_grad, config.critic_lr, config.rmsprop_decay, config.rmsprop_eps);
  return stats;
}

// Parallel variant: per-trajectory gradients are computed on worker threads,
// then summed in a fixed order so results stay bit-identical.
inline UpdateStats a3c_update_parallel(PolicyNetwork& net, const std::vector<Trajectory>& trajectories,
                                       const TrainConfig& config, Optimizer& opt, double entropy_weight) {
  if (trajectories.empty()) throw NoData("no trajectories");
  const std::size_t n = trajectories.size();
  std::vector<TrunkParams> actor_grads(n, TrunkParams(net.actor_shape));
  std::vector<TrunkParams> critic_grads(n, TrunkParams(net.critic_shape));
  std::vector<UpdateStats> parts(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      detail::trajectory_gradients(net, trajectories[i], config.gamma, entropy_weight, actor_grads[i],
                                   critic_grads[i], parts[i]);
    });
  }
  for (auto& t : threads) t.join();

  TrunkParams actor_grad(net.actor_shape);
  TrunkParams critic_grad(net.critic_shape);
  UpdateStats stats;
  std::size_t steps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    actor_grad.accumulate(actor_grads[i]);
    critic_grad.accumulate(critic_grads[i]);
    stats.mean_entropy += parts[i].mean_entropy;
    stats.mean_advantage += parts[i].mean_advantage;
    stats.actor_loss += parts[i].actor_loss;
    stats.critic_loss += parts[i].critic_loss;
    stats.mean_reward += parts[i].mean_reward;
    steps += trajectories[i].size();
  }
  if (steps > 0) {
    stats.mean_entropy /= static_cast<double>(steps);
    stats.mean_advantage /= static_cast<double>(steps);
    stats.mean_reward /= static_cast<double>(steps);
  }
  if (!actor_grad.all_finite() || !critic_grad.all_finite()) {
    stats.skipped = true;
    return stats;
  }
  opt.actor.apply(net.actor, actor_grad, config.actor_lr, config.rmsprop_decay, config.rmsprop_eps);
  opt.critic.apply(net.critic, critic_grad, config.critic_lr, config.rmsprop_decay, config.rmsprop_eps);
  return stats;
}

// --- Checkpoints -------------------------------------------------------------

struct Checkpoint {
  int epoch = 0;
  double validation_qoe = 0.0;
  std::uint64_t seed = 0;
  int n_actions = 10;
  int units = 320;
  int kernel = 4;
  Vec actor_params;
  Vec critic_params;
  Vec actor_ms;  // RMSProp accumulators, kept for bit-exact resume
  Vec critic_ms;
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated checkpoint");
  return v;
}
inline void write_vec(std::ostream& out, const Vec& v) {
  write_pod<std::int64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double)) * v.size());
}
inline Vec read_vec(std::istream& in) {
  const auto n = read_pod<std::int64_t>(in);
  Vec v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double)) * n);
  if (!in) throw Error("truncated checkpoint");
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointMagic = 0x41354743;  // "A5GC"
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  detail::write_pod(out, kCheckpointMagic);
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod<std::int32_t>(out, ckpt.epoch);
  detail::write_pod(out, ckpt.validation_qoe);
  detail::write_pod(out, ckpt.seed);
  detail::write_pod<std::int32_t>(out, ckpt.n_actions);
  detail::write_pod<std::int32_t>(out, ckpt.units);
  detail::write_pod<std::int32_t>(out, ckpt.kernel);
  detail::write_vec(out, ckpt.actor_params);
  detail::write_vec(out, ckpt.critic_params);
  detail::write_vec(out, ckpt.actor_ms);
  detail::write_vec(out, ckpt.critic_ms);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  if (detail::read_pod<std::uint32_t>(in) != kCheckpointMagic) throw Error("not a checkpoint file");
  if (detail::read_pod<std::uint32_t>(in) != kCheckpointVersion) throw Error("unsupported checkpoint version");
  Checkpoint c;
  c.epoch = detail::read_pod<std::int32_t>(in);
  c.validation_qoe = detail::read_pod<double>(in);
  c.seed = detail::read_pod<std::uint64_t>(in);
  c.n_actions = detail::read_pod<std::int32_t>(in);
  c.units = detail::read_pod<std::int32_t>(in);
  c.kernel = detail::read_pod<std::int32_t>(in);
  c.actor_params = detail::read_vec(in);
  c.critic_params = detail::read_vec(in);
  c.actor_ms = detail::read_vec(in);
  c.critic_ms = detail::read_vec(in);
  return c;
}

inline void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save_checkpoint(ckpt, out);
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return load_checkpoint(in);
}

inline Checkpoint make_checkpoint(const PolicyNetwork& net, const Optimizer& opt, int epoch,
                                  double validation_qoe, std::uint64_t seed) {
  Checkpoint c;
  c.epoch = epoch;
  c.validation_qoe = validation_qoe;
  c.seed = seed;
  c.n_actions = net.n_actions();
  c.units = net.actor_shape.units;
  c.kernel = net.actor_shape.kernel;
  c.actor_params = net.actor.flatten();
  c.critic_params = net.critic.flatten();
  c.actor_ms = opt.actor.mean_square;
  c.critic_ms = opt.critic.mean_square;
  return c;
}

inline PolicyNetwork network_from_checkpoint(const Checkpoint& c) {
  PolicyNetwork net(c.n_actions, c.units, c.kernel);
  net.actor.unflatten(c.actor_params);
  net.critic.unflatten(c.critic_params);
  return net;
}

// Evaluation-mode policy: argmax over the actor distribution.
class RlPolicy final : public DecisionPolicy {
 public:
  RlPolicy(PolicyNetwork net, BitrateLadder ladder, const SimConfig& config, std::string name = "rl")
      : net_(std::move(net)),
        ladder_(std::move(ladder)),
        ctx_(NormalizerContext::from(ladder_, config.chunk_duration_s, config.buffer_capacity_s,
                                     config.total_chunks)),
        name_(std::move(name)) {}

  int decide(const Observation& obs) override {
    Observation clipped = obs;
    // a checkpoint trained on a smaller ladder only sees its own rungs
    if (static_cast<int>(clipped.next_chunk_bits.size()) > net_.n_actions())
      clipped.next_chunk_bits.resize(static_cast<std::size_t>(net_.n_actions()));
    const Vec probs = net_.action_distribution(normalize_observation(clipped, ladder_, ctx_));
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return static_cast<int>(best);
  }
  const char* name() const override { return name_.c_str(); }

 private:
  PolicyNetwork net_;
  BitrateLadder ladder_;
  NormalizerContext ctx_;
  std::string name_;
};

// --- Training loop -----------------------------------------------------------

struct TrainingLogRow {
  int epoch = 0;
  double mean_reward = 0.0;
  double entropy = 0.0;
  double validation_qoe = 0.0;  // NaN when no validation ran this epoch
};

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::size_t best_index = 0;
  std::vector<TrainingLogRow> log;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline double validate_network(const PolicyNetwork& net, const std::vector<ThroughputTrace>& validation,
                               const BitrateLadder& ladder, const SimConfig& config, double mu) {
  double total = 0.0;
  for (const auto& trace : validation) {
    const Trajectory traj = rollout(net, trace, ladder, config, RolloutMode::argmax, 0, mu);
    SessionRecord record;
    for (const auto& s : traj) record.chunks.push_back({s.action, s.rebuffer_s});
    total += session_qoe(QoeMetric::builtin(MetricId::hd), ladder, record, mu);
  }
  return total / static_cast<double>(validation.size());
}

// One epoch = every worker rolls out one randomly chosen trace window, then
// a single synchronous update. Fully reproducible from the seed.
inline TrainResult train(const std::vector<ThroughputTrace>& primary_traces,
                         const std::vector<ThroughputTrace>& lte_traces,
                         const std::vector<ThroughputTrace>& validation_traces, const BitrateLadder& ladder,
                         const SimConfig& sim_config, const TrainConfig& config, PolicyNetwork* resume_net = nullptr,
                         Optimizer* resume_opt = nullptr, int start_epoch = 0) {
  if (primary_traces.empty()) throw NoData("empty training trace set");
  if (validation_traces.empty()) throw NoData("empty validation trace set");

  PolicyNetwork net = resume_net != nullptr ? *resume_net : PolicyNetwork(ladder.size(), config.units, config.kernel);
  Optimizer opt = resume_opt != nullptr ? *resume_opt : Optimizer{};
  if (resume_net == nullptr) net.init(config.seed);

  TrainResult result;
  auto checkpoint_now = [&](int epoch) {
    const double score = validate_network(net, validation_traces, ladder, sim_config, config.validation_mu);
    result.checkpoints.push_back(make_checkpoint(net, opt, epoch, score, config.seed));
    if (score > result.checkpoints[result.best_index].validation_qoe) result.best_index = result.checkpoints.size() - 1;
    return score;
  };

  if (start_epoch == 0) checkpoint_now(0);

  std::vector<Trajectory> trajectories(static_cast<std::size_t>(config.workers));
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(config.workers));
    for (int w = 0; w < config.workers; ++w) {
      threads.emplace_back([&, w] {
        std::mt19937_64 rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(w)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const bool use_lte = !lte_traces.empty() && unit(rng) < config.lte_fraction;
        const auto& pool = use_lte ? lte_traces : primary_traces;
        const auto idx = static_cast<std::size_t>(unit(rng) * static_cast<double>(pool.size())) % pool.size();
        const ThroughputTrace& src = pool[idx];
        const double start = unit(rng) * src.duration_s();
        const double window = std::min(config.window_s, src.duration_s());
        const ThroughputTrace win = slice_window(src, start, window);
        if (win.total_bits_per_loop() <= 0) {
          // all-dead window, fall back to the full trace
          trajectories[static_cast<std::size_t>(w)] =
              rollout(net, src, ladder, sim_config, RolloutMode::sample, rng(), config.training_mu);
        } else {
          trajectories[static_cast<std::size_t>(w)] =
              rollout(net, win, ladder, sim_config, RolloutMode::sample, rng(), config.training_mu);
        }
      });
    }
    for (auto& t : threads) t.join();

    const UpdateStats stats = a3c_update_parallel(net, trajectories, config, opt, config.entropy_weight(epoch));

    TrainingLogRow row;
    row.epoch = epoch + 1;
    row.mean_reward = stats.mean_reward;
    row.entropy = stats.mean_entropy;
    row.validation_qoe = std::numeric_limits<double>::quiet_NaN();
    if ((epoch + 1) % config.checkpoint_every == 0 || epoch + 1 == config.epochs)
      row.validation_qoe = checkpoint_now(epoch + 1);
    result.log.push_back(row);
  }
  if (resume_net != nullptr) *resume_net = net;
  if (resume_opt != nullptr) *resume_opt = opt;
  return result;
}

}  // namespace abr5g

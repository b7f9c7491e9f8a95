#include <doctest.h>

#include <cmath>
#include <sstream>

#include "abr5g/rl.hpp"

using namespace abr5g;

namespace {

const BitrateLadder kLadder = BitrateLadder::uhd10();

SimConfig short_config(int chunks = 30) {
  SimConfig c;
  c.total_chunks = chunks;
  return c;
}

ThroughputTrace constant_trace(double kbps, std::int64_t duration_ms = 60'000) {
  return ThroughputTrace({{0, kbps}}, duration_ms);
}

}  // namespace

TEST_CASE("argmax rollouts are deterministic and full length") {
  PolicyNetwork net(10, 24);
  net.init(5);
  const SimConfig config = short_config();
  const auto trace = constant_trace(50'000);
  const Trajectory a = rollout(net, trace, kLadder, config, RolloutMode::argmax, 1);
  const Trajectory b = rollout(net, trace, kLadder, config, RolloutMode::argmax, 2);
  REQUIRE(a.size() == static_cast<std::size_t>(config.total_chunks));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].action == b[i].action);
    CHECK(a[i].reward == b[i].reward);
  }
}

TEST_CASE("sampled rollouts are seed-deterministic") {
  PolicyNetwork net(10, 24);
  net.init(6);
  const SimConfig config = short_config();
  const auto trace = constant_trace(50'000);
  const Trajectory a = rollout(net, trace, kLadder, config, RolloutMode::sample, 42);
  const Trajectory b = rollout(net, trace, kLadder, config, RolloutMode::sample, 42);
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) identical = identical && a[i].action == b[i].action;
  CHECK(identical);
}

TEST_CASE("training reward arithmetic") {
  // top rung with no stall scores 50; a one-second stall swings it to -30
  const QoeMetric hd = QoeMetric::builtin(MetricId::hd);
  CHECK(chunk_reward(hd, kLadder, 9, 9, 0.0, 80.0) == doctest::Approx(50.0));
  CHECK(chunk_reward(hd, kLadder, 9, 9, 1.0, 80.0) == doctest::Approx(-30.0));
}

TEST_CASE("trajectory rewards with validation mu reproduce session_qoe") {
  PolicyNetwork net(10, 24);
  net.init(7);
  const SimConfig config = short_config();
  ThroughputTrace trace({{0, 9'000}, {8'000, 700}, {14'000, 30'000}}, 20'000);
  const Trajectory traj = rollout(net, trace, kLadder, config, RolloutMode::argmax, 0, 24.0);
  double reward_sum = 0.0;
  SessionRecord record;
  for (const auto& s : traj) {
    reward_sum += s.reward;
    record.chunks.push_back({s.action, s.rebuffer_s});
  }
  CHECK(reward_sum == doctest::Approx(session_qoe(QoeMetric::builtin(MetricId::hd), kLadder, record)).epsilon(1e-12));
}

TEST_CASE("zero advantages with zero entropy weight leave the actor unchanged") {
  PolicyNetwork net(10, 16);
  net.init(8);
  TrainConfig config;
  config.entropy_weight_start = config.entropy_weight_end = 0.0;

  // hand-build a trajectory whose returns equal the critic values
  std::mt19937_64 rng(9);
  Trajectory traj;
  const SimConfig sim = short_config(5);
  const auto trace = constant_trace(40'000);
  traj = rollout(net, trace, kLadder, sim, RolloutMode::argmax, 0);
  for (auto& step : traj) step.reward = 0.0;
  for (auto& step : traj) step.value = 0.0;
  // gamma-discounted returns of all-zero rewards are zero; force values to match
  PolicyNetwork before = net;
  // neutralize the critic so its own update has zero error too
  net.critic = TrunkParams(net.critic_shape);
  Optimizer opt;
  a3c_update(net, {traj}, config, opt, 0.0);
  CHECK((net.actor.flatten() - before.actor.flatten()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("entropy-only update raises policy entropy") {
  PolicyNetwork net(10, 16);
  net.init(10, 0.5);
  TrainConfig config;
  config.actor_lr = 1e-3;
  const SimConfig sim = short_config(8);
  const auto trace = constant_trace(40'000);
  Trajectory traj = rollout(net, trace, kLadder, sim, RolloutMode::sample, 3);
  // zero advantages: returns forced equal to values
  for (auto& step : traj) step.reward = 0.0;
  for (auto& step : traj) step.value = 0.0;

  auto entropy_of = [&](const PolicyNetwork& n) {
    double h = 0.0;
    for (const auto& step : traj) {
      const Vec p = n.action_distribution(step.normalized);
      for (int a = 0; a < p.size(); ++a)
        if (p[a] > 0) h -= p[a] * std::log(p[a]);
    }
    return h / static_cast<double>(traj.size());
  };
  const double before = entropy_of(net);
  PolicyNetwork frozen_critic = net;
  Optimizer opt;
  a3c_update(net, {traj}, config, opt, 1.0);
  CHECK(entropy_of(net) > before);
}

TEST_CASE("two-action bandit converges") {
  // fixed rewards (1, 0): the policy gradient should drive P(action 0) > 0.9
  PolicyNetwork net(2, 16);
  net.init(21);
  TrainConfig config;
  config.actor_lr = 1e-3;
  config.critic_lr = 1e-2;
  config.gamma = 1.0;
  config.entropy_weight_start = config.entropy_weight_end = 0.01;
  Optimizer opt;

  NormalizedObs obs;
  obs.throughputs = Vec::Zero(kHistoryLen);
  obs.download_times = Vec::Zero(kHistoryLen);
  obs.chunk_sizes = Vec::Constant(2, 0.5);
  obs.buffer = 0.5;
  obs.remaining = 0.5;
  obs.last_quality = 0.5;

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int updates = 0;
  double p0 = 0.0;
  for (; updates < 5000; ++updates) {
    const Vec probs = net.action_distribution(obs);
    p0 = probs[0];
    if (p0 > 0.9) break;
    TrajectoryStep step;
    step.normalized = obs;
    step.action = unit(rng) < probs[0] ? 0 : 1;
    step.reward = step.action == 0 ? 1.0 : 0.0;
    step.value = net.value(obs);
    a3c_update(net, {{step}}, config, opt, 0.01);
  }
  CHECK(p0 > 0.9);
  CHECK(updates < 5000);
}

TEST_CASE("checkpoint round trip is bit exact") {
  PolicyNetwork net(10, 24);
  net.init(31);
  Optimizer opt;
  opt.actor.mean_square = Vec::Random(net.actor.param_count()).cwiseAbs();
  opt.critic.mean_square = Vec::Random(net.critic.param_count()).cwiseAbs();
  const Checkpoint ckpt = make_checkpoint(net, opt, 17, -3.25, 99);
  std::stringstream buf;
  save_checkpoint(ckpt, buf);
  const Checkpoint loaded = load_checkpoint(buf);
  CHECK(loaded.epoch == 17);
  CHECK(loaded.validation_qoe == -3.25);
  CHECK(loaded.seed == 99);
  CHECK((loaded.actor_params - ckpt.actor_params).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.critic_params - ckpt.critic_params).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.actor_ms - ckpt.actor_ms).cwiseAbs().maxCoeff() == 0.0);

  const PolicyNetwork restored = network_from_checkpoint(loaded);
  CHECK((restored.actor.flatten() - net.actor.flatten()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training is reproducible and selects the best checkpoint") {
  TrainConfig config;
  config.epochs = 12;
  config.workers = 2;
  config.units = 16;
  config.checkpoint_every = 4;
  config.seed = 7;
  config.window_s = 30.0;
  SimConfig sim = short_config(10);
  const std::vector<ThroughputTrace> traces = {constant_trace(60'000)};
  const std::vector<ThroughputTrace> validation = {constant_trace(60'000)};

  const TrainResult a = train(traces, {}, validation, kLadder, sim, config);
  const TrainResult b = train(traces, {}, validation, kLadder, sim, config);
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    CHECK((a.checkpoints[i].actor_params - b.checkpoints[i].actor_params).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.checkpoints[i].validation_qoe == b.checkpoints[i].validation_qoe);
  }
  CHECK(a.best_index == b.best_index);
  CHECK(a.checkpoints[a.best_index].validation_qoe >= a.checkpoints[0].validation_qoe);

  CHECK_THROWS_AS(train({}, {}, validation, kLadder, sim, config), NoData);
}

#include <doctest.h>

#include <random>

#include "abr5g/net.hpp"
#include "abr5g/sim.hpp"

using namespace abr5g;

namespace {

const BitrateLadder kLadder = BitrateLadder::uhd10();

NormalizedObs random_obs(std::mt19937_64& rng, int n_sizes = 10) {
  std::uniform_real_distribution<double> u(0.0, 1.5);
  NormalizedObs obs;
  obs.throughputs = Vec::NullaryExpr(kHistoryLen, [&] { return u(rng); });
  obs.download_times = Vec::NullaryExpr(kHistoryLen, [&] { return u(rng); });
  obs.chunk_sizes = Vec::NullaryExpr(n_sizes, [&] { return u(rng); });
  obs.buffer = u(rng);
  obs.remaining = u(rng);
  obs.last_quality = u(rng);
  return obs;
}

}  // namespace

TEST_CASE("normalize_observation scaling") {
  SimConfig config;
  const NormalizerContext ctx =
      NormalizerContext::from(kLadder, config.chunk_duration_s, config.buffer_capacity_s, config.total_chunks);
  Observation obs;
  obs.next_chunk_bits.assign(10, 0.0);

  SUBCASE("zero observation maps to zero") {
    const NormalizedObs n = normalize_observation(obs, kLadder, ctx);
    CHECK(n.throughputs.isZero());
    CHECK(n.download_times.isZero());
    CHECK(n.chunk_sizes.isZero());
    CHECK(n.buffer == 0.0);
    CHECK(n.last_quality == 0.0);
  }

  SUBCASE("unit anchors") {
    obs.buffer_s = 24.0;
    obs.past_throughputs_kbps[kHistoryLen - 1] = 22'222.0;
    obs.last_rung = 9;
    obs.chunks_remaining = config.total_chunks;
    const NormalizedObs n = normalize_observation(obs, kLadder, ctx);
    CHECK(n.buffer == doctest::Approx(1.0));
    CHECK(n.throughputs[kHistoryLen - 1] == doctest::Approx(2.2222));
    CHECK(n.last_quality == doctest::Approx(1.0));
    CHECK(n.remaining == doctest::Approx(1.0));
  }
}

TEST_CASE("zero-parameter network gives a uniform policy and zero value") {
  PolicyNetwork net(10, 64);
  std::mt19937_64 rng(3);
  const auto [probs, value] = net.forward(random_obs(rng));
  for (int a = 0; a < 10; ++a) CHECK(probs[a] == doctest::Approx(0.1));
  CHECK(value == 0.0);
}

TEST_CASE("distribution always sums to one") {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 20; ++iter) {
    PolicyNetwork net(10, 32);
    net.init(static_cast<std::uint64_t>(iter), 0.5);
    const auto [probs, value] = net.forward(random_obs(rng));
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("flatten/unflatten round trip") {
  PolicyNetwork net(10, 32);
  net.init(9);
  const Vec flat = net.actor.flatten();
  TrunkParams copy(net.actor_shape);
  copy.unflatten(flat);
  CHECK((copy.flatten() - flat).cwiseAbs().maxCoeff() == 0.0);
  CHECK(flat.size() == net.actor.param_count());
}

TEST_CASE("gradient check passes on fresh networks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    PolicyNetwork net(10, 24);
    net.init(static_cast<std::uint64_t>(100 + trial));
    const NormalizedObs obs = random_obs(rng);
    const auto report = gradient_check(net, obs, trial % 10, 200, static_cast<std::uint64_t>(trial));
    CHECK(report.max_rel_error_actor < 1e-4);
    CHECK(report.max_rel_error_critic < 1e-4);
    CHECK(report.coordinates_checked == 400);
  }
}

TEST_CASE("critic head bias gradient is exactly one on a zero network") {
  PolicyNetwork net(10, 16);
  TrunkParams grad(net.critic_shape);
  std::mt19937_64 rng(15);
  const TrunkActivations act = trunk_forward(net.critic, random_obs(rng));
  trunk_backward(net.critic, act, Vec::Ones(1), grad);
  CHECK(grad.head_b[0] == 1.0);
}

TEST_CASE("sign-flipped gradient fails the check") {
  PolicyNetwork net(10, 24);
  net.init(77);
  std::mt19937_64 rng(16);
  const NormalizedObs obs = random_obs(rng);

  TrunkParams actor_grad(net.actor_shape);
  const TrunkActivations act = trunk_forward(net.actor, obs);
  const Vec probs = softmax(act.output);
  Vec d_logits = -probs;
  d_logits[3] += 1.0;
  trunk_backward(net.actor, act, d_logits, actor_grad);
  const Vec corrupted = -actor_grad.flatten();

  const auto report = gradient_check(net, obs, 3, 200, 5, 1e-6, &corrupted);
  CHECK(report.max_rel_error_actor >= 1e-4);
}

TEST_CASE("small ladders shrink the conv kernel") {
  PolicyNetwork net(2, 16);
  net.init(1);
  std::mt19937_64 rng(17);
  const auto [probs, value] = net.forward(random_obs(rng, 2));
  CHECK(probs.size() == 2);
  CHECK(probs.sum() == doctest::Approx(1.0));
}

TEST_CASE("forward is deterministic") {
  PolicyNetwork net(10, 32);
  net.init(123);
  std::mt19937_64 rng(18);
  const NormalizedObs obs = random_obs(rng);
  const auto [p1, v1] = net.forward(obs);
  const auto [p2, v2] = net.forward(obs);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(v1 == v2);
}

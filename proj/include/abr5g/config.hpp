#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abr5g/errors.hpp"
#include "abr5g/policy.hpp"
#include "abr5g/qoe.hpp"
#include "abr5g/sim.hpp"
#include "abr5g/synth.hpp"
#include "abr5g/rl.hpp"

namespace abr5g {

using json = nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InvalidSpec(path + ": " + e.what());
  }
  return j;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

// --- Synthetic spec ----------------------------------------------------------

inline SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec spec;
  spec.name = j.value("name", "synthetic");
  if (!j.contains("states") || !j["states"].is_array()) throw InvalidSpec("synthetic spec needs `states`");
  for (const auto& s : j["states"]) {
    BandState b;
    b.label = s.value("label", "");
    b.mean_kbps = s.value("mean_kbps", 0.0);
    b.stddev_kbps = s.value("stddev_kbps", 0.0);
    b.mean_dwell_s = s.value("mean_dwell_s", 1.0);
    spec.states.push_back(b);
  }
  if (!j.contains("transition")) throw InvalidSpec("synthetic spec needs `transition`");
  for (const auto& row : j["transition"]) spec.transition.push_back(row.get<std::vector<double>>());
  spec.sample_interval_ms = j.value("sample_interval_ms", std::int64_t{1000});
  spec.duration_s = j.value("duration_s", 1800.0);
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.validate();
  return spec;
}

// --- Sim config --------------------------------------------------------------

inline SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  c.chunk_duration_s = j.value("chunk_duration_s", c.chunk_duration_s);
  c.buffer_capacity_s = j.value("buffer_capacity_s", c.buffer_capacity_s);
  c.pause_on_full_ms = j.value("pause_on_full_ms", c.pause_on_full_ms);
  c.link_rtt_ms = j.value("link_rtt_ms", c.link_rtt_ms);
  c.payload_efficiency = j.value("payload_efficiency", c.payload_efficiency);
  c.total_chunks = j.value("total_chunks", c.total_chunks);
  c.validate();
  return c;
}

// --- Ladder / metric overrides ----------------------------------------------

inline BitrateLadder ladder_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "uhd10") return BitrateLadder::uhd10();
    if (s == "legacy6") return BitrateLadder::legacy6();
    throw InvalidSpec("unknown ladder `" + s + "`");
  }
  std::vector<Representation> reps;
  for (const auto& r : j) {
    Representation rep;
    rep.vertical_resolution = r.at("resolution").get<int>();
    rep.bitrate_kbps = r.at("bitrate_kbps").get<double>();
    reps.push_back(rep);
  }
  return BitrateLadder(std::move(reps));
}

inline QoeMetric metric_from_json(MetricId id, const json& overrides) {
  QoeMetric m = QoeMetric::builtin(id);
  const auto key = to_string(id);
  if (overrides.contains(key)) {
    const auto& o = overrides[key];
    m.mu = o.value("mu", m.mu);
    if (o.contains("scores")) m.score_table = o["scores"].get<std::vector<double>>();
  }
  return m;
}

// --- Train config ------------------------------------------------------------

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.actor_lr = j.value("actor_lr", c.actor_lr);
  c.critic_lr = j.value("critic_lr", c.critic_lr);
  c.gamma = j.value("gamma", c.gamma);
  c.entropy_weight_start = j.value("entropy_weight_start", c.entropy_weight_start);
  c.entropy_weight_end = j.value("entropy_weight_end", c.entropy_weight_end);
  c.workers = j.value("workers", c.workers);
  c.epochs = j.value("epochs", c.epochs);
  c.training_mu = j.value("training_mu", c.training_mu);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.window_s = j.value("window_s", c.window_s);
  c.lte_fraction = j.value("lte_fraction", c.lte_fraction);
  c.units = j.value("units", c.units);
  c.kernel = j.value("kernel", c.kernel);
  c.validation_mu = j.value("validation_mu", c.validation_mu);
  if (c.actor_lr <= 0 || c.critic_lr <= 0 || c.gamma <= 0 || c.gamma > 1)
    throw InvalidSpec("invalid training hyperparameters");
  return c;
}

// --- Experiment plan ---------------------------------------------------------

struct ScenarioSpec {
  std::string name;
  std::string trace_file;                 // CSV trace, or
  std::optional<SyntheticSpec> synthetic;  // generated on the fly
  double window_start_s = 0.0;
  std::optional<double> window_duration_s;
};

struct AlgorithmSpec {
  std::string kind;  // bb | rb | bola | mpc | robust_mpc | rl
  std::string name;  // display name, defaults to kind
  std::string checkpoint;  // rl only
  std::string ladder = "uhd10";
  json params;
};

struct ExperimentPlan {
  std::vector<ScenarioSpec> scenarios;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<MetricId> metrics;
  SimConfig sim;
  std::string reference;  // algorithm name normalization anchors to
  std::string rl_baseline;  // name of the original-config RL row, optional
  std::uint64_t seed = 0;
};

inline ExperimentPlan plan_from_json(const json& j) {
  ExperimentPlan plan;
  if (!j.contains("scenarios") || j["scenarios"].empty()) throw InvalidSpec("plan needs scenarios");
  if (!j.contains("algorithms") || j["algorithms"].empty()) throw InvalidSpec("plan needs algorithms");
  for (const auto& s : j["scenarios"]) {
    ScenarioSpec sc;
    sc.name = s.at("name").get<std::string>();
    if (s.contains("trace")) sc.trace_file = s["trace"].get<std::string>();
    if (s.contains("synthetic")) sc.synthetic = synthetic_spec_from_json(s["synthetic"]);
    if (sc.trace_file.empty() && !sc.synthetic) throw InvalidSpec("scenario `" + sc.name + "` needs a trace or spec");
    sc.window_start_s = s.value("window_start_s", 0.0);
    if (s.contains("window_duration_s")) sc.window_duration_s = s["window_duration_s"].get<double>();
    plan.scenarios.push_back(std::move(sc));
  }
  for (const auto& a : j["algorithms"]) {
    AlgorithmSpec al;
    al.kind = a.at("kind").get<std::string>();
    al.name = a.value("name", al.kind);
    al.checkpoint = a.value("checkpoint", "");
    al.ladder = a.value("ladder", "uhd10");
    al.params = a.value("params", json::object());
    plan.algorithms.push_back(std::move(al));
  }
  for (std::size_t i = 0; i < plan.scenarios.size(); ++i)
    for (std::size_t k = i + 1; k < plan.scenarios.size(); ++k)
      if (plan.scenarios[i].name == plan.scenarios[k].name) throw InvalidSpec("duplicate scenario name");
  for (std::size_t i = 0; i < plan.algorithms.size(); ++i)
    for (std::size_t k = i + 1; k < plan.algorithms.size(); ++k)
      if (plan.algorithms[i].name == plan.algorithms[k].name) throw InvalidSpec("duplicate algorithm name");
  if (j.contains("metrics"))
    for (const auto& m : j["metrics"]) plan.metrics.push_back(metric_from_string(m.get<std::string>()));
  else
    plan.metrics = {MetricId::hd};
  if (j.contains("sim")) plan.sim = sim_config_from_json(j["sim"]);
  plan.reference = j.value("reference", "");
  plan.rl_baseline = j.value("rl_baseline", "");
  plan.seed = j.value("seed", std::uint64_t{0});
  return plan;
}

// Instantiate a policy for one session.
inline std::shared_ptr<DecisionPolicy> make_policy(const AlgorithmSpec& spec, const BitrateLadder& ladder,
                                                   const SimConfig& sim) {
  if (spec.kind == "bb") {
    BbParams p;
    p.reservoir_s = spec.params.value("reservoir_s", p.reservoir_s);
    p.cushion_s = spec.params.value("cushion_s", p.cushion_s);
    return std::make_shared<BbPolicy>(ladder.top_rung(), p);
  }
  if (spec.kind == "rb") {
    RbParams p;
    p.window = spec.params.value("window", p.window);
    return std::make_shared<RbPolicy>(ladder, p);
  }
  if (spec.kind == "bola") return std::make_shared<BolaPolicy>(ladder, sim.buffer_capacity_s);
  if (spec.kind == "mpc" || spec.kind == "robust_mpc") {
    MpcParams p;
    p.robust = spec.kind == "robust_mpc";
    p.horizon = spec.params.value("horizon", p.horizon);
    p.chunk_duration_s = sim.chunk_duration_s;
    p.buffer_capacity_s = sim.buffer_capacity_s;
    if (spec.params.contains("metric")) p.metric = metric_from_string(spec.params["metric"].get<std::string>());
    return std::make_shared<MpcPolicy>(ladder, p);
  }
  if (spec.kind == "rl") {
    if (spec.checkpoint.empty()) throw InvalidSpec("rl policy `" + spec.name + "` needs a checkpoint");
    const Checkpoint ckpt = load_checkpoint_file(spec.checkpoint);
    if (ckpt.n_actions != ladder.size())
      throw InvalidSpec("checkpoint `" + spec.checkpoint + "` was trained for a " +
                        std::to_string(ckpt.n_actions) + "-rung ladder");
    return std::make_shared<RlPolicy>(network_from_checkpoint(ckpt), ladder, sim, spec.name);
  }
  throw InvalidSpec("unknown policy kind `" + spec.kind + "`");
}

}  // namespace abr5g

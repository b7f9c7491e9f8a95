// abr5g: batch experiment runner for trace-driven ABR evaluation.
//
// Subcommands: ingest, synth, eval, train, report. Exit codes: 0 success,
// 2 usage/config error, 3 partial failure.

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "abr5g/config.hpp"
#include "abr5g/report.hpp"
#include "abr5g/rl.hpp"

namespace fs = std::filesystem;
using namespace abr5g;

namespace {

int log_level() {
  const char* env = std::getenv("ABR5G_LOG");
  if (env == nullptr) return 1;
  const std::string v = env;
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& paths, const std::string& extension) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.path().extension() == extension) out.push_back(entry.path());
      std::sort(out.begin(), out.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

// --- ingest ------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& inputs, const std::string& out_dir, bool to_mahi, bool from_mahi) {
  fs::create_directories(out_dir);
  const auto files = expand_inputs(inputs, from_mahi ? ".mahi" : ".csv");
  if (files.empty()) {
    std::cerr << "ingest: no input files\n";
    return 2;
  }
  for (const auto& file : files) {
    try {
      ThroughputTrace trace = from_mahi
                                  ? from_mahimahi(mahimahi_from_text(read_text_file(file.string())), 1000, 0,
                                                  file.stem().string())
                                  : parse_csv(read_text_file(file.string()), file.stem().string());
      if (to_mahi) {
        const fs::path out = fs::path(out_dir) / (file.stem().string() + ".mahi");
        write_text_file(out.string(), mahimahi_to_text(to_mahimahi(trace)));
        std::cout << file.string() << " -> " << out.string() << " (" << trace.duration_s() << " s)\n";
      } else {
        const fs::path out = fs::path(out_dir) / (file.stem().string() + ".csv");
        write_text_file(out.string(), to_csv(trace));
        double min_kbps = 1e300, max_kbps = 0.0, sum = 0.0;
        for (const auto& s : trace.samples()) {
          min_kbps = std::min(min_kbps, s.throughput_kbps);
          max_kbps = std::max(max_kbps, s.throughput_kbps);
          sum += s.throughput_kbps;
        }
        std::cout << file.string() << ": duration " << trace.duration_s() << " s, mean "
                  << sum / static_cast<double>(trace.samples().size()) << " kbps, min " << min_kbps << " kbps, max "
                  << max_kbps << " kbps\n";
      }
    } catch (const Error& e) {
      std::cerr << "ingest: " << file.string() << ": " << e.what() << '\n';
      return 2;
    }
  }
  return 0;
}

// --- synth -------------------------------------------------------------------

int cmd_synth(const std::string& config_path, int count, std::uint64_t seed, const std::string& out_dir) {
  try {
    SyntheticSpec spec = synthetic_spec_from_json(load_json_file(config_path));
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
      SyntheticSpec s = spec;
      s.seed = mix_seed(seed, static_cast<std::uint64_t>(i), 0);
      const ThroughputTrace trace = synthesize(s);
      std::ostringstream name;
      name << spec.name << "_" << std::setw(3) << std::setfill('0') << i << ".csv";
      write_text_file((fs::path(out_dir) / name.str()).string(), to_csv(trace));
      std::cout << name.str() << ": " << trace.duration_s() << " s\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "synth: " << e.what() << '\n';
    return 2;
  }
}

// --- eval --------------------------------------------------------------------

struct EvalCell {
  std::size_t scenario_idx = 0;
  std::size_t algorithm_idx = 0;
  SessionResult session;
  bool failed = false;
  std::string error;
};

int cmd_eval(const std::string& plan_path, const std::string& out_dir, std::uint64_t seed_override, bool has_seed,
             int jobs) {
  ExperimentPlan plan;
  std::vector<ThroughputTrace> scenario_traces;
  std::vector<std::pair<std::shared_ptr<DecisionPolicy>, BitrateLadder>> probe;  // construction check only
  try {
    plan = plan_from_json(load_json_file(plan_path));
    if (has_seed) plan.seed = seed_override;
    const fs::path plan_dir = fs::path(plan_path).parent_path();
    for (auto& sc : plan.scenarios) {
      ThroughputTrace trace = sc.synthetic ? synthesize(*sc.synthetic)
                                           : parse_csv(read_text_file((plan_dir / sc.trace_file).string()), sc.name);
      double start = sc.window_start_s;
      if (sc.window_duration_s) {
        trace = slice_window(trace, start, *sc.window_duration_s);
        if (trace.total_bits_per_loop() <= 0) throw DeadTrace("scenario `" + sc.name + "` window is all dead air");
      }
      scenario_traces.push_back(std::move(trace));
    }
    // fail fast on bad policies (e.g. missing checkpoints) before running
    for (const auto& algo : plan.algorithms) {
      const BitrateLadder ladder = ladder_from_json(json(algo.ladder));
      probe.emplace_back(make_policy(algo, ladder, plan.sim), ladder);
    }
  } catch (const Error& e) {
    std::cerr << "eval: " << e.what() << '\n';
    return 2;
  }

  fs::create_directories(fs::path(out_dir) / "logs");

  std::vector<EvalCell> cells;
  for (std::size_t s = 0; s < plan.scenarios.size(); ++s)
    for (std::size_t a = 0; a < plan.algorithms.size(); ++a) cells.push_back({s, a, {}, false, ""});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      EvalCell& cell = cells[i];
      const auto& algo = plan.algorithms[cell.algorithm_idx];
      try {
        const BitrateLadder ladder = ladder_from_json(json(algo.ladder));
        auto policy = make_policy(algo, ladder, plan.sim);
        cell.session = run_session(scenario_traces[cell.scenario_idx], as_policy_fn(policy), ladder, plan.sim);
      } catch (const Error& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    }
  };
  {
    std::vector<std::thread> pool;
    for (int j = 0; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  bool any_failed = false;
  std::vector<ResultRow> rows;
  for (const auto& cell : cells) {
    const auto& sc = plan.scenarios[cell.scenario_idx];
    const auto& algo = plan.algorithms[cell.algorithm_idx];
    const BitrateLadder ladder = ladder_from_json(json(algo.ladder));
    if (cell.failed) {
      any_failed = true;
      log_info("eval: " + sc.name + " x " + algo.name + " failed: " + cell.error);
      for (const auto metric : plan.metrics) {
        ResultRow row;
        row.scenario = sc.name;
        row.algorithm = algo.name;
        row.kind = algo.kind;
        row.metric = to_string(metric);
        row.failed = true;
        rows.push_back(row);
      }
      continue;
    }
    write_text_file((fs::path(out_dir) / "logs" / (sc.name + "__" + algo.name + ".csv")).string(),
                    session_log_csv(cell.session));
    const SessionSummary summary = summarize_session(cell.session.record);
    for (const auto metric : plan.metrics) {
      ResultRow row;
      row.scenario = sc.name;
      row.algorithm = algo.name;
      row.kind = algo.kind;
      row.metric = to_string(metric);
      row.qoe = session_qoe(QoeMetric::builtin(metric), ladder, cell.session.record);
      row.total_rebuffer_s = summary.total_rebuffer_s;
      row.mean_rung = summary.mean_rung;
      row.switches_down = summary.switches_down;
      row.switches_up = summary.switches_up;
      rows.push_back(row);
    }
  }

  const bool normalized = normalize_rows(rows, plan.reference);
  if (!plan.reference.empty() && !normalized)
    log_info("eval: reference `" + plan.reference + "` missing or zero; reporting raw scores");
  write_text_file((fs::path(out_dir) / "results.csv").string(), results_csv(rows));
  for (const auto& [metric, data] : plot_data_by_metric(rows))
    write_text_file((fs::path(out_dir) / ("plot_" + metric + ".csv")).string(), data);

  json summary;
  summary["plan"] = plan_path;
  summary["seed"] = plan.seed;
  summary["reference"] = plan.reference;
  summary["normalized"] = normalized;
  json windows = json::object();
  for (const auto& sc : plan.scenarios)
    windows[sc.name] = {{"start_s", sc.window_start_s},
                        {"duration_s", sc.window_duration_s ? json(*sc.window_duration_s) : json()}};
  summary["windows"] = windows;
  if (!plan.reference.empty()) {
    const Aggregates agg = compute_aggregates(rows, plan.reference, plan.rl_baseline);
    summary["mean_improvement_vs_best_conventional"] = agg.vs_best_conventional;
    if (agg.rl_baseline_cells > 0) summary["mean_improvement_vs_rl_baseline"] = agg.vs_rl_baseline;
  }
  write_text_file((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");

  return any_failed ? 3 : 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_dir, bool force, const std::string& resume) {
  json j;
  TrainConfig config;
  SimConfig sim;
  BitrateLadder ladder = BitrateLadder::uhd10();
  std::vector<ThroughputTrace> primary, lte, validation;
  try {
    j = load_json_file(config_path);
    config = train_config_from_json(j);
    if (j.contains("sim")) sim = sim_config_from_json(j["sim"]);
    if (j.contains("ladder")) ladder = ladder_from_json(j["ladder"]);
    const fs::path base = fs::path(config_path).parent_path();
    auto load_traces = [&](const char* key, std::vector<ThroughputTrace>& dst) {
      if (!j.contains(key)) return;
      std::vector<std::string> paths;
      for (const auto& p : j[key]) paths.push_back((base / p.get<std::string>()).string());
      for (const auto& f : expand_inputs(paths, ".csv"))
        dst.push_back(parse_csv(read_text_file(f.string()), f.stem().string()));
    };
    load_traces("traces", primary);
    load_traces("lte_traces", lte);
    load_traces("validation", validation);
    if (primary.empty()) throw NoData("train config lists no training traces");
    if (validation.empty()) throw NoData("train config lists no validation traces");
  } catch (const Error& e) {
    std::cerr << "train: " << e.what() << '\n';
    return 2;
  }

  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
    std::cerr << "train: output directory `" << out_dir << "` is not empty (use --force)\n";
    return 2;
  }
  fs::create_directories(out_dir);

  PolicyNetwork net(ladder.size(), config.units, config.kernel);
  Optimizer opt;
  int start_epoch = 0;
  PolicyNetwork* resume_net = nullptr;
  Optimizer* resume_opt = nullptr;
  if (!resume.empty()) {
    try {
      const Checkpoint ckpt = load_checkpoint_file(resume);
      net = network_from_checkpoint(ckpt);
      opt.actor.mean_square = ckpt.actor_ms;
      opt.critic.mean_square = ckpt.critic_ms;
      start_epoch = ckpt.epoch;
      resume_net = &net;
      resume_opt = &opt;
      log_info("train: resuming from epoch " + std::to_string(start_epoch));
    } catch (const Error& e) {
      std::cerr << "train: " << e.what() << '\n';
      return 2;
    }
  }

  const TrainResult result = train(primary, lte, validation, ladder, sim, config, resume_net, resume_opt, start_epoch);

  std::ostringstream log;
  log << "epoch,mean_reward,entropy,validation_qoe\n";
  log.precision(9);
  for (const auto& row : result.log) {
    log << row.epoch << ',' << row.mean_reward << ',' << row.entropy << ',';
    if (!std::isnan(row.validation_qoe)) log << row.validation_qoe;
    log << '\n';
  }
  write_text_file((fs::path(out_dir) / "training_log.csv").string(), log.str());

  for (const auto& ckpt : result.checkpoints) {
    std::ostringstream name;
    name << "ckpt_" << std::setw(6) << std::setfill('0') << ckpt.epoch << ".bin";
    save_checkpoint_file(ckpt, (fs::path(out_dir) / name.str()).string());
  }
  save_checkpoint_file(result.checkpoints[result.best_index], (fs::path(out_dir) / "best.bin").string());
  std::cout << "best checkpoint: epoch " << result.checkpoints[result.best_index].epoch << ", validation QoE "
            << result.checkpoints[result.best_index].validation_qoe << '\n';
  return 0;
}

// --- report ------------------------------------------------------------------

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    while (fields.size() < 11) fields.emplace_back();
    ResultRow r;
    r.scenario = fields[0];
    r.algorithm = fields[1];
    r.kind = fields[2];
    r.metric = fields[3];
    r.qoe = std::stod(fields[4]);
    r.total_rebuffer_s = std::stod(fields[5]);
    r.mean_rung = std::stod(fields[6]);
    r.switches_down = std::stoi(fields[7]);
    r.switches_up = std::stoi(fields[8]);
    if (!fields[9].empty()) r.normalized = std::stod(fields[9]);
    r.failed = fields[10] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

int cmd_report(const std::string& results_dir, const std::string& reference, const std::string& out_dir) {
  std::vector<ResultRow> rows;
  try {
    rows = parse_results_csv(read_text_file((fs::path(results_dir) / "results.csv").string()));
  } catch (const std::exception& e) {
    std::cerr << "report: " << e.what() << '\n';
    return 2;
  }
  const std::string out = out_dir.empty() ? results_dir : out_dir;
  fs::create_directories(out);
  const bool normalized = normalize_rows(rows, reference);
  if (!reference.empty() && !normalized)
    std::cerr << "report: warning: reference `" << reference << "` missing or zero, reporting raw scores\n";
  write_text_file((fs::path(out) / "normalized.csv").string(), results_csv(rows));
  for (const auto& [metric, data] : plot_data_by_metric(rows))
    write_text_file((fs::path(out) / ("plot_" + metric + ".csv")).string(), data);
  std::cout << "wrote " << rows.size() << " rows" << (normalized ? " (normalized)" : " (raw)") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-driven ABR streaming simulator and evaluation toolkit"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert throughput CSVs to canonical traces");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out = "traces";
  bool to_mahi = false, from_mahi = false;
  ingest->add_option("paths", ingest_inputs, "CSV files or directories")->required();
  ingest->add_option("--out", ingest_out, "output directory");
  ingest->add_flag("--to-mahimahi", to_mahi, "emit Mahimahi packet-opportunity traces");
  ingest->add_flag("--from-mahimahi", from_mahi, "read Mahimahi traces instead of CSV");

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic traces from a spec");
  std::string synth_config;
  int synth_count = 1;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "traces";
  synth->add_option("--config", synth_config, "synthetic spec JSON")->required();
  synth->add_option("--count", synth_count, "number of traces");
  synth->add_option("--seed", synth_seed, "master seed");
  synth->add_option("--out", synth_out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "run a scenario x algorithm evaluation matrix");
  std::string eval_plan, eval_out = "results";
  std::uint64_t eval_seed = 0;
  int jobs = 1;
  eval->add_option("--plan", eval_plan, "experiment plan JSON")->required();
  eval->add_option("--out", eval_out, "output directory");
  auto* eval_seed_opt = eval->add_option("--seed", eval_seed, "seed override");
  eval->add_option("--jobs", jobs, "parallel cells");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the RL policy");
  std::string train_config, train_out = "checkpoints", train_resume;
  bool force = false;
  train_cmd->add_option("--config", train_config, "training config JSON")->required();
  train_cmd->add_option("--out", train_out, "checkpoint directory");
  train_cmd->add_flag("--force", force, "overwrite a non-empty output directory");
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

  // report
  auto* report = app.add_subcommand("report", "normalize results and emit plot data");
  std::string report_dir, report_reference, report_out;
  report->add_option("--results", report_dir, "results directory from eval")->required();
  report->add_option("--reference", report_reference, "reference algorithm for normalization");
  report->add_option("--out", report_out, "output directory (defaults to the results directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_inputs, ingest_out, to_mahi, from_mahi);
    if (*synth) return cmd_synth(synth_config, synth_count, synth_seed, synth_out);
    if (*eval) return cmd_eval(eval_plan, eval_out, eval_seed, eval_seed_opt->count() > 0, jobs);
    if (*train_cmd) return cmd_train(train_config, train_out, force, train_resume);
    if (*report) return cmd_report(report_dir, report_reference, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

// Command-line interface: run closed-loop episodes, evaluate traces, and
// export plot-ready series.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcmpc/harness.hpp"
#include "lcmpc/metrics.hpp"

namespace {

using namespace lcmpc;

void apply_config_overrides(const std::string& path, BehaviorConfig& b) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.contains("mpc")) {
    const auto& m = j["mpc"];
    b.mpc.safety_margin = m.value("safety_margin", b.mpc.safety_margin);
    b.mpc.feas_tol = m.value("feas_tol", b.mpc.feas_tol);
    b.mpc.horizon = m.value("horizon", b.mpc.horizon);
    b.mpc.commit_from = m.value("commit_from", b.mpc.commit_from);
    b.mpc.smooth_weight = m.value("smooth_weight", b.mpc.smooth_weight);
    b.mpc.lateral_weight = m.value("lateral_weight", b.mpc.lateral_weight);
    b.mpc.max_iters = m.value("max_iters", b.mpc.max_iters);
    b.mpc.paper_literal_safety =
        m.value("paper_literal_safety", b.mpc.paper_literal_safety);
  }
  if (j.contains("behavior")) {
    const auto& v = j["behavior"];
    b.n_llm = v.value("n_llm", b.n_llm);
    b.retry_budget = v.value("retry_budget", b.retry_budget);
    b.format_reminders = v.value("format_reminders", b.format_reminders);
    b.dwell_min_cycles = v.value("dwell_min_cycles", b.dwell_min_cycles);
    b.ttc_threshold = v.value("ttc_threshold", b.ttc_threshold);
    b.aggressive_threshold =
        v.value("aggressive_threshold", b.aggressive_threshold);
    b.perception_range = v.value("perception_range", b.perception_range);
    b.recenter_tol = v.value("recenter_tol", b.recenter_tol);
  }
  if (j.contains("failsafe")) {
    const auto& f = j["failsafe"];
    b.failsafe.min_gap = f.value("min_gap", b.failsafe.min_gap);
    b.failsafe.ttc_trigger = f.value("ttc_trigger", b.failsafe.ttc_trigger);
  }
}

std::string trial_path(const std::string& base, int trial, int trials) {
  if (trials <= 1) return base;
  const auto dot = base.rfind('.');
  if (dot == std::string::npos || base.find('/', dot) != std::string::npos)
    return base + "_trial" + std::to_string(trial);
  return base.substr(0, dot) + "_trial" + std::to_string(trial) +
         base.substr(dot);
}

int cmd_run(const std::string& scenario_path, int case_id,
            const std::string& backend_name, BackendConfig backend_cfg,
            std::uint64_t seed, int steps, const std::string& output,
            int trials, bool timing, const std::string& config_path,
            bool force_containment_break) {
  Scenario sc = load_scenario(scenario_path);
  EpisodeOptions opt;
  opt.case_id = case_id;
  opt.steps = steps;
  opt.timing = timing;
  if (!config_path.empty()) apply_config_overrides(config_path, opt.behavior);
  opt.behavior.prediction.force_containment_break = force_containment_break;
  opt.scripted.ttc_threshold = opt.behavior.ttc_threshold;
  opt.scripted.dwell_min_cycles = opt.behavior.dwell_min_cycles;
  backend_cfg.kind = backend_name == "remote" ? BackendKind::Remote
                                              : BackendKind::Scripted;

  int worst = kExitOk;
  for (int t = 0; t < trials; ++t) {
    opt.seed = seed + static_cast<std::uint64_t>(t);
    const auto backend = make_backend(backend_cfg, opt.scripted);
    TraceWriter trace(trial_path(output, t, trials), timing);
    const EpisodeResult res = run_episode(sc, opt, *backend, &trace);
    std::cerr << "trial " << t << ": " << res.exit_reason << ", steps "
              << res.steps_executed << ", cycles " << res.cycles
              << ", mean speed " << res.mean_speed << " m/s\n";
    worst = std::max(worst, res.exit_code);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lane-conditioned MPC highway planning stack"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a closed-loop episode");
  std::string scenario_path, output = "trace.ndjson", backend_name = "scripted";
  std::string config_path;
  int case_id = 1, steps = 0, trials = 1;
  std::uint64_t seed = 0;
  bool timing = false, force_break = false;
  BackendConfig backend_cfg;
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--case", case_id, "decision protocol: 1 or 2")
      ->check(CLI::Range(1, 2));
  run->add_option("--backend", backend_name, "scripted | remote")
      ->check(CLI::IsMember({"scripted", "remote"}));
  run->add_option("--endpoint", backend_cfg.endpoint,
                  "chat-completions URL (remote)");
  run->add_option("--model", backend_cfg.model, "model name (remote)");
  run->add_option("--temperature", backend_cfg.temperature,
                  "sampling temperature (remote)");
  run->add_option("--timeout", backend_cfg.timeout_s,
                  "backend timeout seconds (remote)");
  run->add_option("--api-key-env", backend_cfg.api_key_env,
                  "environment variable holding the API key");
  run->add_option("--seed", seed, "episode seed");
  run->add_option("--steps", steps, "control steps (0 = scenario default)");
  run->add_option("-o,--output", output, "trace output path");
  run->add_option("--trials", trials, "independent episodes (seed, seed+1, ...)")
      ->check(CLI::PositiveNumber);
  run->add_option("--config", config_path, "JSON config overrides");
  run->add_flag("--timing", timing,
                "record wall-clock latencies (trace no longer byte-stable)");
  run->add_flag("--force-containment-break", force_break,
                "test hook: emit zero-width predictions")
      ->group("");

  // eval
  auto* eval = app.add_subcommand("eval", "aggregate metrics over traces");
  std::vector<std::string> trace_paths;
  std::string json_out;
  eval->add_option("traces", trace_paths, "trace files")->required();
  eval->add_option("--json", json_out, "also write the report as JSON");

  // render
  auto* render = app.add_subcommand("render", "export plot-ready series");
  std::string render_trace, series_out = "series.csv", events_out;
  render->add_option("trace", render_trace, "trace file")->required();
  render->add_option("-o,--output", series_out, "series CSV path");
  render->add_option("--events", events_out,
                     "event markers JSON path (default: <output>.events.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (backend_name == "remote" && backend_cfg.endpoint.empty()) {
        std::cerr << "error: --backend remote requires --endpoint\n";
        return kExitConfigError;
      }
      return cmd_run(scenario_path, case_id, backend_name, backend_cfg, seed,
                     steps, output, trials, timing, config_path, force_break);
    }
    if (eval->parsed()) {
      std::vector<TraceFile> traces;
      for (const auto& p : trace_paths) traces.push_back(read_trace(p));
      std::vector<std::string> warnings;
      const MetricsReport r = compute_metrics(traces, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      std::cout << render_metrics_table(r);
      if (!json_out.empty()) {
        std::ofstream out(json_out);
        out << metrics_to_json(r).dump(2) << "\n";
      }
      return kExitOk;
    }
    if (render->parsed()) {
      const TraceFile t = read_trace(render_trace);
      std::ofstream csv(series_out);
      if (!csv) throw TraceError("cannot open output: " + series_out);
      write_render_series(t, csv);
      const std::string ev =
          events_out.empty() ? series_out + ".events.json" : events_out;
      std::ofstream events(ev);
      if (!events) throw TraceError("cannot open output: " + ev);
      write_render_events(t, events);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}

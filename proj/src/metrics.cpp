#include "lcmpc/metrics.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "lcmpc/textfmt.hpp"

namespace lcmpc {

namespace {

struct Moments {
  double sum = 0.0, sumsq = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / n : 0.0; }
  double stddev() const {
    if (!n) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sumsq / n - m * m));
  }
};

}  // namespace

MetricsReport compute_metrics(const std::vector<TraceFile>& traces,
                              std::vector<std::string>* warnings) {
  if (traces.empty()) throw TraceError("no traces to evaluate");
  MetricsReport r;
  Moments speed, compute, decision;
  const int schema = traces.front().header.schema;
  const std::string hash = traces.front().header.scenario_hash;

  for (const auto& t : traces) {
    if (t.header.schema != schema)
      throw TraceError("mixed trace schema versions");
    if (warnings && t.header.scenario_hash != hash)
      warnings->push_back("trace scenario hash mismatch: " +
                          t.header.scenario_name);
    ++r.traces;
    r.total_steps += static_cast<int>(t.steps.size());
    r.collisions += t.summary.collisions;
    r.containment_violations += t.summary.containment_violations;
    r.failsafe_steps += t.summary.failsafe_steps;
    r.decision_requests += t.summary.decision_requests;
    r.retries += t.summary.retries;
    for (const auto& s : t.steps) {
      speed.add(s.ego.vx);
      compute.add(s.compute_ms);
      if (s.source == ActionSource::Failsafe) {
        // counted via summary; nothing extra here
      }
    }
    for (const auto& c : t.cycles) decision.add(c.backend_latency_s * 1e3);
  }

  int planner_steps = 0;
  for (const auto& t : traces)
    for (const auto& s : t.steps)
      planner_steps += s.source == ActionSource::Planner ? 1 : 0;

  r.mean_speed = speed.mean();
  r.std_speed = speed.stddev();
  r.planner_feasible_rate =
      r.total_steps ? static_cast<double>(planner_steps) / r.total_steps : 0.0;
  r.step_compute_mean_ms = compute.mean();
  r.step_compute_std_ms = compute.stddev();
  r.decision_latency_mean_ms = decision.mean();
  r.decision_latency_std_ms = decision.stddev();
  return r;
}

std::string render_metrics_table(const MetricsReport& r) {
  std::ostringstream os;
  os << "Safety:      collisions = " << r.collisions << " over "
     << r.total_steps << " total control steps (" << r.traces
     << " trials), containment violations = " << r.containment_violations
     << "\n";
  os << "Performance: mean speed " << fmt_fixed(r.mean_speed) << " (+/- "
     << fmt_fixed(r.std_speed) << ") m/s\n";
  os << "Latency:     per control step " << fmt_fixed(r.step_compute_mean_ms, 2)
     << " (+/- " << fmt_fixed(r.step_compute_std_ms, 2)
     << ") ms compute; per decision request "
     << fmt_fixed(r.decision_latency_mean_ms, 2) << " (+/- "
     << fmt_fixed(r.decision_latency_std_ms, 2) << ") ms backend\n";
  os << "Planner:     planner-step rate "
     << fmt_fixed(100.0 * r.planner_feasible_rate) << "%, failsafe steps "
     << r.failsafe_steps << ", decision requests " << r.decision_requests
     << ", retries " << r.retries << "\n";
  return os.str();
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
  return nlohmann::json{
      {"traces", r.traces},
      {"total_steps", r.total_steps},
      {"collisions", r.collisions},
      {"containment_violations", r.containment_violations},
      {"mean_speed", r.mean_speed},
      {"std_speed", r.std_speed},
      {"planner_feasible_rate", r.planner_feasible_rate},
      {"failsafe_steps", r.failsafe_steps},
      {"decision_requests", r.decision_requests},
      {"retries", r.retries},
      {"step_compute_mean_ms", r.step_compute_mean_ms},
      {"step_compute_std_ms", r.step_compute_std_ms},
      {"decision_latency_mean_ms", r.decision_latency_mean_ms},
      {"decision_latency_std_ms", r.decision_latency_std_ms}};
}

void write_render_series(const TraceFile& trace, std::ostream& csv) {
  csv << "step,x,y,vx,vy,speed,lane,source,state\n";
  for (const auto& s : trace.steps) {
    csv << s.step << "," << s.ego.x << "," << s.ego.y << "," << s.ego.vx << ","
        << s.ego.vy << "," << s.ego.speed() << "," << s.lane << ","
        << (s.source == ActionSource::Planner ? "planner" : "failsafe") << ","
        << (s.state ? state_name(*s.state) : std::string("-")) << "\n";
  }
}

void write_render_events(const TraceFile& trace, std::ostream& events_json) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& c : trace.cycles) {
    nlohmann::json e;
    e["step"] = c.step_index;
    e["case"] = c.case_id;
    if (c.parsed) {
      e["decision"] = c.parsed->kind == DecisionKind::LaneChoice
                          ? lane_name(c.parsed->lane)
                          : state_name(c.parsed->state);
    }
    if (c.mpc_outcome)
      e["mpc"] = *c.mpc_outcome == VerdictOutcome::Approved ? "approved"
                                                            : "rejected";
    e["source"] = c.source == ActionSource::Planner ? "planner" : "failsafe";
    e["retries"] = c.retries;
    e["aborted"] = c.aborted_mid_cycle;
    if (c.case_id == 2) e["state_after"] = state_name(c.state_after);
    events.push_back(e);
  }
  events_json << events.dump(2) << "\n";
}

}  // namespace lcmpc

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lcmpc/trace.hpp"

namespace lcmpc {

/// Aggregate evaluation over one or more episode traces, recomputable
/// offline from the trace records alone.
struct MetricsReport {
  int traces = 0;
  int total_steps = 0;
  int collisions = 0;
  int containment_violations = 0;
  double mean_speed = 0.0;  ///< longitudinal, m/s
  double std_speed = 0.0;   ///< population standard deviation
  double planner_feasible_rate = 0.0;  ///< planner-sourced step fraction
  int failsafe_steps = 0;
  int decision_requests = 0;
  int retries = 0;
  double step_compute_mean_ms = 0.0;
  double step_compute_std_ms = 0.0;
  double decision_latency_mean_ms = 0.0;
  double decision_latency_std_ms = 0.0;
};

/// Throws TraceError when traces mix schema versions. Mismatched scenario
/// hashes are tolerated but flagged via `warnings`.
MetricsReport compute_metrics(const std::vector<TraceFile>& traces,
                              std::vector<std::string>* warnings = nullptr);

std::string render_metrics_table(const MetricsReport& r);
nlohmann::json metrics_to_json(const MetricsReport& r);

/// Plot-ready per-step series (CSV) and per-cycle event markers (JSON).
void write_render_series(const TraceFile& trace, std::ostream& csv);
void write_render_events(const TraceFile& trace, std::ostream& events_json);

}  // namespace lcmpc

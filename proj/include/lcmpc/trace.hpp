#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcmpc/behavior.hpp"

namespace lcmpc {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kTraceSchema = 1;

struct TraceHeader {
  int schema = kTraceSchema;
  std::string scenario_name;
  std::string scenario_hash;
  std::uint64_t seed = 0;
  int case_id = 1;
  int steps_planned = 0;
  bool timing = false;
  nlohmann::json config;
};

struct AgentSnap {
  int id = 0;
  double x = 0, y = 0, vx = 0, vy = 0;
};

struct TraceStep {
  int step = 0;  ///< index of the applied control step, from 0
  VehicleState ego;
  ControlInput u;
  ActionSource source = ActionSource::Planner;
  int lane = 1;
  std::optional<BehaviorState> state;
  double compute_ms = 0.0;
  std::vector<AgentSnap> agents;
};

struct TraceSummary {
  int steps_executed = 0;
  int cycles = 0;
  int collisions = 0;
  int containment_violations = 0;
  std::string exit_reason = "completed";
  int failsafe_steps = 0;
  int decision_requests = 0;
  int retries = 0;
  std::optional<std::string> final_state;
};

struct TraceFile {
  TraceHeader header;
  std::vector<TraceStep> steps;
  std::vector<DecisionCycleLog> cycles;
  TraceSummary summary;
};

/// Line-delimited JSON episode trace: one header, one record per control
/// step and per decision cycle, one terminal summary.
class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path, bool timing);
  void write_header(const TraceHeader& h);
  void write_step(const TraceStep& s);
  void write_cycle(const DecisionCycleLog& c);
  void write_summary(const TraceSummary& s);

 private:
  void emit(const nlohmann::json& j);
  std::ofstream out_;
  bool timing_;
};

TraceFile read_trace(const std::string& path);

nlohmann::json cycle_to_json(const DecisionCycleLog& c, bool timing);

}  // namespace lcmpc

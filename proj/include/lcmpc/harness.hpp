#pragma once

#include <optional>
#include <string>

#include "lcmpc/behavior.hpp"
#include "lcmpc/scenario.hpp"
#include "lcmpc/trace.hpp"

namespace lcmpc {

/// CLI exit codes; collision and containment are distinct failures.
enum ExitCode {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitCollision = 2,
  kExitContainment = 3
};

struct EpisodeOptions {
  int case_id = 1;
  std::uint64_t seed = 0;
  int steps = 0;  ///< 0 = scenario default
  bool timing = false;
  BehaviorConfig behavior;
  ScriptedConfig scripted;
};

struct EpisodeResult {
  int exit_code = kExitOk;
  std::string exit_reason = "completed";
  int steps_executed = 0;
  int cycles = 0;
  int collisions = 0;
  int containment_violations = 0;
  int failsafe_steps = 0;
  int decision_requests = 0;
  int retries = 0;
  double mean_speed = 0.0;
  double mean_compute_ms = 0.0;  ///< measured even when timing is off
  double max_compute_ms = 0.0;
  BehaviorState final_state = BehaviorState::Stay;
  WorldState final_world;
};

/// Runs one closed-loop episode, optionally streaming the trace. The trace
/// writer may be null (used by in-process tests).
EpisodeResult run_episode(const Scenario& sc, const EpisodeOptions& opt,
                          DecisionBackend& backend, TraceWriter* trace);

}  // namespace lcmpc

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "lcmpc/road.hpp"
#include "lcmpc/types.hpp"

namespace lcmpc {

enum class PolicyMode { ConstantSpeed, PiecewiseAccel, FollowerReactive };

/// Scenario-scheduled lane change for a scripted agent. The lateral path is a
/// monotone smoothstep from the source lane center to the target lane center
/// over `duration_steps`.
struct LaneChangePlan {
  int start_step = 0;
  LaneId target_lane = LaneId::Middle;
  int duration_steps = 40;
};

struct ScriptedPolicy {
  PolicyMode mode = PolicyMode::ConstantSpeed;
  /// (start_step, accel) pairs; the entry with the largest start_step <= now
  /// applies. Empty or before the first entry means accel 0.
  std::vector<std::pair<int, double>> schedule;
  /// Declared acceleration envelope. Every realized per-step acceleration
  /// stays inside it; interval prediction builds on exactly this promise.
  double accel_lo = 0.0;
  double accel_hi = 0.0;
  bool cooperative = true;  ///< FollowerReactive only
  std::optional<LaneChangePlan> lane_change;

  // FollowerReactive tuning
  double reaction_gap = 40.0;   ///< bumper gap that triggers a reaction (m)
  double emergency_gap = 8.0;   ///< bumper gap for a full envelope brake (m)
  double yield_accel = -2.0;    ///< cooperative reaction (m/s^2)
  double press_accel = 1.5;     ///< aggressive reaction (m/s^2)
};

struct Agent {
  int id = 0;
  VehicleState state;
  VehicleParams params;
  ScriptedPolicy policy;
  double y_home = 0.0;  ///< lateral anchor (source lane center)

  bool lane_change_active(int step) const {
    return policy.lane_change && step >= policy.lane_change->start_step &&
           step < policy.lane_change->start_step +
                     policy.lane_change->duration_steps;
  }
  bool lane_change_done(int step) const {
    return policy.lane_change &&
           step >= policy.lane_change->start_step +
                       policy.lane_change->duration_steps;
  }
};

struct WorldState {
  int step_index = 0;
  double dt = 0.1;
  VehicleState ego;
  VehicleParams ego_params;
  std::vector<Agent> agents;
  RoadGeometry road;
  std::uint64_t rng_seed = 0;

  const Agent* find_agent(int id) const;
};

struct CollisionReport {
  int agent_id = 0;
  int step_index = 0;
  double ego_x = 0.0;
  double ego_y = 0.0;
};

/// Scripted acceleration an agent would command given the current world.
/// Always inside the agent's declared envelope.
double policy_accel(const Agent& agent, const WorldState& w);

/// Deterministic lateral position of an agent at an absolute step, given its
/// schedule. Agents hold y_home except during a scheduled lane change.
double agent_lateral_at(const Agent& agent, int step, const RoadGeometry& road);

/// Advance the ego by `ego_u` and every agent by its scripted policy.
/// Throws std::logic_error if any agent's realized acceleration leaves its
/// declared envelope.
WorldState world_step(const WorldState& w, const ControlInput& ego_u);

/// Axis-aligned rectangle overlap between the ego and any agent. Touching
/// edges do not count.
std::optional<CollisionReport> check_collision(const WorldState& w);

}  // namespace lcmpc

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcmpc/prediction.hpp"
#include "lcmpc/road.hpp"
#include "lcmpc/types.hpp"

namespace lcmpc {

enum class PlanStatus { Feasible, Infeasible };

enum class InitStrategy { ZeroControl, ZeroThenBrake };

struct MpcConfig {
  double safety_margin = 5.0;  ///< minimum longitudinal separation L (m)
  double feas_tol = 1e-3;      ///< max violation still counted feasible (m)
  int horizon = 8;             ///< default k for problems built by callers
  /// First step at which the target-lane constraint binds; 0 = ceil(k/2).
  int commit_from = 0;
  double smooth_weight = 1.0;   ///< weight on ||u_{i+1} - u_i||_2
  double lateral_weight = 0.05; ///< weight on terminal lateral tracking
  int max_iters = 30;
  InitStrategy init_strategy = InitStrategy::ZeroControl;
  /// Keep |x - bound| >= L on each interval bound separately (admits plans
  /// inside a wide interval); default is the fully-ahead-or-behind form.
  bool paper_literal_safety = false;
};

struct MpcProblem {
  VehicleState s0;
  int k = 8;
  double dt = 0.1;
  LaneId target_lane = LaneId::Middle;
  std::vector<IntervalPrediction> predictions;  ///< each horizon length == k
  RoadGeometry road;
  VehicleParams params;
  MpcConfig cfg;

  /// Lateral tracking setpoint; defaults to the target lane center. The
  /// interactive straddle maneuver sets it to the lane boundary.
  std::optional<double> y_ref;
  /// Lateral corridor bound from commit_from on; defaults to the target
  /// lane. The straddle maneuver widens it to span both lane centers.
  std::optional<std::pair<double, double>> commit_band;
  /// Safety constraints also apply against agents in these lanes.
  std::vector<LaneId> extra_relevant_lanes;

  double lateral_setpoint() const {
    return y_ref ? *y_ref : road.lane_center(target_lane);
  }
  std::pair<double, double> commitment_band() const {
    return commit_band ? *commit_band
                       : std::pair<double, double>{road.lane_lower(target_lane),
                                                   road.lane_upper(target_lane)};
  }
  int commit_step() const {
    return cfg.commit_from > 0 ? cfg.commit_from : (k + 1) / 2;
  }
};

struct ConstraintViolation {
  std::string name;  ///< road_boundary | lane_commitment | safety_separation | control_bounds
  int step = 0;
  double magnitude = 0.0;
  int agent_id = -1;
};

struct PlanDiagnostics {
  ConstraintViolation worst;
  int iterations = 0;
  double objective = 0.0;
};

struct PlanResult {
  PlanStatus status = PlanStatus::Infeasible;
  std::vector<ControlInput> controls;    ///< k entries, Feasible only
  std::vector<VehicleState> trajectory;  ///< k+1 states including s0
  PlanDiagnostics diagnostics;
};

/// Exact rollout and constraint audit of a control sequence, via dynamics
/// stepping rather than the solver's linearized model.
struct PlanCheck {
  std::vector<VehicleState> trajectory;
  double max_violation = 0.0;
  ConstraintViolation worst;
  double objective = 0.0;
};
PlanCheck evaluate_plan(const MpcProblem& p,
                        const std::vector<ControlInput>& controls);

/// Lane-conditioned receding-horizon solve: maximize terminal progress with
/// smooth controls subject to dynamics, road boundary, lane commitment from
/// commit_step() on, and interval-safety separation from every relevant
/// agent. Sequential linearization with the ahead/behind disjunction fixed
/// per agent per attempt. Feasibility is decided by evaluate_plan on the
/// returned controls, never by the internal model.
PlanResult solve_lane_conditioned(const MpcProblem& p);

struct MinlpResult {
  PlanResult best;
  LaneId best_lane = LaneId::Middle;
  std::map<LaneId, PlanResult> per_lane;
};

/// The integer-lane formulation by enumeration: one solve per lane, best
/// feasible objective wins, ties prefer the ego's current lane.
MinlpResult solve_naive_minlp(const MpcProblem& p);

/// Exhaustive control-grid rollout, used as the test oracle. Requires
/// k <= 4 and at most 5 values per grid.
PlanResult grid_oracle(const MpcProblem& p, const std::vector<double>& accel_grid,
                       const std::vector<double>& steer_grid);

struct FailsafeConfig {
  double min_gap = 10.0;     ///< d_min (m, bumper gap)
  double ttc_trigger = 2.0;  ///< hard-brake TTC threshold (s)
  double steer_kp = 0.01;
  double steer_kd = 0.04;
  double brake_margin = 1.25;   ///< overbrake factor on the matching law
  double reaction_time = 0.2;  ///< speed-scaled slack on the braking reserve
};

/// Keep the current lane and brake: hard brake inside min_gap or below the
/// TTC trigger, otherwise decelerate just enough to match the leader speed
/// at min_gap. Never commands a lane change.
ControlInput failsafe_control(
    const VehicleState& ego, const VehicleParams& ego_params,
    const std::optional<std::pair<VehicleState, VehicleParams>>& leader,
    const RoadGeometry& road, const FailsafeConfig& cfg);

}  // namespace lcmpc

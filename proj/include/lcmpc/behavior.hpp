#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcmpc/decision.hpp"
#include "lcmpc/verifier.hpp"

namespace lcmpc {

enum class ActionSource { Planner, Failsafe };

/// Outcome of the reflection module's three checks on a proposed transition.
struct TransitionVerdict {
  enum class Applicability { Pass, Fail, NotApplicable };

  bool state_check = true;
  bool safety_check = true;
  double min_ttc = kInfTtc;
  double ttc_threshold = 0.0;
  Applicability prediction_check = Applicability::NotApplicable;
  std::optional<IntentionLabel> intention;
  bool overall = true;
};

/// State check: the edge must exist. Safety check: the minimum relevant TTC
/// must reach the threshold. Prediction check: applies only to Finish and
/// requires a cooperative intention estimate; no constraint is imposed on the
/// estimate itself.
TransitionVerdict reflect(BehaviorState proposed, BehaviorState current,
                          const StateMachineGraph& graph, double ttc_now,
                          std::optional<IntentionLabel> intention,
                          double ttc_threshold);

struct BehaviorConfig {
  int n_llm = 5;             ///< control steps per decision cycle
  int retry_budget = 2;      ///< decision retries after a rejection (Case 2)
  int format_reminders = 2;  ///< parse-failure reminders per request
  int dwell_min_cycles = 2;  ///< completed Attempt cycles before Finish
  double ttc_threshold = 3.0;        ///< reflection safety check (s)
  double aggressive_threshold = 6.0; ///< intention classifier threshold (s)
  double perception_range = 150.0;
  double recenter_tol = 0.3;  ///< |y - source center| for Abort -> Stay
  std::size_t memory_capacity = 8;
  FailsafeConfig failsafe;
  PredictionConfig prediction;
  MpcConfig mpc;
};

/// Everything one decision cycle did, for the episode trace.
struct DecisionCycleLog {
  int step_index = 0;
  int case_id = 1;
  std::string scene_text;
  std::string raw_decision;
  std::optional<Decision> parsed;
  std::optional<TransitionVerdict> reflection;
  std::optional<VerdictOutcome> mpc_outcome;
  std::string feedback_text;
  ConstraintViolation mpc_worst;
  int retries = 0;   ///< decision re-requests after a rejection
  int requests = 0;  ///< backend invocations including format reminders
  ActionSource source = ActionSource::Planner;
  bool transport_failure = false;
  bool dwell_rejected = false;
  bool aborted_mid_cycle = false;
  int controls_applied = 0;
  std::optional<std::pair<BehaviorState, BehaviorState>> executed_transition;
  BehaviorState state_after = BehaviorState::Stay;
  double backend_latency_s = 0.0;
  double decision_compute_s = 0.0;
};

struct StepRecord {
  ControlInput u;
  ActionSource source = ActionSource::Planner;
  double compute_s = 0.0;  ///< planning compute, excluding backend calls
  std::optional<BehaviorState> state;
};

/// Called after every applied control step; return false to halt the episode.
using StepHook = std::function<bool(const WorldState&, const StepRecord&)>;

/// Closed-loop decision engine for both protocols: lane selection with
/// in-context safety feedback (Case 1) and the state-machine-guided
/// interactive lane change (Case 2).
class BehaviorEngine {
 public:
  BehaviorEngine(DecisionBackend& backend, StateMachineGraph graph,
                 BehaviorConfig cfg, int case_id,
                 std::optional<LaneId> task_target = std::nullopt);

  /// Runs one decision cycle, stepping `world` in place through at most
  /// cfg.n_llm control steps. Throws ContainmentViolation if a prediction
  /// fails to contain the simulated truth.
  DecisionCycleLog run_cycle(WorldState& world, const StepHook& hook);

  bool halted() const { return halted_; }
  BehaviorState state() const { return state_; }
  LaneId task_source() const { return task_source_; }

 private:
  struct CycleContext;

  std::vector<IntervalPrediction> sense(const WorldState& w);
  void record_samples(const WorldState& w, CycleContext& ctx);
  SceneDescription build_scene(const WorldState& w, const CycleContext& ctx);
  std::optional<Decision> request_decision(Conversation& conv,
                                           const SceneDescription& scene,
                                           DecisionKind kind,
                                           DecisionCycleLog& log);
  void run_case1(WorldState& world, const StepHook& hook, CycleContext& ctx,
                 DecisionCycleLog& log);
  void run_case2(WorldState& world, const StepHook& hook, CycleContext& ctx,
                 DecisionCycleLog& log);
  void execute_window(WorldState& world, const StepHook& hook,
                      const Decision& decision, const VerifyContext& vctx,
                      const PlanResult& first_plan, DecisionCycleLog& log);
  void failsafe_window(WorldState& world, const StepHook& hook,
                       DecisionCycleLog& log);
  VerifyContext verify_context() const;

  DecisionBackend& backend_;
  StateMachineGraph graph_;
  BehaviorConfig cfg_;
  int case_id_;
  std::optional<LaneId> task_target_;
  LaneId task_source_ = LaneId::Middle;
  bool task_source_set_ = false;

  BehaviorState state_ = BehaviorState::Stay;
  int cycles_in_state_ = 0;
  MemoryBuffer memory_;
  ContainmentMonitor monitor_;
  bool halted_ = false;
  std::string case1_system_;
  std::string case2_system_;
};

}  // namespace lcmpc

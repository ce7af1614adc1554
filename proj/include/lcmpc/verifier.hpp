#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcmpc/decision.hpp"
#include "lcmpc/planner.hpp"

namespace lcmpc {

enum class VerdictOutcome { Approved, Rejected };

/// Natural-language verification feedback plus the structured fields it was
/// rendered from. The template is fixed (version v1) so prompt regression
/// tests stay byte-stable.
struct FeedbackMessage {
  std::string text;
  VerdictOutcome outcome = VerdictOutcome::Rejected;
  std::string option_name;
  std::string violated_constraint;  ///< empty when approved
  int step = -1;
  double magnitude = 0.0;
  int agent_id = -1;
};

struct Verdict {
  VerdictOutcome outcome = VerdictOutcome::Rejected;
  Decision proposed;
  PlanResult plan;
  FeedbackMessage feedback;

  bool approved() const { return outcome == VerdictOutcome::Approved; }
};

/// Lane-change task context needed to turn a state choice into a planning
/// problem (Case 2 only).
struct VerifyContext {
  std::optional<LaneId> task_target;
  std::optional<LaneId> task_source;
};

/// Builds the planning problem implied by the decision (target lane for a
/// lane choice; the state's lateral setpoint for a state choice), solves it,
/// and wraps the result. Approved iff the plan is Feasible. Malformed
/// decisions (a state choice without task context) throw.
Verdict verify(const Decision& d, const WorldState& w,
               const std::vector<IntervalPrediction>& predictions,
               const MpcConfig& cfg, const VerifyContext& ctx = {});

/// Untried lane options in fixed order: current lane first, then nearest
/// first. Empty means every behavior was rejected and the failsafe engages.
std::vector<LaneId> remaining_options(const std::vector<LaneId>& rejected,
                                      LaneId current);

/// The planning problem `verify` would solve for this decision; exposed so
/// the receding-horizon loop re-solves exactly the approved problem.
MpcProblem problem_for_decision(const Decision& d, const WorldState& w,
                                const std::vector<IntervalPrediction>& preds,
                                const MpcConfig& cfg, const VerifyContext& ctx);

FeedbackMessage render_feedback(const Decision& d, const PlanResult& plan);

}  // namespace lcmpc

#include <sstream>

#include "lcmpc/decision.hpp"
#include "lcmpc/textfmt.hpp"

namespace lcmpc {

std::string state_name(BehaviorState s) {
  switch (s) {
    case BehaviorState::Stay:
      return "Stay";
    case BehaviorState::Attempt:
      return "Attempt";
    case BehaviorState::Finish:
      return "Finish";
    case BehaviorState::Abort:
      return "Abort";
  }
  return "?";
}

std::string build_system_prompt(int case_id, const StateMachineGraph& graph,
                                const PromptConfig& cfg) {
  std::ostringstream p;
  if (case_id == 1) {
    p << "You are the behavior-level decision maker of an autonomous car on a "
         "one-way three-lane highway.\n"
         "Given the scene description, choose the target lane for the "
         "low-level trajectory planner.\n"
         "Drive as fast as allowed while staying safe; prefer the lane that "
         "lets the car make the most progress.\n"
         "A safety verifier checks every choice against the planned "
         "trajectory. If your choice is rejected you will receive feedback; "
         "reevaluate the scenario and answer again with a different lane.\n"
         "Valid options: Left Lane, Middle Lane, Right Lane.\n"
         "Respond with a short reasoning followed by one final line of "
         "exactly this form:\n"
         "DECISION: <option>\n";
    return p.str();
  }

  p << "You are the behavior-level decision maker of an autonomous car "
       "performing an interactive lane change on a one-way three-lane "
       "highway.\n"
       "You control the behavior state of the car. Valid states: Stay, "
       "Attempt, Finish, Abort.\n"
       "Allowed transitions:\n";
  for (const auto& [from, to] : graph.edges)
    p << "- " << state_name(from) << " -> " << state_name(to) << "\n";
  p << "Every proposal is checked before execution:\n"
       "- state check: the transition must be one of the allowed "
       "transitions.\n"
       "- safety check: the minimum time to collision must stay at or above "
    << fmt_fixed(cfg.ttc_threshold)
    << " seconds.\n"
       "- prediction check: finishing the lane change requires the follower "
       "on the target lane to be estimated cooperative.\n"
       "Estimate the follower's intention from its time-to-collision history "
       "over the past 3 cycles: aggressive means the history is strictly "
       "decreasing and ends below "
    << fmt_fixed(cfg.aggressive_threshold)
    << " seconds; otherwise cooperative. Examples:\n"
       "- TTC history [6.0, 4.5, 3.0]: strictly decreasing and ending below "
       "the threshold, so the intention is aggressive.\n"
       "- TTC history [4.0, 4.2, 4.5]: rising, so the intention is "
       "cooperative.\n"
       "- TTC history [9.0, 8.0, 7.0]: decreasing but still above the "
       "threshold, so the intention is cooperative.\n"
       "In the state Attempt the car straddles the lane boundary to probe "
       "the follower's reaction; remain in Attempt for at least "
    << cfg.dwell_min_cycles
    << " cycles before proposing Finish.\n"
       "Respond with a short reasoning followed by one final line of exactly "
       "this form:\n"
       "DECISION: <state>\n";
  return p.str();
}

}  // namespace lcmpc

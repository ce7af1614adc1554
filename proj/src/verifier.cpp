#include "lcmpc/verifier.hpp"

#include <algorithm>
#include <sstream>

#include "lcmpc/textfmt.hpp"

namespace lcmpc {

namespace {

std::string option_name_of(const Decision& d) {
  return d.kind == DecisionKind::LaneChoice ? lane_name(d.lane)
                                            : state_name(d.state);
}

std::string humanize(std::string name) {
  std::replace(name.begin(), name.end(), '_', ' ');
  return name;
}

}  // namespace

MpcProblem problem_for_decision(const Decision& d, const WorldState& w,
                                const std::vector<IntervalPrediction>& preds,
                                const MpcConfig& cfg,
                                const VerifyContext& ctx) {
  MpcProblem p;
  p.s0 = w.ego;
  p.k = cfg.horizon;
  p.dt = w.dt;
  p.predictions = preds;
  p.road = w.road;
  p.params = w.ego_params;
  p.cfg = cfg;

  if (d.kind == DecisionKind::LaneChoice) {
    p.target_lane = d.lane;
    return p;
  }

  const LaneId here = lane_of(w.ego.y, w.road);
  switch (d.state) {
    case BehaviorState::Stay:
      p.target_lane = here;
      break;
    case BehaviorState::Attempt: {
      if (!ctx.task_target || !ctx.task_source)
        throw std::invalid_argument(
            "verify: Attempt requires a lane-change task context");
      p.target_lane = *ctx.task_target;
      const double src_c = w.road.lane_center(*ctx.task_source);
      const double tgt_c = w.road.lane_center(*ctx.task_target);
      p.commit_band = {std::min(src_c, tgt_c), std::max(src_c, tgt_c)};
      p.y_ref = w.road.boundary_between(*ctx.task_source, *ctx.task_target);
      p.extra_relevant_lanes = {*ctx.task_source, *ctx.task_target};
      break;
    }
    case BehaviorState::Finish:
      if (!ctx.task_target)
        throw std::invalid_argument(
            "verify: Finish requires a lane-change task context");
      p.target_lane = *ctx.task_target;
      if (ctx.task_source) p.extra_relevant_lanes = {*ctx.task_source};
      break;
    case BehaviorState::Abort:
      if (!ctx.task_source)
        throw std::invalid_argument(
            "verify: Abort requires a lane-change task context");
      p.target_lane = *ctx.task_source;
      if (ctx.task_target) p.extra_relevant_lanes = {*ctx.task_target};
      break;
  }
  return p;
}

FeedbackMessage render_feedback(const Decision& d, const PlanResult& plan) {
  FeedbackMessage fb;
  fb.option_name = option_name_of(d);
  if (plan.status == PlanStatus::Feasible) {
    fb.outcome = VerdictOutcome::Approved;
    fb.text = "Verification passed: the verifier is happy with the proposed " +
              fb.option_name + ".";
    return fb;
  }
  fb.outcome = VerdictOutcome::Rejected;
  const auto& worst = plan.diagnostics.worst;
  fb.violated_constraint = worst.name;
  fb.step = worst.step;
  fb.magnitude = worst.magnitude;
  fb.agent_id = worst.agent_id;

  std::ostringstream text;
  text << "Verification failed: the proposed " << fb.option_name
       << " is rejected because the " << humanize(worst.name)
       << " constraint is violated at horizon step " << worst.step;
  if (worst.agent_id >= 0) text << " by the car " << worst.agent_id;
  text << " with magnitude " << fmt_fixed(worst.magnitude, 2)
       << " m. Please reevaluate the scenario and regenerate another "
          "behavior.";
  fb.text = text.str();
  return fb;
}

Verdict verify(const Decision& d, const WorldState& w,
               const std::vector<IntervalPrediction>& predictions,
               const MpcConfig& cfg, const VerifyContext& ctx) {
  Verdict v;
  v.proposed = d;
  v.plan = solve_lane_conditioned(
      problem_for_decision(d, w, predictions, cfg, ctx));
  v.outcome = v.plan.status == PlanStatus::Feasible ? VerdictOutcome::Approved
                                                    : VerdictOutcome::Rejected;
  v.feedback = render_feedback(d, v.plan);
  return v;
}

std::vector<LaneId> remaining_options(const std::vector<LaneId>& rejected,
                                      LaneId current) {
  std::vector<LaneId> out;
  for (LaneId lane : lane_preference_order(current))
    if (std::find(rejected.begin(), rejected.end(), lane) == rejected.end())
      out.push_back(lane);
  return out;
}

}  // namespace lcmpc

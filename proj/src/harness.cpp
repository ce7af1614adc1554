#include "lcmpc/harness.hpp"

#include <algorithm>
#include <cmath>

namespace lcmpc {

namespace {

nlohmann::json config_snapshot(const EpisodeOptions& opt) {
  const auto& b = opt.behavior;
  nlohmann::json j;
  j["mpc"] = {{"safety_margin", b.mpc.safety_margin},
              {"feas_tol", b.mpc.feas_tol},
              {"horizon", b.mpc.horizon},
              {"commit_from", b.mpc.commit_from},
              {"smooth_weight", b.mpc.smooth_weight},
              {"lateral_weight", b.mpc.lateral_weight},
              {"max_iters", b.mpc.max_iters},
              {"paper_literal_safety", b.mpc.paper_literal_safety}};
  j["behavior"] = {{"n_llm", b.n_llm},
                   {"retry_budget", b.retry_budget},
                   {"format_reminders", b.format_reminders},
                   {"dwell_min_cycles", b.dwell_min_cycles},
                   {"ttc_threshold", b.ttc_threshold},
                   {"aggressive_threshold", b.aggressive_threshold},
                   {"perception_range", b.perception_range},
                   {"recenter_tol", b.recenter_tol}};
  j["failsafe"] = {{"min_gap", b.failsafe.min_gap},
                   {"ttc_trigger", b.failsafe.ttc_trigger}};
  j["prediction"] = {{"lateral_slack", b.prediction.lateral_slack},
                     {"force_containment_break",
                      b.prediction.force_containment_break}};
  return j;
}

}  // namespace

EpisodeResult run_episode(const Scenario& sc, const EpisodeOptions& opt,
                          DecisionBackend& backend, TraceWriter* trace) {
  EpisodeResult res;
  WorldState world = make_world(sc, opt.seed);
  const int total_steps = opt.steps > 0 ? opt.steps : sc.episode_steps;

  BehaviorEngine engine(backend, StateMachineGraph::standard(), opt.behavior,
                        opt.case_id, sc.case2_target_lane);

  if (trace) {
    TraceHeader h;
    h.scenario_name = sc.name;
    h.scenario_hash = sc.content_hash;
    h.seed = opt.seed;
    h.case_id = opt.case_id;
    h.steps_planned = total_steps;
    h.timing = opt.timing;
    h.config = config_snapshot(opt);
    trace->write_header(h);
  }

  double speed_sum = 0.0;
  double compute_sum = 0.0;
  std::optional<CollisionReport> collision;

  const StepHook hook = [&](const WorldState& w, const StepRecord& rec) {
    ++res.steps_executed;
    speed_sum += w.ego.vx;
    compute_sum += rec.compute_s * 1e3;
    res.max_compute_ms = std::max(res.max_compute_ms, rec.compute_s * 1e3);
    if (rec.source == ActionSource::Failsafe) ++res.failsafe_steps;

    if (trace) {
      TraceStep s;
      s.step = w.step_index - 1;
      s.ego = w.ego;
      s.u = rec.u;
      s.source = rec.source;
      s.lane = static_cast<int>(lane_of(w.ego.y, w.road));
      s.state = rec.state;
      s.compute_ms = rec.compute_s * 1e3;
      for (const auto& a : w.agents)
        s.agents.push_back(
            {a.id, a.state.x, a.state.y, a.state.vx, a.state.vy});
      trace->write_step(s);
    }

    collision = check_collision(w);
    if (collision) return false;
    return res.steps_executed < total_steps;
  };

  try {
    while (res.steps_executed < total_steps && !engine.halted()) {
      DecisionCycleLog log = engine.run_cycle(world, hook);
      ++res.cycles;
      res.decision_requests += log.requests;
      res.retries += log.retries;
      if (trace) trace->write_cycle(log);
      if (log.controls_applied == 0 && !log.aborted_mid_cycle) {
        // A cycle that cannot act (hook halted before any control) ends
        // the episode; abort cycles restart immediately instead.
        break;
      }
    }
  } catch (const ContainmentViolation&) {
    res.containment_violations = 1;
    res.exit_code = kExitContainment;
    res.exit_reason = "containment_violation";
  }

  if (collision) {
    res.collisions = 1;
    res.exit_code = kExitCollision;
    res.exit_reason = "collision";
  }

  res.mean_speed = res.steps_executed ? speed_sum / res.steps_executed : 0.0;
  res.mean_compute_ms =
      res.steps_executed ? compute_sum / res.steps_executed : 0.0;
  res.final_state = engine.state();
  res.final_world = world;

  if (trace) {
    TraceSummary s;
    s.steps_executed = res.steps_executed;
    s.cycles = res.cycles;
    s.collisions = res.collisions;
    s.containment_violations = res.containment_violations;
    s.exit_reason = res.exit_reason;
    s.failsafe_steps = res.failsafe_steps;
    s.decision_requests = res.decision_requests;
    s.retries = res.retries;
    if (opt.case_id == 2) s.final_state = state_name(res.final_state);
    trace->write_summary(s);
  }
  return res;
}

}  // namespace lcmpc

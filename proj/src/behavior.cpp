#include "lcmpc/behavior.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "lcmpc/textfmt.hpp"

namespace lcmpc {

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const Agent* nearest_agent(const WorldState& w, LaneId lane, bool ahead,
                           double range) {
  const Agent* best = nullptr;
  double best_dist = range;
  for (const auto& a : w.agents) {
    if (lane_of(a.state.y, w.road) != lane) continue;
    const double dx = a.state.x - w.ego.x;
    if (ahead ? dx < 0.0 : dx >= 0.0) continue;
    const double d = std::abs(dx);
    if (d <= best_dist) {
      best_dist = d;
      best = &a;
    }
  }
  return best;
}

std::string format_reminder(ParseError err, DecisionKind kind) {
  std::ostringstream os;
  os << "Your previous response could not be parsed ("
     << parse_error_name(err)
     << "). Respond with exactly one line of the form 'DECISION: <option>' "
        "where <option> is one of: ";
  if (kind == DecisionKind::LaneChoice)
    os << "Left Lane, Middle Lane, Right Lane.";
  else
    os << "Stay, Attempt, Finish, Abort.";
  return os.str();
}

std::string reflection_feedback(const TransitionVerdict& tv,
                                BehaviorState current, BehaviorState proposed) {
  std::ostringstream os;
  os << "Transition check failed:";
  bool first = true;
  auto sep = [&]() {
    os << (first ? " " : "; ");
    first = false;
  };
  if (!tv.state_check) {
    sep();
    os << "the transition " << state_name(current) << " -> "
       << state_name(proposed) << " is not an allowed transition";
  }
  if (!tv.safety_check) {
    sep();
    os << "the minimum time to collision " << fmt_fixed(tv.min_ttc)
       << " s is below the threshold " << fmt_fixed(tv.ttc_threshold) << " s";
  }
  if (tv.prediction_check == TransitionVerdict::Applicability::Fail) {
    sep();
    os << "the follower on the target lane is estimated aggressive";
  }
  os << ". Please choose another state.";
  return os.str();
}

}  // namespace

TransitionVerdict reflect(BehaviorState proposed, BehaviorState current,
                          const StateMachineGraph& graph, double ttc_now,
                          std::optional<IntentionLabel> intention,
                          double ttc_threshold) {
  TransitionVerdict tv;
  tv.state_check = graph.valid(current, proposed);
  tv.min_ttc = ttc_now;
  tv.ttc_threshold = ttc_threshold;
  tv.safety_check = ttc_now >= ttc_threshold;
  tv.intention = intention;
  if (proposed == BehaviorState::Finish && intention.has_value()) {
    tv.prediction_check = *intention == IntentionLabel::Cooperative
                              ? TransitionVerdict::Applicability::Pass
                              : TransitionVerdict::Applicability::Fail;
  } else {
    tv.prediction_check = TransitionVerdict::Applicability::NotApplicable;
  }
  tv.overall = tv.state_check && tv.safety_check &&
               tv.prediction_check != TransitionVerdict::Applicability::Fail;
  return tv;
}

struct BehaviorEngine::CycleContext {
  std::vector<IntervalPrediction> preds;
  std::map<int, IntentionLabel> intentions;
  double min_ttc = kInfTtc;
  std::optional<int> follower_id;
  std::optional<IntentionLabel> follower_intention;
  std::vector<double> follower_history;
  Clock::time_point t0;
};

BehaviorEngine::BehaviorEngine(DecisionBackend& backend,
                               StateMachineGraph graph, BehaviorConfig cfg,
                               int case_id, std::optional<LaneId> task_target)
    : backend_(backend),
      graph_(std::move(graph)),
      cfg_(cfg),
      case_id_(case_id),
      task_target_(task_target),
      memory_(cfg.memory_capacity) {
  if (case_id_ != 1 && case_id_ != 2)
    throw std::invalid_argument("BehaviorEngine: case must be 1 or 2");
  if (case_id_ == 2 && !task_target_)
    throw std::invalid_argument(
        "BehaviorEngine: case 2 requires a lane-change target");
  const PromptConfig pc{cfg_.ttc_threshold, cfg_.aggressive_threshold,
                        cfg_.dwell_min_cycles};
  case1_system_ = build_system_prompt(1, graph_, pc);
  case2_system_ = build_system_prompt(2, graph_, pc);
}

std::vector<IntervalPrediction> BehaviorEngine::sense(const WorldState& w) {
  std::vector<IntervalPrediction> preds;
  for (const auto& a : w.agents) {
    const double dist = std::hypot(a.state.x - w.ego.x, a.state.y - w.ego.y);
    if (dist > cfg_.perception_range) continue;
    preds.push_back(predict_intervals(w, a.id, cfg_.mpc.horizon, w.dt,
                                      cfg_.prediction));
    monitor_.observe(w.step_index, preds.back());
  }
  return preds;
}

void BehaviorEngine::record_samples(const WorldState& w, CycleContext& ctx) {
  const LaneId ego_lane = lane_of(w.ego.y, w.road);
  const LaneId target =
      task_target_ ? *task_target_ : ego_lane;  // Case 1: own lane focus

  auto sample_for = [&](const Agent& a, TtcRelation rel) {
    const double gap_len = (w.ego_params.length + a.params.length) / 2.0;
    TtcSample s;
    s.step_index = w.step_index;
    s.agent_id = a.id;
    s.relation = rel;
    s.ttc = compute_ttc(w.ego, a.state, rel, gap_len);
    memory_.record(a.id, a.state, s);
    return s.ttc;
  };

  if (case_id_ == 2) {
    if (const Agent* lead = nearest_agent(w, ego_lane, true,
                                          cfg_.perception_range))
      ctx.min_ttc = std::min(
          ctx.min_ttc, sample_for(*lead, TtcRelation::LeaderSameLane));
    if (target != ego_lane) {
      if (const Agent* lead = nearest_agent(w, target, true,
                                            cfg_.perception_range))
        ctx.min_ttc = std::min(
            ctx.min_ttc, sample_for(*lead, TtcRelation::LeaderTargetLane));
    }
    if (const Agent* follower = nearest_agent(w, target, false,
                                              cfg_.perception_range)) {
      ctx.min_ttc = std::min(
          ctx.min_ttc, sample_for(*follower, TtcRelation::FollowerTargetLane));
      ctx.follower_id = follower->id;
      const auto hist = memory_.last_ttc(follower->id, 3);
      for (const auto& s : hist) ctx.follower_history.push_back(s.ttc);
      ctx.follower_intention =
          hist.size() < 3 ? IntentionLabel::Aggressive
                          : classify_intention(hist, cfg_.aggressive_threshold);
    }
  } else {
    for (const auto& a : w.agents) {
      const double dist =
          std::hypot(a.state.x - w.ego.x, a.state.y - w.ego.y);
      if (dist > cfg_.perception_range) continue;
      const bool ahead = a.state.x >= w.ego.x;
      const LaneId lane = lane_of(a.state.y, w.road);
      const TtcRelation rel =
          ahead ? (lane == ego_lane ? TtcRelation::LeaderSameLane
                                    : TtcRelation::LeaderTargetLane)
                : TtcRelation::FollowerTargetLane;
      sample_for(a, rel);
    }
  }

  // Intention estimates for the scene: any follower with a full window.
  for (const auto& a : w.agents) {
    if (a.state.x >= w.ego.x) continue;
    const auto hist = memory_.last_ttc(a.id, 3);
    if (hist.size() == 3)
      ctx.intentions[a.id] =
          classify_intention(hist, cfg_.aggressive_threshold);
  }
}

SceneDescription BehaviorEngine::build_scene(const WorldState& w,
                                             const CycleContext& ctx) {
  SceneDescription scene =
      describe_scene(w, ctx.preds, ctx.intentions, cfg_.perception_range);
  if (case_id_ == 2) {
    Case2Context c2;
    c2.current = state_;
    c2.allowed_next = graph_.successors(state_);
    c2.cycles_in_state = cycles_in_state_;
    c2.task_target = *task_target_;
    c2.task_source = task_source_;
    c2.follower_id = ctx.follower_id;
    c2.follower_intention = ctx.follower_intention;
    c2.follower_ttc_history = ctx.follower_history;
    c2.min_ttc = ctx.min_ttc;
    scene.case2 = c2;
    scene.text = scene_text_with_case2(scene);
  }
  return scene;
}

std::optional<Decision> BehaviorEngine::request_decision(
    Conversation& conv, const SceneDescription& scene, DecisionKind kind,
    DecisionCycleLog& log) {
  for (int attempt = 0; attempt <= cfg_.format_reminders; ++attempt) {
    const auto t0 = Clock::now();
    const BackendResult r = backend_.complete(conv, scene);
    const double elapsed = seconds_since(t0);
    ++log.requests;
    log.backend_latency_s += elapsed;
    if (!r.ok) {
      log.transport_failure = true;
      log.feedback_text = "backend failure: " + r.error;
      return std::nullopt;
    }
    log.raw_decision = r.text;
    const ParseOutcome p = parse_decision(r.text, kind);
    conv.add_assistant(r.text);
    if (p.ok()) return p.decision;
    conv.add_user(format_reminder(p.error, kind));
  }
  log.transport_failure = true;  // parse exhaustion degrades the same way
  log.feedback_text = "backend failure: decision format never parsed";
  return std::nullopt;
}

void BehaviorEngine::execute_window(WorldState& world, const StepHook& hook,
                                    const Decision& decision,
                                    const VerifyContext& vctx,
                                    const PlanResult& first_plan,
                                    DecisionCycleLog& log) {
  log.source = ActionSource::Planner;
  double carry_compute = log.decision_compute_s;
  for (int s = 0; s < cfg_.n_llm; ++s) {
    const auto t0 = Clock::now();
    ControlInput u;
    if (s == 0) {
      u = first_plan.controls.front();
    } else {
      auto preds = sense(world);
      const MpcProblem prob =
          problem_for_decision(decision, world, preds, cfg_.mpc, vctx);
      const PlanResult plan = solve_lane_conditioned(prob);
      if (plan.status == PlanStatus::Infeasible) {
        log.aborted_mid_cycle = true;
        return;
      }
      u = plan.controls.front();
    }
    world = world_step(world, u);
    monitor_.check(world);
    StepRecord rec;
    rec.u = u;
    rec.source = ActionSource::Planner;
    rec.compute_s = seconds_since(t0) + carry_compute;
    carry_compute = 0.0;
    if (case_id_ == 2) rec.state = state_;
    ++log.controls_applied;
    if (!hook(world, rec)) {
      halted_ = true;
      return;
    }
  }
}

void BehaviorEngine::failsafe_window(WorldState& world, const StepHook& hook,
                                     DecisionCycleLog& log) {
  log.source = ActionSource::Failsafe;
  double carry_compute = log.decision_compute_s;
  for (int s = 0; s < cfg_.n_llm; ++s) {
    const auto t0 = Clock::now();
    const LaneId lane = lane_of(world.ego.y, world.road);
    std::optional<std::pair<VehicleState, VehicleParams>> leader;
    if (const Agent* a = nearest_agent(world, lane, true, 1e9))
      leader = {a->state, a->params};
    const ControlInput u = failsafe_control(world.ego, world.ego_params,
                                            leader, world.road, cfg_.failsafe);
    world = world_step(world, u);
    monitor_.check(world);
    StepRecord rec;
    rec.u = u;
    rec.source = ActionSource::Failsafe;
    rec.compute_s = seconds_since(t0) + carry_compute;
    carry_compute = 0.0;
    if (case_id_ == 2) rec.state = state_;
    ++log.controls_applied;
    if (!hook(world, rec)) {
      halted_ = true;
      return;
    }
  }
}

VerifyContext BehaviorEngine::verify_context() const {
  VerifyContext ctx;
  if (case_id_ == 2) {
    ctx.task_target = task_target_;
    ctx.task_source = task_source_;
  }
  return ctx;
}

void BehaviorEngine::run_case1(WorldState& world, const StepHook& hook,
                               CycleContext& ctx, DecisionCycleLog& log) {
  const SceneDescription scene = build_scene(world, ctx);
  log.scene_text = scene.text;
  Conversation conv = Conversation::with_system(case1_system_);
  conv.add_user(scene.text);

  std::vector<LaneId> rejected;
  int proposals = 0;
  while (true) {
    const auto options = remaining_options(rejected, scene.ego_lane);
    if (options.empty() || proposals > kNumLanes) {
      log.retries = std::max(0, proposals - 1);
      log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
      failsafe_window(world, hook, log);
      return;
    }
    const auto d = request_decision(conv, scene, DecisionKind::LaneChoice, log);
    ++proposals;
    if (!d) {
      log.retries = std::max(0, proposals - 1);
      log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
      failsafe_window(world, hook, log);
      return;
    }
    log.parsed = d;
    if (std::find(rejected.begin(), rejected.end(), d->lane) !=
        rejected.end()) {
      conv.add_user("The proposed " + lane_name(d->lane) +
                    " is rejected (already tried). Please choose a different "
                    "lane.");
      continue;
    }
    const Verdict verdict = verify(*d, world, ctx.preds, cfg_.mpc);
    log.mpc_outcome = verdict.outcome;
    log.feedback_text = verdict.feedback.text;
    if (verdict.approved()) {
      log.retries = std::max(0, proposals - 1);
      log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
      execute_window(world, hook, *d, {}, verdict.plan, log);
      return;
    }
    log.mpc_worst = verdict.plan.diagnostics.worst;
    rejected.push_back(d->lane);
    conv.add_user(verdict.feedback.text);
  }
}

void BehaviorEngine::run_case2(WorldState& world, const StepHook& hook,
                               CycleContext& ctx, DecisionCycleLog& log) {
  if (!task_source_set_) {
    task_source_ = lane_of(world.ego.y, world.road);
    task_source_set_ = true;
  }

  const SceneDescription scene = build_scene(world, ctx);
  log.scene_text = scene.text;

  auto finish_cycle = [&](const Decision& d, const PlanResult& plan) {
    const BehaviorState prev = state_;
    log.executed_transition = {prev, d.state};
    cycles_in_state_ = d.state == prev ? cycles_in_state_ + 1 : 1;
    state_ = d.state;
    log.state_after = state_;
    execute_window(world, hook, d, verify_context(), plan, log);
    log.state_after = state_;
  };

  // Committed abort maneuver: no proposal until recentered.
  if (state_ == BehaviorState::Abort) {
    Decision d;
    d.kind = DecisionKind::StateChoice;
    const double src_center = world.road.lane_center(task_source_);
    d.state = std::abs(world.ego.y - src_center) <= cfg_.recenter_tol
                  ? BehaviorState::Stay
                  : BehaviorState::Abort;
    const Verdict verdict =
        verify(d, world, ctx.preds, cfg_.mpc, verify_context());
    log.parsed = d;
    log.mpc_outcome = verdict.outcome;
    log.feedback_text = verdict.feedback.text;
    log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
    if (verdict.approved()) {
      finish_cycle(d, verdict.plan);
    } else {
      log.mpc_worst = verdict.plan.diagnostics.worst;
      log.state_after = state_;
      failsafe_window(world, hook, log);
    }
    return;
  }

  Conversation conv = Conversation::with_system(case2_system_);
  conv.add_user(scene.text);

  int proposals = 0;
  bool last_safety_failed = false;
  while (proposals <= cfg_.retry_budget) {
    const auto d =
        request_decision(conv, scene, DecisionKind::StateChoice, log);
    ++proposals;
    if (!d) {
      log.retries = std::max(0, proposals - 1);
      log.state_after = state_;
      log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
      failsafe_window(world, hook, log);
      return;
    }
    log.parsed = d;

    if (d->state == BehaviorState::Finish &&
        cycles_in_state_ < cfg_.dwell_min_cycles) {
      log.dwell_rejected = true;
      std::ostringstream os;
      os << "Transition check failed: remain in Attempt for at least "
         << cfg_.dwell_min_cycles
         << " cycles to observe the follower (completed " << cycles_in_state_
         << "). Please choose another state.";
      conv.add_user(os.str());
      continue;
    }

    const TransitionVerdict tv =
        reflect(d->state, state_, graph_, ctx.min_ttc,
                d->state == BehaviorState::Finish ? ctx.follower_intention
                                                  : std::nullopt,
                cfg_.ttc_threshold);
    log.reflection = tv;
    if (!tv.overall) {
      last_safety_failed = !tv.safety_check;
      conv.add_user(reflection_feedback(tv, state_, d->state));
      continue;
    }

    const Verdict verdict =
        verify(*d, world, ctx.preds, cfg_.mpc, verify_context());
    log.mpc_outcome = verdict.outcome;
    log.feedback_text = verdict.feedback.text;
    if (verdict.approved()) {
      log.retries = std::max(0, proposals - 1);
      log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
      finish_cycle(*d, verdict.plan);
      return;
    }
    log.mpc_worst = verdict.plan.diagnostics.worst;
    conv.add_user(verdict.feedback.text);
  }

  // Retry budget exhausted: remain in place, or abandon the maneuver when
  // the safety check is what kept failing mid-attempt.
  log.retries = std::max(0, proposals - 1);
  Decision fallback;
  fallback.kind = DecisionKind::StateChoice;
  fallback.state = (state_ == BehaviorState::Attempt && last_safety_failed)
                       ? BehaviorState::Abort
                       : state_;
  const Verdict verdict =
      verify(fallback, world, ctx.preds, cfg_.mpc, verify_context());
  log.parsed = fallback;
  log.mpc_outcome = verdict.outcome;
  log.feedback_text = verdict.feedback.text;
  log.decision_compute_s = seconds_since(ctx.t0) - log.backend_latency_s;
  if (verdict.approved()) {
    finish_cycle(fallback, verdict.plan);
  } else {
    log.mpc_worst = verdict.plan.diagnostics.worst;
    log.state_after = state_;
    failsafe_window(world, hook, log);
  }
}

DecisionCycleLog BehaviorEngine::run_cycle(WorldState& world,
                                           const StepHook& hook) {
  DecisionCycleLog log;
  log.step_index = world.step_index;
  log.case_id = case_id_;
  log.state_after = state_;

  CycleContext ctx;
  ctx.t0 = Clock::now();
  ctx.preds = sense(world);
  record_samples(world, ctx);

  if (case_id_ == 1)
    run_case1(world, hook, ctx, log);
  else
    run_case2(world, hook, ctx, log);
  return log;
}

}  // namespace lcmpc

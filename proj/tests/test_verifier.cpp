#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lcmpc/planner.hpp"
#include "lcmpc/verifier.hpp"

using namespace lcmpc;

namespace {

WorldState open_road() {
  WorldState w;
  w.ego = {0, 6, 30, 0};
  w.road = RoadGeometry::make(4.0, 2.0);
  return w;
}

IntervalPrediction blocking_band(int id, LaneId lane, const RoadGeometry& road,
                                 int k) {
  IntervalPrediction pred;
  pred.agent_id = id;
  pred.agent_half_width = 1.0;
  pred.x_now = 30.0;
  pred.y_now = road.lane_center(lane);
  pred.horizon.assign(k, IntervalBox{-5.0, 60.0, pred.y_now - 0.2,
                                     pred.y_now + 0.2});
  return pred;
}

Decision lane_choice(LaneId lane) {
  Decision d;
  d.kind = DecisionKind::LaneChoice;
  d.lane = lane;
  return d;
}

Decision state_choice(BehaviorState s) {
  Decision d;
  d.kind = DecisionKind::StateChoice;
  d.state = s;
  return d;
}

}  // namespace

TEST_CASE("keep-lane on an empty road is approved with the happy phrase") {
  const auto w = open_road();
  const MpcConfig cfg;
  const auto v = verify(lane_choice(LaneId::Middle), w, {}, cfg);
  CHECK(v.approved());
  CHECK(v.plan.status == PlanStatus::Feasible);
  CHECK(v.feedback.text.find("the verifier is happy with the proposed") !=
        std::string::npos);
  CHECK(v.feedback.text.find("Middle Lane") != std::string::npos);
}

TEST_CASE("blocked target lane is rejected; feedback names the constraint") {
  const auto w = open_road();
  MpcConfig cfg;
  const auto pred = blocking_band(3, LaneId::Right, w.road, cfg.horizon);
  const auto v = verify(lane_choice(LaneId::Right), w, {pred}, cfg);
  CHECK(!v.approved());
  CHECK(v.plan.status == PlanStatus::Infeasible);
  CHECK(v.feedback.violated_constraint == "safety_separation");
  CHECK(v.feedback.agent_id == 3);
  CHECK(v.feedback.text.find("safety separation") != std::string::npos);
  CHECK(v.feedback.text.find("the car 3") != std::string::npos);
  CHECK(v.feedback.text.find("reevaluate the scenario") != std::string::npos);
  // structured fields mirror the plan diagnostics exactly
  CHECK(v.feedback.step == v.plan.diagnostics.worst.step);
  CHECK(v.feedback.magnitude == v.plan.diagnostics.worst.magnitude);
  CHECK(v.feedback.agent_id == v.plan.diagnostics.worst.agent_id);
}

TEST_CASE("approved keep-lane objective matches the grid oracle") {
  auto w = open_road();
  MpcConfig cfg;
  cfg.horizon = 3;  // within the oracle's combinatorial bound
  const auto v = verify(lane_choice(LaneId::Middle), w, {}, cfg);
  REQUIRE(v.approved());

  MpcProblem p;
  p.s0 = w.ego;
  p.k = 3;
  p.dt = w.dt;
  p.target_lane = LaneId::Middle;
  p.road = w.road;
  p.params = w.ego_params;
  p.cfg = cfg;
  const auto oracle = grid_oracle(p, {-5, -2.5, 0, 1.5, 3},
                                  {-0.2, -0.05, 0, 0.05, 0.2});
  REQUIRE(oracle.status == PlanStatus::Feasible);
  CHECK(v.plan.diagnostics.objective <=
        oracle.diagnostics.objective +
            0.05 * std::abs(oracle.diagnostics.objective));
}

TEST_CASE("verifier soundness: approval implies a re-checkable plan") {
  const auto w = open_road();
  MpcConfig cfg;
  const auto v = verify(lane_choice(LaneId::Left), w, {}, cfg);
  REQUIRE(v.approved());
  const auto problem =
      problem_for_decision(lane_choice(LaneId::Left), w, {}, cfg, {});
  const auto chk = evaluate_plan(problem, v.plan.controls);
  CHECK(chk.max_violation <= cfg.feas_tol);
}

TEST_CASE("remaining options ordering and exhaustion") {
  CHECK(remaining_options({LaneId::Left}, LaneId::Middle) ==
        std::vector<LaneId>{LaneId::Middle, LaneId::Right});
  CHECK(remaining_options({}, LaneId::Middle) ==
        std::vector<LaneId>{LaneId::Middle, LaneId::Left, LaneId::Right});
  CHECK(remaining_options({LaneId::Left, LaneId::Middle, LaneId::Right},
                          LaneId::Middle)
            .empty());
  CHECK(remaining_options({LaneId::Right}, LaneId::Right) ==
        std::vector<LaneId>{LaneId::Middle, LaneId::Left});
}

TEST_CASE("state choices map to the documented planning problems") {
  const auto w = open_road();
  MpcConfig cfg;
  VerifyContext ctx;
  ctx.task_target = LaneId::Left;
  ctx.task_source = LaneId::Middle;

  const auto attempt =
      problem_for_decision(state_choice(BehaviorState::Attempt), w, {}, cfg,
                           ctx);
  CHECK(attempt.target_lane == LaneId::Left);
  REQUIRE(attempt.commit_band.has_value());
  CHECK(attempt.commit_band->first == doctest::Approx(2.0));
  CHECK(attempt.commit_band->second == doctest::Approx(6.0));
  CHECK(attempt.lateral_setpoint() == doctest::Approx(4.0));

  const auto finish =
      problem_for_decision(state_choice(BehaviorState::Finish), w, {}, cfg,
                           ctx);
  CHECK(finish.target_lane == LaneId::Left);
  CHECK(!finish.commit_band.has_value());
  CHECK(finish.lateral_setpoint() == doctest::Approx(2.0));

  const auto abort_p =
      problem_for_decision(state_choice(BehaviorState::Abort), w, {}, cfg,
                           ctx);
  CHECK(abort_p.target_lane == LaneId::Middle);

  const auto stay =
      problem_for_decision(state_choice(BehaviorState::Stay), w, {}, cfg, ctx);
  CHECK(stay.target_lane == LaneId::Middle);
}

TEST_CASE("state choice without task context is a usage error") {
  const auto w = open_road();
  const MpcConfig cfg;
  CHECK_THROWS_AS(
      verify(state_choice(BehaviorState::Attempt), w, {}, cfg, {}),
      std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lcmpc/prediction.hpp"

using namespace lcmpc;

namespace {

WorldState world_with_agent(double x, double vx, double lo, double hi,
                            PolicyMode mode = PolicyMode::ConstantSpeed) {
  WorldState w;
  w.ego = {0, 6, 25, 0};
  w.road = RoadGeometry::make(4.0, 2.0);
  Agent a;
  a.id = 7;
  a.state = {x, 6, vx, 0};
  a.policy.mode = mode;
  a.policy.accel_lo = lo;
  a.policy.accel_hi = hi;
  a.y_home = 6;
  w.agents.push_back(a);
  return w;
}

TtcSample sample(double ttc) {
  TtcSample s;
  s.ttc = ttc;
  s.relation = TtcRelation::FollowerTargetLane;
  return s;
}

std::vector<TtcSample> history(double a, double b, double c) {
  return {sample(a), sample(b), sample(c)};
}

}  // namespace

TEST_CASE("zero-uncertainty envelope gives degenerate intervals") {
  const auto w = world_with_agent(50, 20, 0, 0);
  const auto pred = predict_intervals(w, 7, 5, 0.1);
  REQUIRE(pred.horizon.size() == 5);
  for (int i = 1; i <= 5; ++i) {
    CHECK(pred.horizon[i - 1].x_lo == doctest::Approx(50 + 2.0 * i).epsilon(1e-12));
    CHECK(pred.horizon[i - 1].x_hi == doctest::Approx(50 + 2.0 * i).epsilon(1e-12));
  }
}

TEST_CASE("envelope bracket at i=5 matches the closed form") {
  const auto w = world_with_agent(50, 20, -2, 2);
  const auto pred = predict_intervals(w, 7, 5, 0.1);
  CHECK(pred.horizon[4].x_lo == doctest::Approx(59.75).epsilon(1e-12));
  CHECK(pred.horizon[4].x_hi == doctest::Approx(60.25).epsilon(1e-12));
}

TEST_CASE("lateral band for lane keepers") {
  const auto w = world_with_agent(50, 20, -1, 1);
  const auto pred = predict_intervals(w, 7, 4, 0.1);
  for (const auto& box : pred.horizon) {
    CHECK(box.y_lo == doctest::Approx(5.8));
    CHECK(box.y_hi == doctest::Approx(6.2));
  }
}

TEST_CASE("braking floor: the lower bound never retreats") {
  auto w = world_with_agent(50, 3, -5, 0);
  const auto pred = predict_intervals(w, 7, 20, 0.1);
  double prev_lo = 50;
  for (const auto& box : pred.horizon) {
    CHECK(box.x_lo >= prev_lo - 1e-12);
    prev_lo = box.x_lo;
  }
  // stop position: x + v^2/(2|a|) = 50 + 9/10
  CHECK(pred.horizon.back().x_lo == doctest::Approx(50.9).epsilon(1e-9));
}

TEST_CASE("speed cap limits the upper bound") {
  auto w = world_with_agent(50, 39, 0, 3);
  w.agents[0].params.v_max = 40;
  const auto pred = predict_intervals(w, 7, 20, 0.1);
  // after reaching 40 m/s the bound grows linearly at 40 m/s
  const auto& last = pred.horizon.back();
  CHECK(last.x_hi < 50 + 40 * 2.0 + 1e-9);
  CHECK(last.x_hi > 50 + 39 * 2.0);
}

TEST_CASE("monotone widening in lookahead") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(0.0, 38.0);
  std::uniform_real_distribution<double> lo(-5.0, 0.0);
  std::uniform_real_distribution<double> hi(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = world_with_agent(100, v(rng), lo(rng), hi(rng));
    const auto pred = predict_intervals(w, 7, 15, 0.1);
    double prev_w = 0.0;
    for (const auto& box : pred.horizon) {
      const double width = box.x_hi - box.x_lo;
      CHECK(width >= prev_w - 1e-12);
      prev_w = width;
    }
  }
}

TEST_CASE("containment against the simulator over full episodes") {
  // The simulator itself is the oracle: every realized position must lie in
  // every box that predicted it, for every policy mode.
  WorldState w;
  w.ego = {0, 6, 30, 0};
  w.road = RoadGeometry::make(4.0, 2.0);
  Agent cruiser;
  cruiser.id = 1;
  cruiser.state = {60, 2, 22, 0};
  cruiser.policy.mode = PolicyMode::ConstantSpeed;
  cruiser.policy.accel_lo = -0.5;
  cruiser.policy.accel_hi = 0.5;
  cruiser.y_home = 2;
  Agent braker;
  braker.id = 2;
  braker.state = {40, 6, 18, 0};
  braker.policy.mode = PolicyMode::PiecewiseAccel;
  braker.policy.schedule = {{30, -3.0}, {80, 1.0}, {150, -5.0}};
  braker.policy.accel_lo = -5.0;
  braker.policy.accel_hi = 1.0;
  braker.y_home = 6;
  Agent follower;
  follower.id = 3;
  follower.state = {-25, 6, 31, 0};
  follower.policy.mode = PolicyMode::FollowerReactive;
  follower.policy.cooperative = false;
  follower.policy.accel_lo = -5.0;
  follower.policy.accel_hi = 1.5;
  follower.y_home = 6;
  Agent changer;
  changer.id = 4;
  changer.state = {90, 10, 26, 0};
  changer.policy.mode = PolicyMode::ConstantSpeed;
  changer.policy.accel_lo = -0.2;
  changer.policy.accel_hi = 0.2;
  changer.policy.lane_change = LaneChangePlan{60, LaneId::Middle, 30};
  changer.y_home = 10;
  w.agents = {cruiser, braker, follower, changer};

  ContainmentMonitor monitor;
  const int k = 10;
  for (int step = 0; step < 300; ++step) {
    for (const auto& a : w.agents)
      monitor.observe(w.step_index, predict_intervals(w, a.id, k, w.dt));
    w = world_step(w, ControlInput{std::sin(step * 0.1), 0.0});
    CHECK_NOTHROW(monitor.check(w));
  }
  CHECK(monitor.outstanding() > 0);  // tail predictions still pending
}

TEST_CASE("forced containment break trips the monitor") {
  auto w = world_with_agent(50, 20, -2, 2, PolicyMode::PiecewiseAccel);
  w.agents[0].policy.schedule = {{0, 1.0}};
  w.agents[0].policy.accel_hi = 2.0;
  PredictionConfig cfg;
  cfg.force_containment_break = true;
  ContainmentMonitor monitor;
  monitor.observe(w.step_index, predict_intervals(w, 7, 5, w.dt, cfg));
  w = world_step(w, {0, 0});
  CHECK_THROWS_AS(monitor.check(w), ContainmentViolation);
}

TEST_CASE("ttc leader and follower arithmetic") {
  const VehicleState ego{0, 6, 30, 0};
  const VehicleState leader{65, 6, 20, 0};
  CHECK(compute_ttc(ego, leader, TtcRelation::LeaderSameLane, 5.0) ==
        doctest::Approx(6.0));

  const VehicleState fast_leader{65, 6, 31, 0};
  CHECK(std::isinf(
      compute_ttc(ego, fast_leader, TtcRelation::LeaderSameLane, 5.0)));

  const VehicleState follower{-30, 6, 35, 0};
  CHECK(compute_ttc(ego, follower, TtcRelation::FollowerTargetLane, 5.0) ==
        doctest::Approx(5.0));

  const VehicleState overlapping{2, 6, 20, 0};
  CHECK(compute_ttc(ego, overlapping, TtcRelation::LeaderSameLane, 5.0) ==
        0.0);
}

TEST_CASE("intention classification rule") {
  CHECK(classify_intention(history(6.0, 4.5, 3.0), 6.0) ==
        IntentionLabel::Aggressive);
  CHECK(classify_intention(history(4.0, 4.2, 4.5), 6.0) ==
        IntentionLabel::Cooperative);
  CHECK(classify_intention(history(9.0, 8.0, 7.0), 6.0) ==
        IntentionLabel::Cooperative);
  CHECK(classify_intention(history(8.0, 7.0, kInfTtc), 6.0) ==
        IntentionLabel::Cooperative);
  CHECK(classify_intention(history(kInfTtc, 8.0, 3.0), 6.0) ==
        IntentionLabel::Aggressive);
  CHECK_THROWS_AS(classify_intention({sample(1.0), sample(2.0)}, 6.0),
                  NotEnoughHistory);
}

TEST_CASE("classifier depends only on the ordered window") {
  CHECK(classify_intention(history(6.0, 4.5, 3.0), 6.0) !=
        classify_intention(history(3.0, 4.5, 6.0), 6.0));
  CHECK(classify_intention(history(6.0, 4.5, 3.0), 6.0) ==
        classify_intention(history(6.0, 4.5, 3.0), 6.0));
}

TEST_CASE("memory buffer keeps the last M ordered samples") {
  MemoryBuffer mem(3);
  for (int i = 0; i < 5; ++i) {
    TtcSample s;
    s.step_index = i;
    s.agent_id = 9;
    s.ttc = 10.0 - i;
    mem.record(9, VehicleState{}, s);
  }
  CHECK(mem.count(9) == 3);
  const auto last = mem.last_ttc(9, 3);
  REQUIRE(last.size() == 3);
  CHECK(last[0].step_index == 2);
  CHECK(last[2].step_index == 4);
  CHECK(mem.last_ttc(1, 3).empty());
}

TEST_CASE("unknown agent id is rejected") {
  const auto w = world_with_agent(50, 20, -1, 1);
  CHECK_THROWS_AS(predict_intervals(w, 99, 5, 0.1), std::invalid_argument);
}

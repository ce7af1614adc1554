#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lcmpc/scenario.hpp"
#include "lcmpc/world.hpp"

using namespace lcmpc;

namespace {

RoadGeometry road4() { return RoadGeometry::make(4.0, 2.0); }

Agent make_agent(int id, double x, double y, double vx,
                 PolicyMode mode = PolicyMode::ConstantSpeed,
                 double lo = -0.5, double hi = 0.5) {
  Agent a;
  a.id = id;
  a.state = {x, y, vx, 0};
  a.policy.mode = mode;
  a.policy.accel_lo = lo;
  a.policy.accel_hi = hi;
  a.y_home = y;
  return a;
}

WorldState empty_world() {
  WorldState w;
  w.ego = {0, 6, 20, 0};
  w.road = road4();
  return w;
}

}  // namespace

TEST_CASE("lane_of maps centers and boundaries") {
  const auto r = road4();
  CHECK(lane_of(2.0, r) == LaneId::Left);
  CHECK(lane_of(6.0, r) == LaneId::Middle);
  CHECK(lane_of(10.0, r) == LaneId::Right);
  CHECK(lane_of(4.0, r) == LaneId::Middle);  // boundary goes to higher index
  CHECK(lane_of(8.0, r) == LaneId::Right);
  CHECK(lane_of(-3.0, r) == LaneId::Left);   // clamped
  CHECK(lane_of(15.0, r) == LaneId::Right);
}

TEST_CASE("lane partition: exactly one lane per y") {
  const auto r = road4();
  for (double y = 0.0; y < 12.0; y += 0.01) {
    const LaneId lane = lane_of(y, r);
    int members = 0;
    for (LaneId l : {LaneId::Left, LaneId::Middle, LaneId::Right})
      members += (l == lane);
    CHECK(members == 1);
  }
}

TEST_CASE("lanes_of_interval") {
  const auto r = road4();
  CHECK(lanes_of_interval(5.8, 6.2, 1.0, r) ==
        std::set<LaneId>{LaneId::Middle});
  CHECK(lanes_of_interval(3.8, 4.2, 1.0, r) ==
        std::set<LaneId>{LaneId::Left, LaneId::Middle});
  CHECK(lanes_of_interval(0.5, 11.5, 1.0, r) ==
        std::set<LaneId>{LaneId::Left, LaneId::Middle, LaneId::Right});
  CHECK_THROWS_AS(lanes_of_interval(5.0, 4.0, 1.0, r), std::invalid_argument);
}

TEST_CASE("lane preference order") {
  CHECK(lane_preference_order(LaneId::Middle) ==
        std::vector<LaneId>{LaneId::Middle, LaneId::Left, LaneId::Right});
  CHECK(lane_preference_order(LaneId::Left) ==
        std::vector<LaneId>{LaneId::Left, LaneId::Middle, LaneId::Right});
  CHECK(lane_preference_order(LaneId::Right) ==
        std::vector<LaneId>{LaneId::Right, LaneId::Middle, LaneId::Left});
}

TEST_CASE("world_step advances ego only in empty traffic") {
  auto w = empty_world();
  const auto next = world_step(w, ControlInput{0, 0});
  CHECK(next.ego.x == doctest::Approx(2.0));
  CHECK(next.step_index == 1);
  CHECK(next.agents.empty());
}

TEST_CASE("constant-speed agent advances vx*dt per step") {
  auto w = empty_world();
  w.agents.push_back(make_agent(2, 50, 6, 20));
  const auto next = world_step(w, ControlInput{0, 0});
  CHECK(next.agents[0].state.x == doctest::Approx(52.0));
  CHECK(next.agents[0].state.vx == doctest::Approx(20.0));
  CHECK(next.agents[0].state.y == doctest::Approx(6.0));
}

TEST_CASE("piecewise accel schedule applies from its start step") {
  auto w = empty_world();
  auto a = make_agent(2, 50, 6, 20, PolicyMode::PiecewiseAccel, -3.0, 1.0);
  a.policy.schedule = {{2, -2.0}};
  w.agents.push_back(a);
  w = world_step(w, {0, 0});  // step 0: accel 0
  CHECK(w.agents[0].state.vx == doctest::Approx(20.0));
  w = world_step(w, {0, 0});  // step 1: accel 0
  CHECK(w.agents[0].state.vx == doctest::Approx(20.0));
  w = world_step(w, {0, 0});  // step 2: accel -2
  CHECK(w.agents[0].state.vx == doctest::Approx(19.8));
}

TEST_CASE("cooperative follower decelerates when ego enters its half lane") {
  auto w = empty_world();
  w.ego = {20, 6, 25, 0};  // 20 m ahead of the follower, same lane
  auto a = make_agent(3, 0, 6, 25, PolicyMode::FollowerReactive, -3.0, 1.0);
  a.policy.cooperative = true;
  w.agents.push_back(a);
  CHECK(policy_accel(w.agents[0], w) < 0.0);
  const auto next = world_step(w, {0, 0});
  CHECK(next.agents[0].state.vx < 25.0);
}

TEST_CASE("aggressive follower accelerates to close the gap") {
  auto w = empty_world();
  w.ego = {20, 6, 25, 0};
  auto a = make_agent(3, 0, 6, 25, PolicyMode::FollowerReactive, -5.0, 1.5);
  a.policy.cooperative = false;
  w.agents.push_back(a);
  CHECK(policy_accel(w.agents[0], w) == doctest::Approx(1.5));
}

TEST_CASE("aggressive follower brakes inside the emergency gap") {
  auto w = empty_world();
  w.ego = {12, 6, 25, 0};  // bumper gap 7 m < 8 m
  auto a = make_agent(3, 0, 6, 25, PolicyMode::FollowerReactive, -5.0, 1.5);
  a.policy.cooperative = false;
  w.agents.push_back(a);
  CHECK(policy_accel(w.agents[0], w) == doctest::Approx(-5.0));
}

TEST_CASE("follower ignores vehicles outside the half-lane window") {
  auto w = empty_world();
  w.ego = {20, 2, 25, 0};  // adjacent lane center: |dy| = 4 > 2.1
  auto a = make_agent(3, 0, 6, 25, PolicyMode::FollowerReactive, -3.0, 1.5);
  a.policy.cooperative = false;
  w.agents.push_back(a);
  CHECK(policy_accel(w.agents[0], w) == doctest::Approx(0.0));
}

TEST_CASE("scheduled lane change follows a monotone lateral path") {
  auto w = empty_world();
  auto a = make_agent(4, 30, 6, 20);
  a.policy.lane_change = LaneChangePlan{5, LaneId::Left, 20};
  w.agents.push_back(a);
  double prev_y = 6.0;
  for (int i = 0; i < 40; ++i) {
    w = world_step(w, {0, 0});
    const double y = w.agents[0].state.y;
    CHECK(y <= prev_y + 1e-12);  // moving toward the left lane (smaller y)
    prev_y = y;
  }
  CHECK(w.agents[0].state.y == doctest::Approx(2.0));
  CHECK(w.agents[0].state.vy == doctest::Approx(0.0));
}

TEST_CASE("realized accelerations stay inside declared envelopes") {
  auto w = empty_world();
  w.ego = {40, 6, 30, 0};
  auto follower =
      make_agent(2, 20, 6, 29, PolicyMode::FollowerReactive, -3.0, 1.5);
  follower.policy.cooperative = true;
  auto cruiser = make_agent(3, 80, 10, 1.0, PolicyMode::PiecewiseAccel, -2.0,
                            0.5);
  cruiser.policy.schedule = {{0, -2.0}};  // brakes to a stop: clamp at 0
  w.agents.push_back(follower);
  w.agents.push_back(cruiser);
  for (int i = 0; i < 100; ++i) {
    const auto before = w;
    w = world_step(w, {0, 0});
    for (std::size_t k = 0; k < w.agents.size(); ++k) {
      const double realized =
          (w.agents[k].state.vx - before.agents[k].state.vx) / w.dt;
      CHECK(realized >= w.agents[k].policy.accel_lo - 1e-9);
      CHECK(realized <= w.agents[k].policy.accel_hi + 1e-9);
    }
  }
  CHECK(w.agents[1].state.vx == 0.0);  // braked to a standstill, no reverse
}

TEST_CASE("collision detection with touching edges excluded") {
  auto w = empty_world();
  w.ego = {0, 6, 20, 0};
  w.agents.push_back(make_agent(2, 100, 6, 20));
  CHECK(!check_collision(w));

  w.agents[0].state.x = 4.9;
  CHECK(check_collision(w));
  CHECK(check_collision(w)->agent_id == 2);

  w.agents[0].state.x = 5.0;  // exact touch is not a collision
  CHECK(!check_collision(w));

  w.agents[0].state.x = 2.0;
  w.agents[0].state.y = 8.0;  // lateral touch: |dy| == 2.0 == width
  CHECK(!check_collision(w));
  w.agents[0].state.y = 7.9;
  CHECK(check_collision(w));
}

TEST_CASE("world stepping is deterministic") {
  auto build = [] {
    auto w = empty_world();
    auto a = make_agent(2, 30, 6, 22, PolicyMode::FollowerReactive, -3, 1.5);
    a.policy.cooperative = false;
    w.agents.push_back(a);
    return w;
  };
  auto w1 = build();
  auto w2 = build();
  for (int i = 0; i < 50; ++i) {
    w1 = world_step(w1, {0.5, 0.01});
    w2 = world_step(w2, {0.5, 0.01});
  }
  CHECK(w1.ego.x == w2.ego.x);
  CHECK(w1.ego.y == w2.ego.y);
  CHECK(w1.agents[0].state.x == w2.agents[0].state.x);
}

TEST_CASE("scenario parsing, validation, and jitter determinism") {
  const std::string text = R"({
    "schema": 1,
    "name": "t",
    "road": {"lane_width": 4.0},
    "dt": 0.1,
    "episode_steps": 100,
    "ego": {"state": {"x": 0, "y": 6, "vx": 25}},
    "agents": [
      {"id": 2, "state": {"x": 40, "y": 6, "vx": 20},
       "policy": {"mode": "constant_speed", "envelope": [-0.5, 0.5]}}
    ],
    "jitter": {"speed_frac": 0.05, "x_m": 2.0}
  })";
  const Scenario sc = parse_scenario(text);
  CHECK(sc.agents.size() == 1);
  CHECK(!sc.content_hash.empty());

  const auto w1 = make_world(sc, 7);
  const auto w2 = make_world(sc, 7);
  const auto w3 = make_world(sc, 8);
  CHECK(w1.agents[0].state.vx == w2.agents[0].state.vx);
  CHECK(w1.agents[0].state.x == w2.agents[0].state.x);
  CHECK(w1.agents[0].state.vx != w3.agents[0].state.vx);

  // envelope must straddle zero
  const std::string bad = R"({
    "schema": 1, "ego": {"state": {"x": 0, "y": 6, "vx": 25}},
    "agents": [{"id": 2, "state": {"x": 40, "y": 6, "vx": 20},
                "policy": {"mode": "constant_speed", "envelope": [0.5, 1.0]}}]
  })";
  CHECK_THROWS_AS(parse_scenario(bad), ScenarioError);

  const std::string wrong_schema =
      R"({"schema": 2, "ego": {"state": {"x":0,"y":6,"vx":25}}})";
  CHECK_THROWS_AS(parse_scenario(wrong_schema), ScenarioError);

  // overlapping start
  const std::string overlap = R"({
    "schema": 1, "ego": {"state": {"x": 0, "y": 6, "vx": 25}},
    "agents": [{"id": 2, "state": {"x": 3, "y": 6, "vx": 20},
                "policy": {"mode": "constant_speed", "envelope": [-0.5, 0.5]}}]
  })";
  CHECK_THROWS_AS(make_world(parse_scenario(overlap), 0), ScenarioError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lcmpc/decision.hpp"

using namespace lcmpc;

namespace {

WorldState three_car_world() {
  WorldState w;
  w.ego = {100, 6, 28, 0};
  w.road = RoadGeometry::make(4.0, 2.0);
  Agent a1;
  a1.id = 2;
  a1.state = {160, 6, 22, 0};
  a1.y_home = 6;
  a1.policy.accel_lo = -1;
  a1.policy.accel_hi = 1;
  Agent a2;
  a2.id = 3;
  a2.state = {70, 2, 33, 0};
  a2.y_home = 2;
  a2.policy.accel_lo = -2;
  a2.policy.accel_hi = 1.5;
  Agent a3;
  a3.id = 4;
  a3.state = {140, 10, 28, 0};
  a3.y_home = 10;
  a3.policy.accel_lo = -1;
  a3.policy.accel_hi = 1;
  w.agents = {a1, a2, a3};
  return w;
}

SceneDescription scene_of(const WorldState& w,
                          const std::map<int, IntentionLabel>& intents = {},
                          double range = 150.0) {
  std::vector<IntervalPrediction> preds;
  for (const auto& a : w.agents)
    preds.push_back(predict_intervals(w, a.id, 8, 0.1));
  return describe_scene(w, preds, intents, range);
}

}  // namespace

TEST_CASE("parse: lane decision with rationale") {
  const auto p = parse_decision(
      "The middle lane is blocked by a slow car.\nDECISION: Left Lane",
      DecisionKind::LaneChoice);
  REQUIRE(p.ok());
  CHECK(p.decision.lane == LaneId::Left);
  CHECK(p.decision.rationale == "The middle lane is blocked by a slow car.");
}

TEST_CASE("parse: no decision line") {
  const auto p = parse_decision("I would pick the left or right lane",
                                DecisionKind::LaneChoice);
  CHECK(p.error == ParseError::NoDecisionLine);
}

TEST_CASE("parse: multiple decision lines") {
  const auto p = parse_decision("DECISION: Stay\nDECISION: Finish",
                                DecisionKind::StateChoice);
  CHECK(p.error == ParseError::MultipleDecisionLines);
}

TEST_CASE("parse: unknown token") {
  const auto p =
      parse_decision("DECISION: Hard Shoulder", DecisionKind::LaneChoice);
  CHECK(p.error == ParseError::UnknownToken);
}

TEST_CASE("parse: case-insensitive with trailing period") {
  const auto p = parse_decision("reasoning...\ndecision: middle lane.",
                                DecisionKind::LaneChoice);
  REQUIRE(p.ok());
  CHECK(p.decision.lane == LaneId::Middle);

  const auto s = parse_decision("DECISION: ATTEMPT", DecisionKind::StateChoice);
  REQUIRE(s.ok());
  CHECK(s.decision.state == BehaviorState::Attempt);
}

TEST_CASE("parse: fuzzing never crashes and always yields a named outcome") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> len(0, 200);
  std::uniform_int_distribution<int> byte(0, 127);
  std::uniform_int_distribution<int> kindpick(0, 1);
  const std::string seeds[] = {"DECISION:", "decision: ", "Left Lane", "Stay",
                               "\n", ":", "DECISION: Left Lane\n"};
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) {
      if (byte(rng) < 8)
        s += seeds[static_cast<std::size_t>(byte(rng)) % 7];
      else
        s += static_cast<char>(byte(rng));
    }
    const auto kind = kindpick(rng) ? DecisionKind::LaneChoice
                                    : DecisionKind::StateChoice;
    const auto p = parse_decision(s, kind);
    const bool named =
        p.error == ParseError::None || p.error == ParseError::NoDecisionLine ||
        p.error == ParseError::MultipleDecisionLines ||
        p.error == ParseError::UnknownToken;
    CHECK(named);
  }
}

TEST_CASE("scene: empty road golden") {
  WorldState w;
  w.ego = {0, 6, 30, 0};
  w.road = RoadGeometry::make(4.0, 2.0);
  const auto scene = describe_scene(w, {}, {}, 150.0);
  CHECK(scene.facts.empty());
  CHECK(scene.text ==
        "You are driving on a one-way three-lane highway.\n"
        "The ego car is driving on the middle lane at 30.0 m/s. The speed "
        "limit is 40.0 m/s.\n"
        "There are no surrounding vehicles within the perception range; all "
        "lanes are clear.\n");
}

TEST_CASE("scene: golden three-car rendering, ordering, and phrases") {
  const auto scene = scene_of(three_car_world(),
                              {{3, IntentionLabel::Aggressive}});
  CHECK(scene.text ==
        "You are driving on a one-way three-lane highway.\n"
        "The ego car is driving on the middle lane at 28.0 m/s. The speed "
        "limit is 40.0 m/s.\n"
        "Surrounding vehicles within the perception range:\n"
        "- the car 3 is driving behind the ego in the left lane, driving "
        "faster than the ego, time to collision approximately 5.0 seconds, "
        "estimated intention aggressive.\n"
        "- the car 2 is driving in front of the ego on the middle lane, "
        "driving slower than the ego, time to collision approximately 9.2 "
        "seconds.\n"
        "- the car 4 is driving in front of the ego on the right lane, "
        "driving at the same speed as the ego, no closing.\n");
  CHECK(scene.text.find("in front of the ego") != std::string::npos);
  CHECK(scene.text.find("slower than the ego") != std::string::npos);
  // facts ordered by lane then longitudinal distance
  REQUIRE(scene.facts.size() == 3);
  CHECK(scene.facts[0].agent_id == 3);
  CHECK(scene.facts[1].agent_id == 2);
  CHECK(scene.facts[2].agent_id == 4);
}

TEST_CASE("scene: perception range filter") {
  auto w = three_car_world();
  w.agents[0].state.x = w.ego.x + 300.0;
  const auto scene = scene_of(w);
  CHECK(scene.facts.size() == 2);
  for (const auto& f : scene.facts) CHECK(f.agent_id != 2);
}

TEST_CASE("scene: determinism") {
  const auto a = scene_of(three_car_world());
  const auto b = scene_of(three_car_world());
  CHECK(a.text == b.text);
}

TEST_CASE("scripted case 1: empty road keeps the current lane") {
  WorldState w;
  w.ego = {0, 6, 30, 0};
  w.road = RoadGeometry::make(4.0, 2.0);
  ScriptedBackend backend;
  Conversation conv = Conversation::with_system("s");
  const auto r = backend.complete(conv, describe_scene(w, {}, {}, 150.0));
  REQUIRE(r.ok);
  const auto p = parse_decision(r.text, DecisionKind::LaneChoice);
  REQUIRE(p.ok());
  CHECK(p.decision.lane == LaneId::Middle);
}

TEST_CASE("scripted case 1: slow middle leader, clear right lane") {
  auto w = three_car_world();
  w.agents[0].state.x = w.ego.x + 25;  // slow leader close ahead in middle
  w.agents[0].state.vx = 15;
  w.agents[1].state.x = w.ego.x - 60;  // left-lane car behind
  const auto scene = scene_of(w);
  ScriptedBackend backend;
  Conversation conv = Conversation::with_system("s");
  const auto r = backend.complete(conv, scene);
  const auto p = parse_decision(r.text, DecisionKind::LaneChoice);
  REQUIRE(p.ok());
  // right lane has the largest forward gap (agent 4 at +40 -> gap 35;
  // middle gap 20; left empty ahead but... left is empty ahead: +inf)
  CHECK(p.decision.lane == LaneId::Left);
}

TEST_CASE("scripted case 1: picks the best untried lane after rejection") {
  auto w = three_car_world();
  w.agents[0].state.x = w.ego.x + 25;
  w.agents[0].state.vx = 15;
  w.agents[1].state.x = w.ego.x - 60;
  const auto scene = scene_of(w);
  ScriptedBackend backend;
  Conversation conv = Conversation::with_system("s");
  conv.add_user(scene.text);
  conv.add_assistant("DECISION: Left Lane");
  conv.add_user(
      "Verification failed: the proposed Left Lane is rejected because the "
      "safety separation constraint is violated at horizon step 3 by the car "
      "3 with magnitude 1.00 m. Please reevaluate the scenario and regenerate "
      "another behavior.");
  const auto r = backend.complete(conv, scene);
  const auto p = parse_decision(r.text, DecisionKind::LaneChoice);
  REQUIRE(p.ok());
  CHECK(p.decision.lane == LaneId::Right);  // best remaining untried lane
}

TEST_CASE("scripted case 2 follows the greedy state rules") {
  SceneDescription scene;
  scene.ego_lane = LaneId::Middle;
  Case2Context c2;
  c2.task_source = LaneId::Middle;
  c2.task_target = LaneId::Left;
  c2.min_ttc = 10.0;
  c2.follower_id = 3;
  ScriptedBackend backend;
  Conversation conv = Conversation::with_system("s");

  c2.current = BehaviorState::Stay;
  c2.follower_intention = IntentionLabel::Aggressive;
  scene.case2 = c2;
  auto p = parse_decision(backend.complete(conv, scene).text,
                          DecisionKind::StateChoice);
  CHECK(p.decision.state == BehaviorState::Stay);

  c2.follower_intention = IntentionLabel::Cooperative;
  scene.case2 = c2;
  p = parse_decision(backend.complete(conv, scene).text,
                     DecisionKind::StateChoice);
  CHECK(p.decision.state == BehaviorState::Attempt);

  c2.current = BehaviorState::Attempt;
  c2.cycles_in_state = 1;
  scene.case2 = c2;
  p = parse_decision(backend.complete(conv, scene).text,
                     DecisionKind::StateChoice);
  CHECK(p.decision.state == BehaviorState::Attempt);  // dwell not reached

  c2.cycles_in_state = 2;
  scene.case2 = c2;
  p = parse_decision(backend.complete(conv, scene).text,
                     DecisionKind::StateChoice);
  CHECK(p.decision.state == BehaviorState::Finish);

  c2.min_ttc = 1.5;
  scene.case2 = c2;
  p = parse_decision(backend.complete(conv, scene).text,
                     DecisionKind::StateChoice);
  CHECK(p.decision.state == BehaviorState::Abort);
}

TEST_CASE("scripted output always parses (round trip)") {
  ScriptedBackend backend;
  Conversation conv = Conversation::with_system("s");
  for (int variant = 0; variant < 20; ++variant) {
    auto w = three_car_world();
    w.agents[0].state.x = w.ego.x + 10 + variant * 7;
    w.agents[1].state.x = w.ego.x - 10 - variant * 9;
    const auto scene = scene_of(w);
    const auto r = backend.complete(conv, scene);
    REQUIRE(r.ok);
    CHECK(parse_decision(r.text, DecisionKind::LaneChoice).ok());
  }
}

TEST_CASE("system prompts: tokens, edges, determinism") {
  const auto graph = StateMachineGraph::standard();
  const PromptConfig cfg;
  const auto p1 = build_system_prompt(1, graph, cfg);
  CHECK(p1.find("Left Lane") != std::string::npos);
  CHECK(p1.find("Middle Lane") != std::string::npos);
  CHECK(p1.find("Right Lane") != std::string::npos);
  CHECK(p1.find("DECISION:") != std::string::npos);

  const auto p2 = build_system_prompt(2, graph, cfg);
  int edge_lines = 0;
  std::size_t pos = 0;
  while ((pos = p2.find(" -> ", pos)) != std::string::npos) {
    ++edge_lines;
    pos += 4;
  }
  CHECK(edge_lines == 7);
  CHECK(p2.find("Stay -> Attempt") != std::string::npos);
  CHECK(p2.find("Abort -> Stay") != std::string::npos);
  CHECK(p2.find("[6.0, 4.5, 3.0]") != std::string::npos);
  CHECK(p2.find("[4.0, 4.2, 4.5]") != std::string::npos);
  CHECK(p2.find("[9.0, 8.0, 7.0]") != std::string::npos);

  CHECK(build_system_prompt(1, graph, cfg) == p1);
  CHECK(build_system_prompt(2, graph, cfg) == p2);
}

namespace {

struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit StubServer(
      std::function<void(const httplib::Request&, httplib::Response&)> h) {
    server.Post("/v1/chat/completions", std::move(h));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  }
};

Conversation sample_conv() {
  Conversation c = Conversation::with_system("sys");
  c.add_user("scene");
  return c;
}

}  // namespace

TEST_CASE("remote backend: echo stub returns the completion verbatim") {
  StubServer stub([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("messages").size() == 2);
    CHECK(body.at("messages")[0].at("role") == "system");
    nlohmann::json out;
    out["choices"] = {{{"message", {{"role", "assistant"},
                                    {"content", "ok\nDECISION: Left Lane"}}}}};
    res.set_content(out.dump(), "application/json");
  });
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint = stub.endpoint();
  cfg.model = "test-model";
  cfg.timeout_s = 5.0;
  RemoteBackend backend(cfg);
  const auto r = backend.complete(sample_conv(), {});
  REQUIRE(r.ok);
  CHECK(r.text == "ok\nDECISION: Left Lane");
  CHECK(r.latency_s >= 0.0);
}

TEST_CASE("remote backend: HTTP error is a transport failure") {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint = stub.endpoint();
  RemoteBackend backend(cfg);
  const auto r = backend.complete(sample_conv(), {});
  CHECK(!r.ok);
  CHECK(r.error.find("500") != std::string::npos);
}

TEST_CASE("remote backend: malformed body is a transport failure") {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"unexpected\": true}", "application/json");
  });
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint = stub.endpoint();
  RemoteBackend backend(cfg);
  const auto r = backend.complete(sample_conv(), {});
  CHECK(!r.ok);
  CHECK(r.error.find("malformed") != std::string::npos);
}

TEST_CASE("remote backend: timeout is a transport failure") {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content("{}", "application/json");
  });
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint = stub.endpoint();
  cfg.timeout_s = 0.15;
  RemoteBackend backend(cfg);
  const auto r = backend.complete(sample_conv(), {});
  CHECK(!r.ok);
}

TEST_CASE("remote backend: unusable endpoint URL") {
  BackendConfig cfg;
  cfg.kind = BackendKind::Remote;
  cfg.endpoint = "not a url";
  RemoteBackend backend(cfg);
  const auto r = backend.complete(sample_conv(), {});
  CHECK(!r.ok);
}

#include "lcmpc/scenario.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace lcmpc {

using nlohmann::json;

namespace {

LaneId lane_from_string(const std::string& s) {
  if (s == "left") return LaneId::Left;
  if (s == "middle") return LaneId::Middle;
  if (s == "right") return LaneId::Right;
  throw ScenarioError("unknown lane name: " + s);
}

VehicleState state_from_json(const json& j) {
  VehicleState s;
  s.x = j.at("x").get<double>();
  s.y = j.at("y").get<double>();
  s.vx = j.at("vx").get<double>();
  s.vy = j.value("vy", 0.0);
  if (!s.finite()) throw ScenarioError("non-finite vehicle state");
  return s;
}

VehicleParams params_from_json(const json& j) {
  VehicleParams p;
  p.length = j.value("length", p.length);
  p.width = j.value("width", p.width);
  p.lf = j.value("lf", p.lf);
  p.lr = j.value("lr", p.lr);
  p.accel_min = j.value("accel_min", p.accel_min);
  p.accel_max = j.value("accel_max", p.accel_max);
  p.steer_min = j.value("steer_min", p.steer_min);
  p.steer_max = j.value("steer_max", p.steer_max);
  p.v_max = j.value("v_max", p.v_max);
  p.validate();
  return p;
}

ScriptedPolicy policy_from_json(const json& j) {
  ScriptedPolicy p;
  const std::string mode = j.value("mode", "constant_speed");
  if (mode == "constant_speed")
    p.mode = PolicyMode::ConstantSpeed;
  else if (mode == "piecewise_accel")
    p.mode = PolicyMode::PiecewiseAccel;
  else if (mode == "follower_reactive")
    p.mode = PolicyMode::FollowerReactive;
  else
    throw ScenarioError("unknown policy mode: " + mode);

  const auto env = j.at("envelope");
  p.accel_lo = env.at(0).get<double>();
  p.accel_hi = env.at(1).get<double>();
  // The closed-form interval predictor brackets the true motion only when the
  // envelope straddles zero; every policy here can coast, so require it.
  if (!(p.accel_lo <= 0.0 && 0.0 <= p.accel_hi))
    throw ScenarioError("agent envelope must satisfy lo <= 0 <= hi");

  if (j.contains("schedule")) {
    for (const auto& e : j.at("schedule")) {
      const int start = e.at(0).get<int>();
      const double a = e.at(1).get<double>();
      if (a < p.accel_lo || a > p.accel_hi)
        throw ScenarioError("scheduled accel outside declared envelope");
      p.schedule.emplace_back(start, a);
    }
  }
  p.cooperative = j.value("cooperative", true);
  p.reaction_gap = j.value("reaction_gap", p.reaction_gap);
  p.emergency_gap = j.value("emergency_gap", p.emergency_gap);
  p.yield_accel = j.value("yield_accel", p.yield_accel);
  p.press_accel = j.value("press_accel", p.press_accel);
  if (j.contains("lane_change")) {
    const auto& lc = j.at("lane_change");
    LaneChangePlan plan;
    plan.start_step = lc.at("start_step").get<int>();
    plan.target_lane = lane_from_string(lc.at("target_lane").get<std::string>());
    plan.duration_steps = lc.value("duration_steps", 40);
    if (plan.duration_steps <= 0)
      throw ScenarioError("lane_change duration must be positive");
    p.lane_change = plan;
  }
  return p;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario JSON parse error: ") + e.what());
  }
  try {
    Scenario sc;
    sc.schema = j.at("schema").get<int>();
    if (sc.schema != 1)
      throw ScenarioError("unsupported scenario schema version");
    sc.name = j.value("name", "unnamed");
    if (j.contains("road"))
      sc.lane_width = j.at("road").value("lane_width", 4.0);
    sc.dt = j.value("dt", 0.1);
    if (!(sc.dt > 0)) throw ScenarioError("dt must be positive");
    sc.episode_steps = j.value("episode_steps", 300);
    sc.seed = j.value("seed", 0ull);
    sc.ego_state = state_from_json(j.at("ego").at("state"));
    sc.ego_params = j.at("ego").contains("params")
                        ? params_from_json(j.at("ego").at("params"))
                        : VehicleParams{};
    for (const auto& ja : j.value("agents", json::array())) {
      Agent a;
      a.id = ja.at("id").get<int>();
      a.state = state_from_json(ja.at("state"));
      a.params = ja.contains("params") ? params_from_json(ja.at("params"))
                                       : VehicleParams{};
      a.policy = policy_from_json(ja.at("policy"));
      a.y_home = a.state.y;
      sc.agents.push_back(a);
    }
    std::sort(sc.agents.begin(), sc.agents.end(),
              [](const Agent& a, const Agent& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < sc.agents.size(); ++i)
      if (sc.agents[i].id == sc.agents[i - 1].id)
        throw ScenarioError("duplicate agent id");
    if (j.contains("case2")) {
      sc.case2_target_lane =
          lane_from_string(j.at("case2").at("target_lane").get<std::string>());
    }
    if (j.contains("jitter")) {
      sc.jitter.speed_frac = j.at("jitter").value("speed_frac", 0.0);
      sc.jitter.x_m = j.at("jitter").value("x_m", 0.0);
    }
    sc.content_hash = fnv1a_hex(text);
    return sc;
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario field error: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

WorldState make_world(const Scenario& sc, std::uint64_t seed) {
  WorldState w;
  w.dt = sc.dt;
  w.ego = sc.ego_state;
  w.ego_params = sc.ego_params;
  w.agents = sc.agents;
  w.road = RoadGeometry::make(sc.lane_width, sc.ego_params.width);
  w.rng_seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& a : w.agents) {
    // Draw in a fixed order so the world is a pure function of the seed.
    const double dv = unit(rng) * sc.jitter.speed_frac;
    const double dx = unit(rng) * sc.jitter.x_m;
    a.state.vx = std::max(0.0, a.state.vx * (1.0 + dv));
    a.state.x += dx;
  }

  if (w.ego.y < w.road.y_inf || w.ego.y > w.road.y_sup)
    throw ScenarioError("ego starts off the carriageway");
  if (check_collision(w))
    throw ScenarioError("vehicles overlap at episode start");
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    for (std::size_t k = i + 1; k < w.agents.size(); ++k) {
      const auto& a = w.agents[i].state;
      const auto& b = w.agents[k].state;
      if (std::abs(a.x - b.x) <
              (w.agents[i].params.length + w.agents[k].params.length) / 2.0 &&
          std::abs(a.y - b.y) <
              (w.agents[i].params.width + w.agents[k].params.width) / 2.0)
        throw ScenarioError("agents overlap at episode start");
    }
  }
  return w;
}

}  // namespace lcmpc

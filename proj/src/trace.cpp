#include "lcmpc/trace.hpp"

namespace lcmpc {

using nlohmann::json;

namespace {

std::string source_name(ActionSource s) {
  return s == ActionSource::Planner ? "planner" : "failsafe";
}

ActionSource source_from(const std::string& s) {
  if (s == "planner") return ActionSource::Planner;
  if (s == "failsafe") return ActionSource::Failsafe;
  throw TraceError("unknown action source: " + s);
}

BehaviorState state_from(const std::string& s) {
  if (s == "Stay") return BehaviorState::Stay;
  if (s == "Attempt") return BehaviorState::Attempt;
  if (s == "Finish") return BehaviorState::Finish;
  if (s == "Abort") return BehaviorState::Abort;
  throw TraceError("unknown behavior state: " + s);
}

json violation_to_json(const ConstraintViolation& v) {
  return json{{"name", v.name},
              {"step", v.step},
              {"magnitude", v.magnitude},
              {"agent", v.agent_id}};
}

ConstraintViolation violation_from(const json& j) {
  ConstraintViolation v;
  v.name = j.value("name", "");
  v.step = j.value("step", 0);
  v.magnitude = j.value("magnitude", 0.0);
  v.agent_id = j.value("agent", -1);
  return v;
}

}  // namespace

json cycle_to_json(const DecisionCycleLog& c, bool timing) {
  json j;
  j["type"] = "cycle";
  j["step"] = c.step_index;
  j["case"] = c.case_id;
  j["scene"] = c.scene_text;
  j["raw"] = c.raw_decision;
  if (c.parsed) {
    json p;
    if (c.parsed->kind == DecisionKind::LaneChoice) {
      p["kind"] = "lane";
      p["lane"] = static_cast<int>(c.parsed->lane);
    } else {
      p["kind"] = "state";
      p["state"] = state_name(c.parsed->state);
    }
    j["parsed"] = p;
  }
  if (c.reflection) {
    const auto& tv = *c.reflection;
    json r;
    r["state_check"] = tv.state_check;
    r["safety_check"] = tv.safety_check;
    r["min_ttc"] = std::isinf(tv.min_ttc) ? -1.0 : tv.min_ttc;
    r["prediction_check"] =
        tv.prediction_check == TransitionVerdict::Applicability::Pass
            ? "pass"
            : (tv.prediction_check == TransitionVerdict::Applicability::Fail
                   ? "fail"
                   : "n/a");
    r["overall"] = tv.overall;
    j["reflection"] = r;
  }
  if (c.mpc_outcome)
    j["mpc"] = *c.mpc_outcome == VerdictOutcome::Approved ? "approved"
                                                          : "rejected";
  j["feedback"] = c.feedback_text;
  if (!c.mpc_worst.name.empty()) j["worst"] = violation_to_json(c.mpc_worst);
  j["retries"] = c.retries;
  j["requests"] = c.requests;
  j["source"] = source_name(c.source);
  j["transport_failure"] = c.transport_failure;
  j["dwell_rejected"] = c.dwell_rejected;
  j["aborted"] = c.aborted_mid_cycle;
  j["controls"] = c.controls_applied;
  if (c.executed_transition)
    j["transition"] = {state_name(c.executed_transition->first),
                       state_name(c.executed_transition->second)};
  if (c.case_id == 2) j["state_after"] = state_name(c.state_after);
  j["backend_ms"] = timing ? c.backend_latency_s * 1e3 : 0.0;
  return j;
}

TraceWriter::TraceWriter(const std::string& path, bool timing)
    : out_(path, std::ios::binary), timing_(timing) {
  if (!out_) throw TraceError("cannot open trace for writing: " + path);
}

void TraceWriter::emit(const json& j) {
  out_ << j.dump() << "\n";
  out_.flush();
}

void TraceWriter::write_header(const TraceHeader& h) {
  json j;
  j["type"] = "header";
  j["schema"] = h.schema;
  j["scenario"] = h.scenario_name;
  j["scenario_hash"] = h.scenario_hash;
  j["seed"] = h.seed;
  j["case"] = h.case_id;
  j["steps_planned"] = h.steps_planned;
  j["timing"] = h.timing;
  j["config"] = h.config;
  emit(j);
}

void TraceWriter::write_step(const TraceStep& s) {
  json j;
  j["type"] = "step";
  j["step"] = s.step;
  j["ego"] = {{"x", s.ego.x}, {"y", s.ego.y}, {"vx", s.ego.vx},
              {"vy", s.ego.vy}};
  j["u"] = {{"accel", s.u.accel}, {"steer", s.u.steer}};
  j["source"] = source_name(s.source);
  j["lane"] = s.lane;
  if (s.state) j["state"] = state_name(*s.state);
  j["compute_ms"] = timing_ ? s.compute_ms : 0.0;
  json agents = json::array();
  for (const auto& a : s.agents)
    agents.push_back({{"id", a.id},
                      {"x", a.x},
                      {"y", a.y},
                      {"vx", a.vx},
                      {"vy", a.vy}});
  j["agents"] = agents;
  emit(j);
}

void TraceWriter::write_cycle(const DecisionCycleLog& c) {
  emit(cycle_to_json(c, timing_));
}

void TraceWriter::write_summary(const TraceSummary& s) {
  json j;
  j["type"] = "summary";
  j["steps"] = s.steps_executed;
  j["cycles"] = s.cycles;
  j["collisions"] = s.collisions;
  j["containment_violations"] = s.containment_violations;
  j["exit"] = s.exit_reason;
  j["failsafe_steps"] = s.failsafe_steps;
  j["decision_requests"] = s.decision_requests;
  j["retries"] = s.retries;
  if (s.final_state) j["final_state"] = *s.final_state;
  emit(j);
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace: " + path);
  TraceFile t;
  bool have_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw TraceError("corrupt trace record at line " +
                       std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      t.header.schema = j.value("schema", 0);
      if (t.header.schema != kTraceSchema)
        throw TraceError("unsupported trace schema");
      t.header.scenario_name = j.value("scenario", "");
      t.header.scenario_hash = j.value("scenario_hash", "");
      t.header.seed = j.value("seed", 0ull);
      t.header.case_id = j.value("case", 1);
      t.header.steps_planned = j.value("steps_planned", 0);
      t.header.timing = j.value("timing", false);
      t.header.config = j.value("config", json::object());
      have_header = true;
    } else if (type == "step") {
      TraceStep s;
      s.step = j.at("step").get<int>();
      s.ego.x = j.at("ego").at("x").get<double>();
      s.ego.y = j.at("ego").at("y").get<double>();
      s.ego.vx = j.at("ego").at("vx").get<double>();
      s.ego.vy = j.at("ego").at("vy").get<double>();
      s.u.accel = j.at("u").at("accel").get<double>();
      s.u.steer = j.at("u").at("steer").get<double>();
      s.source = source_from(j.at("source").get<std::string>());
      s.lane = j.value("lane", 1);
      if (j.contains("state"))
        s.state = state_from(j.at("state").get<std::string>());
      s.compute_ms = j.value("compute_ms", 0.0);
      for (const auto& a : j.value("agents", json::array())) {
        AgentSnap snap;
        snap.id = a.at("id").get<int>();
        snap.x = a.at("x").get<double>();
        snap.y = a.at("y").get<double>();
        snap.vx = a.at("vx").get<double>();
        snap.vy = a.at("vy").get<double>();
        s.agents.push_back(snap);
      }
      t.steps.push_back(std::move(s));
    } else if (type == "cycle") {
      DecisionCycleLog c;
      c.step_index = j.at("step").get<int>();
      c.case_id = j.value("case", 1);
      c.scene_text = j.value("scene", "");
      c.raw_decision = j.value("raw", "");
      if (j.contains("parsed")) {
        Decision d;
        if (j["parsed"].value("kind", "") == "lane") {
          d.kind = DecisionKind::LaneChoice;
          d.lane = static_cast<LaneId>(j["parsed"].value("lane", 1));
        } else {
          d.kind = DecisionKind::StateChoice;
          d.state = state_from(j["parsed"].value("state", "Stay"));
        }
        c.parsed = d;
      }
      if (j.contains("mpc"))
        c.mpc_outcome = j["mpc"] == "approved" ? VerdictOutcome::Approved
                                               : VerdictOutcome::Rejected;
      c.feedback_text = j.value("feedback", "");
      if (j.contains("worst")) c.mpc_worst = violation_from(j["worst"]);
      c.retries = j.value("retries", 0);
      c.requests = j.value("requests", 0);
      c.source = source_from(j.value("source", "planner"));
      c.transport_failure = j.value("transport_failure", false);
      c.dwell_rejected = j.value("dwell_rejected", false);
      c.aborted_mid_cycle = j.value("aborted", false);
      c.controls_applied = j.value("controls", 0);
      if (j.contains("transition"))
        c.executed_transition = {state_from(j["transition"].at(0)),
                                 state_from(j["transition"].at(1))};
      if (j.contains("state_after"))
        c.state_after = state_from(j["state_after"].get<std::string>());
      c.backend_latency_s = j.value("backend_ms", 0.0) / 1e3;
      t.cycles.push_back(std::move(c));
    } else if (type == "summary") {
      t.summary.steps_executed = j.value("steps", 0);
      t.summary.cycles = j.value("cycles", 0);
      t.summary.collisions = j.value("collisions", 0);
      t.summary.containment_violations = j.value("containment_violations", 0);
      t.summary.exit_reason = j.value("exit", "");
      t.summary.failsafe_steps = j.value("failsafe_steps", 0);
      t.summary.decision_requests = j.value("decision_requests", 0);
      t.summary.retries = j.value("retries", 0);
      if (j.contains("final_state"))
        t.summary.final_state = j["final_state"].get<std::string>();
    } else {
      throw TraceError("unknown record type at line " +
                       std::to_string(line_no));
    }
  }
  if (!have_header) throw TraceError("trace has no header record");
  return t;
}

}  // namespace lcmpc

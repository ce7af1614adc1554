#include "lcmpc/decision.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "lcmpc/textfmt.hpp"

namespace lcmpc {

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lane_word(LaneId lane) {
  switch (lane) {
    case LaneId::Left:
      return "left";
    case LaneId::Middle:
      return "middle";
    case LaneId::Right:
      return "right";
  }
  return "?";
}

std::string intention_word(IntentionLabel l) {
  return l == IntentionLabel::Cooperative ? "cooperative" : "aggressive";
}

}  // namespace

std::string parse_error_name(ParseError e) {
  switch (e) {
    case ParseError::None:
      return "None";
    case ParseError::NoDecisionLine:
      return "NoDecisionLine";
    case ParseError::MultipleDecisionLines:
      return "MultipleDecisionLines";
    case ParseError::UnknownToken:
      return "UnknownToken";
  }
  return "?";
}

ParseOutcome parse_decision(const std::string& raw, DecisionKind expected) {
  ParseOutcome out;
  std::string token;
  std::size_t decision_line_start = std::string::npos;
  int decision_lines = 0;

  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t nl = raw.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? raw.size() : nl;
    const std::string line = trim(raw.substr(pos, end - pos));
    const std::string lower = to_lower(line);
    if (lower.rfind("decision:", 0) == 0) {
      ++decision_lines;
      if (decision_lines == 1) {
        token = trim(line.substr(9));
        while (!token.empty() &&
               (token.back() == '.' || token.back() == '!'))
          token.pop_back();
        token = trim(token);
        decision_line_start = pos;
      }
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }

  if (decision_lines == 0) {
    out.error = ParseError::NoDecisionLine;
    return out;
  }
  if (decision_lines > 1) {
    out.error = ParseError::MultipleDecisionLines;
    return out;
  }

  const std::string key = to_lower(token);
  out.decision.kind = expected;
  out.decision.rationale = trim(raw.substr(0, decision_line_start));
  if (expected == DecisionKind::LaneChoice) {
    if (key == "left lane")
      out.decision.lane = LaneId::Left;
    else if (key == "middle lane")
      out.decision.lane = LaneId::Middle;
    else if (key == "right lane")
      out.decision.lane = LaneId::Right;
    else
      out.error = ParseError::UnknownToken;
  } else {
    if (key == "stay")
      out.decision.state = BehaviorState::Stay;
    else if (key == "attempt")
      out.decision.state = BehaviorState::Attempt;
    else if (key == "finish")
      out.decision.state = BehaviorState::Finish;
    else if (key == "abort")
      out.decision.state = BehaviorState::Abort;
    else
      out.error = ParseError::UnknownToken;
  }
  return out;
}

SceneDescription describe_scene(
    const WorldState& w, const std::vector<IntervalPrediction>& predictions,
    const std::map<int, IntentionLabel>& intentions, double perception_range) {
  SceneDescription out;
  out.ego_lane = lane_of(w.ego.y, w.road);
  out.ego_speed = w.ego.vx;
  out.speed_limit = w.ego_params.v_max;

  for (const auto& a : w.agents) {
    const double dx = a.state.x - w.ego.x;
    const double dy = a.state.y - w.ego.y;
    if (std::hypot(dx, dy) > perception_range) continue;

    SceneFact f;
    f.agent_id = a.id;
    f.lane = lane_of(a.state.y, w.road);
    f.ahead = dx >= 0.0;
    f.dx = dx;
    const double half_lengths = (w.ego_params.length + a.params.length) / 2.0;
    f.gap = std::abs(dx) - half_lengths;
    f.dv = a.state.vx - w.ego.vx;
    f.ttc = compute_ttc(w.ego, a.state,
                        f.ahead ? TtcRelation::LeaderSameLane
                                : TtcRelation::FollowerTargetLane,
                        half_lengths);
    if (auto it = intentions.find(a.id); it != intentions.end())
      f.intention = it->second;
    for (const auto& pred : predictions) {
      if (pred.agent_id != a.id || pred.horizon.empty()) continue;
      const auto& last = pred.horizon.back();
      f.lane_changing = lanes_of_interval(last.y_lo, last.y_hi,
                                          pred.agent_half_width, w.road)
                            .size() > 1;
    }
    out.facts.push_back(f);
  }

  std::sort(out.facts.begin(), out.facts.end(),
            [](const SceneFact& a, const SceneFact& b) {
              if (a.lane != b.lane) return a.lane < b.lane;
              if (std::abs(a.dx) != std::abs(b.dx))
                return std::abs(a.dx) < std::abs(b.dx);
              return a.agent_id < b.agent_id;
            });

  std::ostringstream text;
  text << "You are driving on a one-way three-lane highway.\n";
  text << "The ego car is driving on the " << lane_word(out.ego_lane)
       << " lane at " << fmt_fixed(out.ego_speed) << " m/s. The speed limit is "
       << fmt_fixed(out.speed_limit) << " m/s.\n";
  if (out.facts.empty()) {
    text << "There are no surrounding vehicles within the perception range; "
            "all lanes are clear.\n";
  } else {
    text << "Surrounding vehicles within the perception range:\n";
    for (const auto& f : out.facts) {
      text << "- the car " << f.agent_id << " is driving ";
      if (f.ahead)
        text << "in front of the ego on the " << lane_word(f.lane) << " lane";
      else
        text << "behind the ego in the " << lane_word(f.lane) << " lane";
      if (f.dv > 0.05)
        text << ", driving faster than the ego";
      else if (f.dv < -0.05)
        text << ", driving slower than the ego";
      else
        text << ", driving at the same speed as the ego";
      if (std::isinf(f.ttc))
        text << ", no closing";
      else
        text << ", time to collision approximately " << fmt_fixed(f.ttc)
             << " seconds";
      if (f.lane_changing) text << ", currently changing lanes";
      if (f.intention)
        text << ", estimated intention " << intention_word(*f.intention);
      text << ".\n";
    }
  }
  out.text = text.str();
  return out;
}

namespace detail {

std::string render_case2_section(const Case2Context& c) {
  std::ostringstream text;
  text << "Task: change from the " << lane_word(c.task_source)
       << " lane to the " << lane_word(c.task_target) << " lane.\n";
  text << "Current behavior state: " << state_name(c.current) << " ("
       << c.cycles_in_state << " cycles in this state).\n";
  text << "Allowed next states: ";
  for (std::size_t i = 0; i < c.allowed_next.size(); ++i) {
    if (i) text << ", ";
    text << state_name(c.allowed_next[i]);
  }
  text << ".\n";
  if (std::isinf(c.min_ttc))
    text << "Minimum time to collision among relevant vehicles: no closing.\n";
  else
    text << "Minimum time to collision among relevant vehicles: "
         << fmt_fixed(c.min_ttc) << " seconds.\n";
  if (!c.follower_id) {
    text << "Follower on the target lane: none.\n";
  } else {
    text << "Follower on the target lane: the car " << *c.follower_id
         << ", TTC history [";
    for (std::size_t i = 0; i < c.follower_ttc_history.size(); ++i) {
      if (i) text << ", ";
      if (std::isinf(c.follower_ttc_history[i]))
        text << "inf";
      else
        text << fmt_fixed(c.follower_ttc_history[i]);
    }
    text << "], estimated intention "
         << (c.follower_intention ? intention_word(*c.follower_intention)
                                  : "unknown")
         << ".\n";
  }
  return text.str();
}

}  // namespace detail

std::string scene_text_with_case2(const SceneDescription& scene) {
  if (!scene.case2) return scene.text;
  return scene.text + detail::render_case2_section(*scene.case2);
}

namespace {

bool last_message_is_feedback(const Conversation& conv) {
  if (conv.messages.empty()) return false;
  const auto& m = conv.messages.back();
  if (m.role != Role::User) return false;
  return m.text.find("rejected") != std::string::npos ||
         m.text.find("check failed") != std::string::npos ||
         m.text.find("Remain in") != std::string::npos;
}

std::vector<LaneId> rejected_lanes(const Conversation& conv) {
  std::vector<LaneId> out;
  for (const auto& m : conv.messages) {
    if (m.role != Role::User) continue;
    if (m.text.find("is rejected") == std::string::npos) continue;
    for (LaneId lane : {LaneId::Left, LaneId::Middle, LaneId::Right}) {
      const std::string tag = "proposed " + lane_name(lane);
      if (m.text.find(tag) != std::string::npos &&
          std::find(out.begin(), out.end(), lane) == out.end())
        out.push_back(lane);
    }
  }
  return out;
}

BackendResult scripted_case1(const Conversation& conv,
                             const SceneDescription& scene,
                             const ScriptedConfig& cfg) {
  const auto rejected = rejected_lanes(conv);
  std::vector<LaneId> order = lane_preference_order(scene.ego_lane);
  std::vector<LaneId> candidates;
  for (LaneId lane : order)
    if (std::find(rejected.begin(), rejected.end(), lane) == rejected.end())
      candidates.push_back(lane);
  if (candidates.empty()) candidates.push_back(scene.ego_lane);

  auto score = [&](LaneId lane) {
    double s = kInfTtc;  // empty lane scores best
    for (const auto& f : scene.facts) {
      if (f.lane != lane || !f.ahead) continue;
      s = std::min(s, std::max(f.gap, 0.0));
    }
    return std::isinf(s) ? s : std::min(s, cfg.gap_cap);
  };

  LaneId best = candidates.front();
  double best_score = score(best);
  for (LaneId lane : candidates) {
    const double s = score(lane);
    if (s > best_score) {
      best = lane;
      best_score = s;
    }
  }

  std::ostringstream text;
  text << "Forward gaps: left=" << fmt_fixed(score(LaneId::Left))
       << " m, middle=" << fmt_fixed(score(LaneId::Middle))
       << " m, right=" << fmt_fixed(score(LaneId::Right))
       << " m; choosing the clearest untried lane.\n";
  text << "DECISION: " << lane_name(best);
  return BackendResult{true, text.str(), "", 0.0};
}

BackendResult scripted_case2(const Conversation& conv,
                             const SceneDescription& scene,
                             const ScriptedConfig& cfg) {
  const auto& c = *scene.case2;
  BehaviorState proposal = c.current;
  std::string why;

  const bool follower_ok =
      !c.follower_id || (c.follower_intention &&
                         *c.follower_intention == IntentionLabel::Cooperative);
  const bool safe = c.min_ttc >= cfg.ttc_threshold;

  switch (c.current) {
    case BehaviorState::Stay:
      if (safe && follower_ok) {
        proposal = BehaviorState::Attempt;
        why = "Gap and follower look workable; probing the target lane.";
      } else {
        proposal = BehaviorState::Stay;
        why = "Conditions not met for a lane change; holding the lane.";
      }
      break;
    case BehaviorState::Attempt:
      if (!safe) {
        proposal = BehaviorState::Abort;
        why = "Time to collision dropped below the safety threshold.";
      } else if (c.cycles_in_state >= cfg.dwell_min_cycles && follower_ok) {
        proposal = BehaviorState::Finish;
        why = "The follower yields and the gap stays safe; completing.";
      } else {
        proposal = BehaviorState::Attempt;
        why = "Observing the follower reaction from the lane boundary.";
      }
      break;
    case BehaviorState::Finish:
      proposal = BehaviorState::Finish;
      why = "Lane change complete; tracking the target lane.";
      break;
    case BehaviorState::Abort:
      proposal = BehaviorState::Stay;
      why = "Recentered in the source lane.";
      break;
  }

  if (last_message_is_feedback(conv)) {
    // A rejection means the engine disagrees; fall back conservatively.
    if (c.current == BehaviorState::Attempt && !safe)
      proposal = BehaviorState::Abort;
    else
      proposal = c.current;
    why = "Feedback received; choosing the conservative option.";
  }

  std::ostringstream text;
  text << why << "\nDECISION: " << state_name(proposal);
  return BackendResult{true, text.str(), "", 0.0};
}

}  // namespace

BackendResult ScriptedBackend::complete(const Conversation& conv,
                                        const SceneDescription& scene) {
  if (scene.case2) return scripted_case2(conv, scene, cfg_);
  return scripted_case1(conv, scene, cfg_);
}

BackendResult RemoteBackend::complete(const Conversation& conv,
                                      const SceneDescription&) {
  BackendResult out;
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](BackendResult r) {
    r.latency_s = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return r;
  };

  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos)
    return finish({false, "", "malformed endpoint URL", 0.0});
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos
                               ? cfg_.endpoint
                               : cfg_.endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos
                               ? "/v1/chat/completions"
                               : cfg_.endpoint.substr(path_start);

  httplib::Client cli(base);
  if (!cli.is_valid())
    return finish({false, "", "unsupported endpoint URL", 0.0});
  const auto timeout =
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::duration<double>(cfg_.timeout_s));
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  nlohmann::json body;
  body["model"] = cfg_.model;
  body["temperature"] = cfg_.temperature;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : conv.messages) {
    const char* role = m.role == Role::System
                           ? "system"
                           : (m.role == Role::User ? "user" : "assistant");
    body["messages"].push_back({{"role", role}, {"content", m.text}});
  }

  const auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res)
    return finish({false, "", "transport: " + httplib::to_string(res.error()),
                   0.0});
  if (res->status != 200)
    return finish(
        {false, "", "HTTP status " + std::to_string(res->status), 0.0});
  try {
    const auto j = nlohmann::json::parse(res->body);
    return finish({true,
                   j.at("choices").at(0).at("message").at("content")
                       .get<std::string>(),
                   "", 0.0});
  } catch (const nlohmann::json::exception& e) {
    return finish({false, "", std::string("malformed response: ") + e.what(),
                   0.0});
  }
}

std::unique_ptr<DecisionBackend> make_backend(const BackendConfig& cfg,
                                              const ScriptedConfig& scripted) {
  if (cfg.kind == BackendKind::Remote)
    return std::make_unique<RemoteBackend>(cfg);
  return std::make_unique<ScriptedBackend>(scripted);
}

}  // namespace lcmpc

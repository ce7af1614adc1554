#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lcmpc/behavior_state.hpp"
#include "lcmpc/prediction.hpp"
#include "lcmpc/road.hpp"
#include "lcmpc/world.hpp"

namespace lcmpc {

enum class DecisionKind { LaneChoice, StateChoice };

struct Decision {
  DecisionKind kind = DecisionKind::LaneChoice;
  LaneId lane = LaneId::Middle;          ///< LaneChoice
  BehaviorState state = BehaviorState::Stay;  ///< StateChoice
  std::string rationale;
};

enum class ParseError {
  None,
  NoDecisionLine,
  MultipleDecisionLines,
  UnknownToken
};

struct ParseOutcome {
  ParseError error = ParseError::None;
  Decision decision;
  bool ok() const { return error == ParseError::None; }
};

/// Scans for exactly one line of the form `DECISION: <token>` (case
/// insensitive; a trailing period is tolerated). Everything before that line
/// becomes the rationale.
ParseOutcome parse_decision(const std::string& raw, DecisionKind expected);

std::string parse_error_name(ParseError e);

/// One surrounding vehicle as the decision maker sees it.
struct SceneFact {
  int agent_id = 0;
  LaneId lane = LaneId::Middle;
  bool ahead = true;
  double dx = 0.0;   ///< signed center offset, positive ahead (m)
  double gap = 0.0;  ///< signed bumper gap along dx (m)
  double dv = 0.0;   ///< other.vx - ego.vx (m/s)
  double ttc = kInfTtc;
  std::optional<IntentionLabel> intention;
  bool lane_changing = false;
};

/// Interactive lane-change context appended to the scene for Case 2.
struct Case2Context {
  BehaviorState current = BehaviorState::Stay;
  std::vector<BehaviorState> allowed_next;
  int cycles_in_state = 0;
  LaneId task_target = LaneId::Left;
  LaneId task_source = LaneId::Middle;
  std::optional<int> follower_id;
  std::optional<IntentionLabel> follower_intention;
  std::vector<double> follower_ttc_history;  ///< oldest first, <= 3 entries
  double min_ttc = kInfTtc;
};

struct SceneDescription {
  std::string text;
  std::vector<SceneFact> facts;
  LaneId ego_lane = LaneId::Middle;
  double ego_speed = 0.0;
  double speed_limit = 40.0;
  std::optional<Case2Context> case2;
};

/// Text description of every agent within perception_range of the ego,
/// ordered by lane then by longitudinal distance. The text is a pure
/// template rendering of the facts.
SceneDescription describe_scene(
    const WorldState& w, const std::vector<IntervalPrediction>& predictions,
    const std::map<int, IntentionLabel>& intentions, double perception_range);

/// Scene text with the Case-2 task context appended (current state, allowed
/// transitions, TTC history, intention estimate).
std::string scene_text_with_case2(const SceneDescription& scene);

enum class Role { System, User, Assistant };

struct Message {
  Role role = Role::User;
  std::string text;
};

struct Conversation {
  std::vector<Message> messages;

  static Conversation with_system(std::string system_text) {
    Conversation c;
    c.messages.push_back({Role::System, std::move(system_text)});
    return c;
  }
  void add_user(std::string text) {
    messages.push_back({Role::User, std::move(text)});
  }
  void add_assistant(std::string text) {
    messages.push_back({Role::Assistant, std::move(text)});
  }
};

enum class BackendKind { Scripted, Remote };

struct BackendConfig {
  BackendKind kind = BackendKind::Scripted;
  std::string endpoint;  ///< full chat-completions URL (Remote)
  std::string model = "gpt-4";
  double temperature = 0.0;
  double timeout_s = 30.0;
  std::string api_key_env = "LCMPC_API_KEY";
};

struct BackendResult {
  bool ok = false;
  std::string text;
  std::string error;
  double latency_s = 0.0;
};

class DecisionBackend {
 public:
  virtual ~DecisionBackend() = default;
  virtual BackendResult complete(const Conversation& conv,
                                 const SceneDescription& scene) = 0;
};

struct ScriptedConfig {
  double ttc_threshold = 3.0;  ///< matches the reflection safety threshold
  int dwell_min_cycles = 2;
  double gap_cap = 100.0;  ///< forward gaps saturate here when scoring lanes
};

/// Deterministic heuristic stand-in for the language model. Case 1 scores
/// lanes by forward gap; Case 2 walks the state machine greedily.
class ScriptedBackend : public DecisionBackend {
 public:
  explicit ScriptedBackend(ScriptedConfig cfg = {}) : cfg_(cfg) {}
  BackendResult complete(const Conversation& conv,
                         const SceneDescription& scene) override;

 private:
  ScriptedConfig cfg_;
};

/// Chat-completions client. Returns the assistant text verbatim; any
/// timeout, transport error, or malformed body surfaces as !ok.
class RemoteBackend : public DecisionBackend {
 public:
  explicit RemoteBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {}
  BackendResult complete(const Conversation& conv,
                         const SceneDescription& scene) override;

 private:
  BackendConfig cfg_;
};

std::unique_ptr<DecisionBackend> make_backend(const BackendConfig& cfg,
                                              const ScriptedConfig& scripted);

struct PromptConfig {
  double ttc_threshold = 3.0;
  double aggressive_threshold = 6.0;
  int dwell_min_cycles = 2;
};

/// Fixed, versioned system prompt. Case 2 embeds the full transition edge
/// list, the three checks, and intention-labeling demonstrations.
std::string build_system_prompt(int case_id, const StateMachineGraph& graph,
                                const PromptConfig& cfg);

inline constexpr const char* kPromptVersion = "v1";

}  // namespace lcmpc

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace lcmpc {

/// Interactive lane-change behavior states. Finish is terminal; Abort returns
/// to the source lane and hands back to Stay once recentered.
enum class BehaviorState { Stay, Attempt, Finish, Abort };

std::string state_name(BehaviorState s);

/// Directed transition graph over the behavior states. Proposals outside the
/// edge set are invalid and never executed.
struct StateMachineGraph {
  std::vector<std::pair<BehaviorState, BehaviorState>> edges;

  static StateMachineGraph standard() {
    using B = BehaviorState;
    return StateMachineGraph{{{B::Stay, B::Stay},
                              {B::Stay, B::Attempt},
                              {B::Attempt, B::Attempt},
                              {B::Attempt, B::Finish},
                              {B::Attempt, B::Abort},
                              {B::Abort, B::Stay},
                              {B::Finish, B::Finish}}};
  }

  bool valid(BehaviorState from, BehaviorState to) const {
    for (const auto& [a, b] : edges)
      if (a == from && b == to) return true;
    return false;
  }

  std::vector<BehaviorState> successors(BehaviorState from) const {
    std::vector<BehaviorState> out;
    for (const auto& [a, b] : edges)
      if (a == from) out.push_back(b);
    return out;
  }
};

}  // namespace lcmpc

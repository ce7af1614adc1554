#include "lcmpc/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lcmpc/dynamics.hpp"

namespace lcmpc {

namespace {

double scheduled_accel(const ScriptedPolicy& p, int step) {
  double a = 0.0;
  for (const auto& [start, accel] : p.schedule) {
    if (start <= step) a = accel;
  }
  return a;
}

struct LeaderView {
  bool found = false;
  double gap = 0.0;     // bumper gap
  double speed = 0.0;   // leader vx
};

/// Nearest vehicle ahead of the agent within half a lane laterally.
LeaderView nearest_half_lane_leader(const Agent& agent, const WorldState& w) {
  const double lateral_window = 0.5 * w.road.lane_width + 0.1;
  LeaderView best;
  auto consider = [&](double x, double y, double vx, double length) {
    if (x <= agent.state.x) return;
    if (std::abs(y - agent.state.y) > lateral_window) return;
    const double gap = x - agent.state.x - (agent.params.length + length) / 2.0;
    if (!best.found || gap < best.gap) {
      best.found = true;
      best.gap = gap;
      best.speed = vx;
    }
  };
  consider(w.ego.x, w.ego.y, w.ego.vx, w.ego_params.length);
  for (const auto& other : w.agents) {
    if (other.id == agent.id) continue;
    consider(other.state.x, other.state.y, other.state.vx,
             other.params.length);
  }
  return best;
}

}  // namespace

const Agent* WorldState::find_agent(int id) const {
  for (const auto& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

double policy_accel(const Agent& agent, const WorldState& w) {
  switch (agent.policy.mode) {
    case PolicyMode::ConstantSpeed:
      return 0.0;
    case PolicyMode::PiecewiseAccel:
      return scheduled_accel(agent.policy, w.step_index);
    case PolicyMode::FollowerReactive: {
      const auto leader = nearest_half_lane_leader(agent, w);
      if (!leader.found) return 0.0;
      if (leader.gap <= agent.policy.emergency_gap)
        return agent.policy.accel_lo;
      if (leader.gap <= agent.policy.reaction_gap) {
        return agent.policy.cooperative
                   ? std::max(agent.policy.accel_lo, agent.policy.yield_accel)
                   : std::min(agent.policy.accel_hi, agent.policy.press_accel);
      }
      return 0.0;
    }
  }
  return 0.0;
}

double agent_lateral_at(const Agent& agent, int step,
                        const RoadGeometry& road) {
  if (!agent.policy.lane_change) return agent.y_home;
  const auto& lc = *agent.policy.lane_change;
  const double y_target = road.lane_center(lc.target_lane);
  if (step <= lc.start_step) return agent.y_home;
  if (step >= lc.start_step + lc.duration_steps) return y_target;
  const double p =
      static_cast<double>(step - lc.start_step) / lc.duration_steps;
  const double h = p * p * (3.0 - 2.0 * p);  // monotone smoothstep
  return agent.y_home + (y_target - agent.y_home) * h;
}

WorldState world_step(const WorldState& w, const ControlInput& ego_u) {
  WorldState next = w;
  next.ego = step(w.ego, ego_u, w.dt, w.ego_params);
  next.step_index = w.step_index + 1;

  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    const Agent& before = w.agents[i];  // policies read the pre-step world
    Agent& after = next.agents[i];
    const double a = policy_accel(before, w);

    after.state.x = before.state.x + before.state.vx * w.dt;
    after.state.vx =
        std::clamp(before.state.vx + a * w.dt, 0.0, before.params.v_max);

    const double y_next = agent_lateral_at(before, next.step_index, w.road);
    after.state.vy = (y_next - before.state.y) / w.dt;
    after.state.y = y_next;

    const double realized = (after.state.vx - before.state.vx) / w.dt;
    if (realized < before.policy.accel_lo - 1e-9 ||
        realized > before.policy.accel_hi + 1e-9) {
      throw std::logic_error("world_step: agent " + std::to_string(before.id) +
                             " acceleration left its declared envelope");
    }
  }
  return next;
}

std::optional<CollisionReport> check_collision(const WorldState& w) {
  for (const auto& a : w.agents) {
    const double dx = std::abs(w.ego.x - a.state.x);
    const double dy = std::abs(w.ego.y - a.state.y);
    if (dx < (w.ego_params.length + a.params.length) / 2.0 &&
        dy < (w.ego_params.width + a.params.width) / 2.0) {
      return CollisionReport{a.id, w.step_index, w.ego.x, w.ego.y};
    }
  }
  return std::nullopt;
}

}  // namespace lcmpc

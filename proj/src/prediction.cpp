#include "lcmpc/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lcmpc {

namespace {

/// Closed-form distance traveled in time t from speed v under constant accel
/// a, with the speed floored at 0 and capped at v_max.
double bounded_travel(double v, double a, double t, double v_max) {
  if (a < 0.0) {
    const double t_stop = v / (-a);
    const double tau = std::min(t, t_stop);
    return v * tau + 0.5 * a * tau * tau;
  }
  if (a > 0.0) {
    const double t_cap = (v_max - v) / a;
    if (t <= t_cap) return v * t + 0.5 * a * t * t;
    return v * t_cap + 0.5 * a * t_cap * t_cap + v_max * (t - t_cap);
  }
  return v * t;
}

}  // namespace

IntervalPrediction predict_intervals(const WorldState& w, int agent_id, int k,
                                     double dt, const PredictionConfig& cfg) {
  if (k < 1) throw std::invalid_argument("predict_intervals: k must be >= 1");
  const Agent* agent = w.find_agent(agent_id);
  if (!agent)
    throw std::invalid_argument("predict_intervals: unknown agent id " +
                                std::to_string(agent_id));

  IntervalPrediction pred;
  pred.agent_id = agent_id;
  pred.agent_half_width = agent->params.width / 2.0;
  pred.x_now = agent->state.x;
  pred.y_now = agent->state.y;
  pred.horizon.resize(k);

  const double x0 = agent->state.x;
  const double v0 = agent->state.vx;
  const double y0 = agent->state.y;

  // Lateral band: the scheduled lane change is visible to the predictor, so
  // containment survives the maneuver. The band spans both lane centers
  // whenever the maneuver window touches the lookahead span.
  double y_lo = y0 - cfg.lateral_slack;
  double y_hi = y0 + cfg.lateral_slack;
  if (agent->policy.lane_change) {
    const auto& lc = *agent->policy.lane_change;
    const int span_end = w.step_index + k;
    const bool overlaps = lc.start_step <= span_end &&
                          w.step_index <= lc.start_step + lc.duration_steps;
    if (overlaps) {
      const double y_target = w.road.lane_center(lc.target_lane);
      y_lo = std::min({y0, agent->y_home, y_target}) - cfg.lateral_slack;
      y_hi = std::max({y0, agent->y_home, y_target}) + cfg.lateral_slack;
    }
  }

  for (int i = 1; i <= k; ++i) {
    auto& box = pred.horizon[i - 1];
    const double t = i * dt;
    if (cfg.force_containment_break) {
      box = {x0, x0, y0, y0};
      continue;
    }
    box.x_lo = x0 + bounded_travel(v0, agent->policy.accel_lo, t,
                                   agent->params.v_max);
    box.x_hi = x0 + bounded_travel(v0, agent->policy.accel_hi, t,
                                   agent->params.v_max);
    box.y_lo = y_lo;
    box.y_hi = y_hi;
  }
  return pred;
}

double compute_ttc(const VehicleState& ego, const VehicleState& other,
                   TtcRelation relation, double gap_length) {
  double gap = 0.0;
  double closing = 0.0;
  if (relation == TtcRelation::FollowerTargetLane) {
    gap = ego.x - other.x - gap_length;
    closing = other.vx - ego.vx;
  } else {
    gap = other.x - ego.x - gap_length;
    closing = ego.vx - other.vx;
  }
  if (gap < 0.0) return 0.0;
  if (closing <= 0.0) return kInfTtc;
  return gap / closing;
}

IntentionLabel classify_intention(const std::vector<TtcSample>& history,
                                  double threshold_s) {
  if (history.size() != 3) throw NotEnoughHistory{};
  const double latest = history[2].ttc;
  if (std::isinf(latest)) return IntentionLabel::Cooperative;
  const bool strictly_decreasing =
      history[0].ttc > history[1].ttc && history[1].ttc > history[2].ttc;
  if (strictly_decreasing && latest < threshold_s)
    return IntentionLabel::Aggressive;
  return IntentionLabel::Cooperative;
}

void ContainmentMonitor::observe(int made_at_step,
                                 const IntervalPrediction& pred) {
  for (std::size_t i = 0; i < pred.horizon.size(); ++i) {
    boxes_.emplace(made_at_step + static_cast<int>(i) + 1,
                   Pending{pred.agent_id, pred.horizon[i]});
  }
}

void ContainmentMonitor::check(const WorldState& w) {
  constexpr double kSlack = 1e-9;
  auto it = boxes_.begin();
  while (it != boxes_.end() && it->first <= w.step_index) {
    if (it->first == w.step_index) {
      const Agent* agent = w.find_agent(it->second.agent_id);
      if (agent) {
        const auto& b = it->second.box;
        if (agent->state.x < b.x_lo - kSlack || agent->state.x > b.x_hi + kSlack)
          throw ContainmentViolation(agent->id, w.step_index, "x");
        if (agent->state.y < b.y_lo - kSlack || agent->state.y > b.y_hi + kSlack)
          throw ContainmentViolation(agent->id, w.step_index, "y");
      }
    }
    it = boxes_.erase(it);
  }
}

void MemoryBuffer::record(int agent_id, const VehicleState& snapshot,
                          const TtcSample& sample) {
  auto& q = per_agent_[agent_id];
  q.push_back(Entry{snapshot, sample});
  while (q.size() > capacity_) q.pop_front();
}

std::vector<TtcSample> MemoryBuffer::last_ttc(int agent_id,
                                              std::size_t n) const {
  std::vector<TtcSample> out;
  auto it = per_agent_.find(agent_id);
  if (it == per_agent_.end()) return out;
  const auto& q = it->second;
  const std::size_t start = q.size() > n ? q.size() - n : 0;
  for (std::size_t i = start; i < q.size(); ++i) out.push_back(q[i].sample);
  return out;
}

std::size_t MemoryBuffer::count(int agent_id) const {
  auto it = per_agent_.find(agent_id);
  return it == per_agent_.end() ? 0 : it->second.size();
}

}  // namespace lcmpc

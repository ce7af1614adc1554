#pragma once

#include <deque>
#include <limits>
#include <map>
#include <vector>

#include "lcmpc/world.hpp"

namespace lcmpc {

inline constexpr double kInfTtc = std::numeric_limits<double>::infinity();

/// Per-step axis-aligned position box for one agent. Built from the agent's
/// declared acceleration envelope, so the true future position is inside the
/// box at every step.
struct IntervalBox {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
};

struct IntervalPrediction {
  int agent_id = 0;
  double agent_half_width = 1.0;
  double x_now = 0.0;  ///< position at prediction time (step-0 anchor)
  double y_now = 0.0;
  std::vector<IntervalBox> horizon;  ///< boxes for steps 1..k
};

enum class TtcRelation { LeaderSameLane, LeaderTargetLane, FollowerTargetLane };

struct TtcSample {
  int step_index = 0;
  int agent_id = 0;
  double ttc = kInfTtc;  ///< seconds, +inf when not closing
  TtcRelation relation = TtcRelation::LeaderSameLane;
};

enum class IntentionLabel { Cooperative, Aggressive };

/// Signalled when fewer than 3 samples are available; callers treat this as
/// Aggressive (safety-first default).
struct NotEnoughHistory : std::runtime_error {
  NotEnoughHistory() : std::runtime_error("fewer than 3 TTC samples") {}
};

struct PredictionConfig {
  double lateral_slack = 0.2;  ///< y half-band for lane keepers (m)
  /// Test-only fault injection: collapse every box to the current position so
  /// the containment monitor trips.
  bool force_containment_break = false;
};

/// Interval prediction of an agent over k steps of dt seconds, anchored at
/// its current state. Longitudinal bounds integrate the envelope extremes
/// with the speed floored at 0 (lower) and capped at the agent's v_max
/// (upper). Lane keepers get a lateral_slack band; agents whose scheduled
/// lane change overlaps the horizon get a band spanning both lane centers.
IntervalPrediction predict_intervals(const WorldState& w, int agent_id, int k,
                                     double dt,
                                     const PredictionConfig& cfg = {});

/// Longitudinal time to collision. Leader relations close when the ego is
/// faster; the follower relation closes when the other vehicle is faster.
/// A non-positive gap returns 0; a non-closing pair returns +inf.
double compute_ttc(const VehicleState& ego, const VehicleState& other,
                   TtcRelation relation, double gap_length);

/// Aggressive iff the 3-sample TTC sequence (oldest first) is strictly
/// decreasing and the latest is below threshold_s; +inf in the latest sample
/// is Cooperative. Throws NotEnoughHistory unless exactly 3 samples.
IntentionLabel classify_intention(const std::vector<TtcSample>& history,
                                  double threshold_s);

/// Raised when a realized agent position escapes an interval that predicted
/// it. Downstream safety arguments rest on containment, so the run aborts.
struct ContainmentViolation : std::runtime_error {
  ContainmentViolation(int agent, int step, const std::string& axis)
      : std::runtime_error("containment violation: agent " +
                           std::to_string(agent) + " left its predicted " +
                           axis + " interval at step " + std::to_string(step)),
        agent_id(agent),
        step_index(step) {}
  int agent_id;
  int step_index;
};

/// Tracks every outstanding interval prediction and audits it against the
/// simulated truth as the world advances.
class ContainmentMonitor {
 public:
  void observe(int made_at_step, const IntervalPrediction& pred);
  /// Checks all predictions covering w.step_index; throws
  /// ContainmentViolation on the first failure. Passed entries are retired.
  void check(const WorldState& w);
  std::size_t outstanding() const { return boxes_.size(); }

 private:
  struct Pending {
    int agent_id;
    IntervalBox box;
  };
  std::multimap<int, Pending> boxes_;  ///< keyed by absolute step
};

/// Per-agent ring buffer of recent observations (state snapshot + TTC).
class MemoryBuffer {
 public:
  explicit MemoryBuffer(std::size_t capacity = 8) : capacity_(capacity) {}

  void record(int agent_id, const VehicleState& snapshot,
              const TtcSample& sample);
  /// Up to the last n samples for an agent, oldest first.
  std::vector<TtcSample> last_ttc(int agent_id, std::size_t n) const;
  std::size_t count(int agent_id) const;

 private:
  struct Entry {
    VehicleState snapshot;
    TtcSample sample;
  };
  std::size_t capacity_;
  std::map<int, std::deque<Entry>> per_agent_;
};

}  // namespace lcmpc

#pragma once

#include <set>
#include <string>
#include <vector>

#include "lcmpc/types.hpp"

namespace lcmpc {

/// Lane index on the one-way three-lane carriageway. Lateral position grows
/// from Left (y near 0) to Right.
enum class LaneId { Left = 0, Middle = 1, Right = 2 };

inline constexpr int kNumLanes = 3;

std::string lane_name(LaneId lane);

/// Three parallel lanes; y_inf/y_sup bound the ego *center* so the body stays
/// on the carriageway.
struct RoadGeometry {
  double lane_width = 4.0;
  double y_inf = 1.0;
  double y_sup = 11.0;

  static RoadGeometry make(double lane_width, double ego_width) {
    RoadGeometry r;
    r.lane_width = lane_width;
    r.y_inf = ego_width / 2.0;
    r.y_sup = kNumLanes * lane_width - ego_width / 2.0;
    return r;
  }

  double lane_center(LaneId lane) const {
    return (static_cast<int>(lane) + 0.5) * lane_width;
  }
  double lane_lower(LaneId lane) const {
    return static_cast<int>(lane) * lane_width;
  }
  double lane_upper(LaneId lane) const {
    return (static_cast<int>(lane) + 1) * lane_width;
  }
  /// Boundary between two adjacent lanes.
  double boundary_between(LaneId a, LaneId b) const {
    return (lane_center(a) + lane_center(b)) / 2.0;
  }
};

/// Lane containing lateral position y: floor(y / lane_width) clamped to the
/// carriageway, with exact boundaries mapping to the higher index.
LaneId lane_of(double y, const RoadGeometry& road);

/// All lanes intersected by [y_lo - half_width, y_hi + half_width].
std::set<LaneId> lanes_of_interval(double y_lo, double y_hi, double half_width,
                                   const RoadGeometry& road);

/// Candidate lanes ordered current-first, then nearest-first (ties toward
/// lower index).
std::vector<LaneId> lane_preference_order(LaneId current);

}  // namespace lcmpc

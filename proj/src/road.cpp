#include "lcmpc/road.hpp"

#include <algorithm>
#include <cmath>

namespace lcmpc {

std::string lane_name(LaneId lane) {
  switch (lane) {
    case LaneId::Left:
      return "Left Lane";
    case LaneId::Middle:
      return "Middle Lane";
    case LaneId::Right:
      return "Right Lane";
  }
  return "?";
}

LaneId lane_of(double y, const RoadGeometry& road) {
  if (!std::isfinite(y)) throw std::invalid_argument("lane_of: non-finite y");
  const int k = static_cast<int>(std::floor(y / road.lane_width));
  return static_cast<LaneId>(std::clamp(k, 0, kNumLanes - 1));
}

std::set<LaneId> lanes_of_interval(double y_lo, double y_hi, double half_width,
                                   const RoadGeometry& road) {
  if (y_lo > y_hi)
    throw std::invalid_argument("lanes_of_interval: y_lo > y_hi");
  const int lo = static_cast<int>(lane_of(y_lo - half_width, road));
  const int hi = static_cast<int>(lane_of(y_hi + half_width, road));
  std::set<LaneId> out;
  for (int k = lo; k <= hi; ++k) out.insert(static_cast<LaneId>(k));
  return out;
}

std::vector<LaneId> lane_preference_order(LaneId current) {
  std::vector<LaneId> lanes = {LaneId::Left, LaneId::Middle, LaneId::Right};
  std::stable_sort(lanes.begin(), lanes.end(), [&](LaneId a, LaneId b) {
    const int da = std::abs(static_cast<int>(a) - static_cast<int>(current));
    const int db = std::abs(static_cast<int>(b) - static_cast<int>(current));
    if (da != db) return da < db;
    return static_cast<int>(a) < static_cast<int>(b);
  });
  return lanes;
}

}  // namespace lcmpc

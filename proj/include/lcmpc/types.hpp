#pragma once

#include <cmath>
#include <stdexcept>

namespace lcmpc {

/// Vehicle state: longitudinal/lateral position and speed, all in SI units.
struct VehicleState {
  double x = 0.0;   ///< longitudinal position (m)
  double y = 0.0;   ///< lateral position (m)
  double vx = 0.0;  ///< longitudinal speed (m/s)
  double vy = 0.0;  ///< lateral speed (m/s)

  double speed() const { return std::hypot(vx, vy); }
  double heading() const { return speed() < 1e-6 ? 0.0 : std::atan2(vy, vx); }

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(vx) &&
           std::isfinite(vy);
  }
};

/// Control input: longitudinal acceleration and front-wheel steering angle.
struct ControlInput {
  double accel = 0.0;  ///< m/s^2
  double steer = 0.0;  ///< rad
};

/// Geometric and actuation limits of a vehicle.
struct VehicleParams {
  double length = 5.0;      ///< bounding-box length (m)
  double width = 2.0;       ///< bounding-box width (m)
  double lf = 2.5;          ///< center to front axle (m)
  double lr = 2.5;          ///< center to rear axle (m)
  double accel_min = -5.0;  ///< m/s^2
  double accel_max = 3.0;   ///< m/s^2
  double steer_min = -0.3;  ///< rad
  double steer_max = 0.3;   ///< rad
  double v_max = 40.0;      ///< speed cap (m/s)

  void validate() const {
    if (!(length > 0 && width > 0 && lf > 0 && lr > 0))
      throw std::invalid_argument("VehicleParams: geometry must be positive");
    if (!(accel_min < 0 && 0 < accel_max))
      throw std::invalid_argument("VehicleParams: accel bounds must straddle 0");
    if (!(steer_min < 0 && 0 < steer_max))
      throw std::invalid_argument("VehicleParams: steer bounds must straddle 0");
    if (!(v_max > 0)) throw std::invalid_argument("VehicleParams: v_max <= 0");
  }
};

}  // namespace lcmpc

#pragma once

#include <Eigen/Dense>

#include "lcmpc/types.hpp"

namespace lcmpc {

/// Below this speed the heading is treated as fixed (the (vx,vy) state cannot
/// represent orientation at standstill).
inline constexpr double kStandstillSpeed = 1e-6;

/// Kinematic bicycle update over one step of dt seconds.
///
/// The public state is (x, y, vx, vy); speed and heading are reconstructed
/// internally, advanced with the kinematic bicycle equations (slip angle from
/// the lf/lr split), and converted back. Speed is clamped to [0, v_max].
/// Pure function: identical inputs give bit-identical outputs.
///
/// Throws std::invalid_argument on a non-finite state, non-positive dt, or
/// controls outside the parameter bounds.
VehicleState step(const VehicleState& s, const ControlInput& u, double dt,
                  const VehicleParams& p);

/// Sensitivities of `step` with respect to state (4x4) and control (4x2),
/// evaluated analytically at (s, u). Matches central finite differences of
/// `step` away from the speed-clamp boundaries.
void jacobians(const VehicleState& s, const ControlInput& u, double dt,
               const VehicleParams& p, Eigen::Matrix<double, 4, 4>& A,
               Eigen::Matrix<double, 4, 2>& B);

}  // namespace lcmpc

#include "lcmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace lcmpc {

namespace {

void check_inputs(const VehicleState& s, const ControlInput& u, double dt,
                  const VehicleParams& p) {
  if (!s.finite()) throw std::invalid_argument("step: non-finite state");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw std::invalid_argument("step: dt must be positive");
  if (!std::isfinite(u.accel) || !std::isfinite(u.steer))
    throw std::invalid_argument("step: non-finite control");
  if (u.accel < p.accel_min || u.accel > p.accel_max)
    throw std::invalid_argument("step: accel out of bounds");
  if (u.steer < p.steer_min || u.steer > p.steer_max)
    throw std::invalid_argument("step: steer out of bounds");
}

}  // namespace

VehicleState step(const VehicleState& s, const ControlInput& u, double dt,
                  const VehicleParams& p) {
  check_inputs(s, u, dt, p);

  const double v = s.speed();
  const double psi = s.heading();
  const double beta = std::atan(p.lr / (p.lf + p.lr) * std::tan(u.steer));

  VehicleState out;
  out.x = s.x + v * std::cos(psi + beta) * dt;
  out.y = s.y + v * std::sin(psi + beta) * dt;
  const double psi_next = psi + (v / p.lr) * std::sin(beta) * dt;
  const double v_next = std::clamp(v + u.accel * dt, 0.0, p.v_max);
  out.vx = v_next * std::cos(psi_next);
  out.vy = v_next * std::sin(psi_next);
  return out;
}

void jacobians(const VehicleState& s, const ControlInput& u, double dt,
               const VehicleParams& p, Eigen::Matrix<double, 4, 4>& A,
               Eigen::Matrix<double, 4, 2>& B) {
  check_inputs(s, u, dt, p);

  A.setZero();
  B.setZero();
  A(0, 0) = 1.0;
  A(1, 1) = 1.0;

  const double v = s.speed();
  const double v_raw = v + u.accel * dt;
  const double clamp_gate = (v_raw > 0.0 && v_raw < p.v_max) ? 1.0 : 0.0;
  const double v_next = std::clamp(v_raw, 0.0, p.v_max);

  if (v < kStandstillSpeed) {
    // Standstill: position frozen, heading fixed at 0; only accel acts.
    A(2, 2) = clamp_gate;
    A(3, 3) = clamp_gate;
    B(2, 0) = clamp_gate * dt;
    return;
  }

  const double psi = std::atan2(s.vy, s.vx);
  const double tan_d = std::tan(u.steer);
  const double ratio = p.lr / (p.lf + p.lr);
  const double beta = std::atan(ratio * tan_d);
  const double psi_next = psi + (v / p.lr) * std::sin(beta) * dt;

  // d(v)/d(vx,vy), d(psi)/d(vx,vy)
  const double dv_dvx = s.vx / v;
  const double dv_dvy = s.vy / v;
  const double dpsi_dvx = -s.vy / (v * v);
  const double dpsi_dvy = s.vx / (v * v);

  // d(beta)/d(steer)
  const double sec2 = 1.0 + tan_d * tan_d;
  const double dbeta_dsteer = ratio * sec2 / (1.0 + ratio * ratio * tan_d * tan_d);

  const double c = std::cos(psi + beta);
  const double sn = std::sin(psi + beta);

  // x' = x + v*cos(psi+beta)*dt
  A(0, 2) = (dv_dvx * c - v * sn * dpsi_dvx) * dt;
  A(0, 3) = (dv_dvy * c - v * sn * dpsi_dvy) * dt;
  B(0, 1) = -v * sn * dbeta_dsteer * dt;

  // y' = y + v*sin(psi+beta)*dt
  A(1, 2) = (dv_dvx * sn + v * c * dpsi_dvx) * dt;
  A(1, 3) = (dv_dvy * sn + v * c * dpsi_dvy) * dt;
  B(1, 1) = v * c * dbeta_dsteer * dt;

  // psi' = psi + (v/lr)*sin(beta)*dt ; v' = clamp(v + a*dt)
  const double sb = std::sin(beta);
  const double cb = std::cos(beta);
  const double dpsin_dvx = dpsi_dvx + (sb / p.lr) * dv_dvx * dt;
  const double dpsin_dvy = dpsi_dvy + (sb / p.lr) * dv_dvy * dt;
  const double dpsin_dsteer = (v / p.lr) * cb * dbeta_dsteer * dt;
  const double dvn_dvx = clamp_gate * dv_dvx;
  const double dvn_dvy = clamp_gate * dv_dvy;
  const double dvn_da = clamp_gate * dt;

  const double cn = std::cos(psi_next);
  const double snn = std::sin(psi_next);

  // vx' = v'*cos(psi'), vy' = v'*sin(psi')
  A(2, 2) = dvn_dvx * cn - v_next * snn * dpsin_dvx;
  A(2, 3) = dvn_dvy * cn - v_next * snn * dpsin_dvy;
  A(3, 2) = dvn_dvx * snn + v_next * cn * dpsin_dvx;
  A(3, 3) = dvn_dvy * snn + v_next * cn * dpsin_dvy;
  B(2, 0) = dvn_da * cn;
  B(3, 0) = dvn_da * snn;
  B(2, 1) = -v_next * snn * dpsin_dsteer;
  B(3, 1) = v_next * cn * dpsin_dsteer;
}

}  // namespace lcmpc

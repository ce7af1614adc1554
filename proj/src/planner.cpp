#include "lcmpc/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcmpc/dynamics.hpp"
#include "lcmpc/qp.hpp"

namespace lcmpc {

namespace {

constexpr double kInf = 1e20;

void validate_problem(const MpcProblem& p) {
  if (p.k < 2) throw std::invalid_argument("MpcProblem: k must be >= 2");
  if (!(p.dt > 0)) throw std::invalid_argument("MpcProblem: dt must be > 0");
  if (!p.s0.finite()) throw std::invalid_argument("MpcProblem: s0 not finite");
  p.params.validate();
  const int kc = p.commit_step();
  if (kc < 1 || kc > p.k)
    throw std::invalid_argument("MpcProblem: commit step out of range");
  for (const auto& pred : p.predictions) {
    if (static_cast<int>(pred.horizon.size()) != p.k)
      throw std::invalid_argument(
          "MpcProblem: prediction horizon length does not match k");
    for (const auto& b : pred.horizon)
      if (b.x_lo > b.x_hi || b.y_lo > b.y_hi)
        throw std::invalid_argument("MpcProblem: malformed interval box");
  }
}

ControlInput clamp_control(const ControlInput& u, const VehicleParams& p) {
  return ControlInput{std::clamp(u.accel, p.accel_min, p.accel_max),
                      std::clamp(u.steer, p.steer_min, p.steer_max)};
}

std::vector<VehicleState> rollout(const MpcProblem& p,
                                  const std::vector<ControlInput>& controls) {
  std::vector<VehicleState> traj(p.k + 1);
  traj[0] = p.s0;
  for (int i = 0; i < p.k; ++i)
    traj[i + 1] = step(traj[i], controls[i], p.dt, p.params);
  return traj;
}

bool lanes_intersect(const std::set<LaneId>& agent_lanes, LaneId ego_lane,
                     const MpcProblem& p) {
  if (agent_lanes.count(ego_lane) || agent_lanes.count(p.target_lane))
    return true;
  for (LaneId extra : p.extra_relevant_lanes)
    if (agent_lanes.count(extra)) return true;
  return false;
}

IntervalBox box_at(const IntervalPrediction& pred, int i) {
  if (i == 0)
    return IntervalBox{pred.x_now, pred.x_now, pred.y_now, pred.y_now};
  return pred.horizon[i - 1];
}

/// Disjunctive separation violation; the literal form instead requires
/// |x - bound| >= L on both bounds.
double safety_violation(double x, const IntervalBox& box, double L,
                        bool literal) {
  if (literal) {
    const double v_lo = std::max(0.0, L - std::abs(x - box.x_lo));
    const double v_hi = std::max(0.0, L - std::abs(x - box.x_hi));
    return std::max(v_lo, v_hi);
  }
  const double v_ahead = std::max(0.0, box.x_hi + L - x);
  const double v_behind = std::max(0.0, x - (box.x_lo - L));
  return std::min(v_ahead, v_behind);
}

void bump_worst(PlanCheck& chk, const std::string& name, int step, double v,
                int agent_id = -1) {
  if (v > chk.max_violation) {
    chk.max_violation = v;
    chk.worst = ConstraintViolation{name, step, v, agent_id};
  }
}

}  // namespace

PlanCheck evaluate_plan(const MpcProblem& p,
                        const std::vector<ControlInput>& controls) {
  validate_problem(p);
  if (static_cast<int>(controls.size()) != p.k)
    throw std::invalid_argument("evaluate_plan: need exactly k controls");

  PlanCheck chk;
  for (int i = 0; i < p.k; ++i) {
    const auto& u = controls[i];
    const double over =
        std::max({p.params.accel_min - u.accel, u.accel - p.params.accel_max,
                  p.params.steer_min - u.steer, u.steer - p.params.steer_max,
                  0.0});
    bump_worst(chk, "control_bounds", i, over);
  }

  std::vector<ControlInput> clamped(controls.size());
  for (std::size_t i = 0; i < controls.size(); ++i)
    clamped[i] = clamp_control(controls[i], p.params);
  chk.trajectory = rollout(p, clamped);

  const auto [band_lo, band_hi] = p.commitment_band();
  const int kc = p.commit_step();
  for (int i = 1; i <= p.k; ++i) {
    const double y = chk.trajectory[i].y;
    bump_worst(chk, "road_boundary", i,
               std::max({p.road.y_inf - y, y - p.road.y_sup, 0.0}));
    if (i >= kc)
      bump_worst(chk, "lane_commitment", i,
                 std::max({band_lo - y, y - band_hi, 0.0}));
  }

  for (const auto& pred : p.predictions) {
    for (int i = 0; i <= p.k; ++i) {
      const IntervalBox box = box_at(pred, i);
      const auto agent_lanes =
          lanes_of_interval(box.y_lo, box.y_hi, pred.agent_half_width, p.road);
      const LaneId ego_lane = lane_of(chk.trajectory[i].y, p.road);
      if (!lanes_intersect(agent_lanes, ego_lane, p)) continue;
      const double v =
          safety_violation(chk.trajectory[i].x, box, p.cfg.safety_margin,
                           p.cfg.paper_literal_safety);
      bump_worst(chk, "safety_separation", i, v, pred.agent_id);
    }
  }

  double smooth = 0.0;
  for (int i = 0; i + 1 < p.k; ++i) {
    const double da = clamped[i + 1].accel - clamped[i].accel;
    const double ds = clamped[i + 1].steer - clamped[i].steer;
    smooth += std::hypot(da, ds);
  }
  const double y_err = chk.trajectory[p.k].y - p.lateral_setpoint();
  chk.objective = -chk.trajectory[p.k].x + p.cfg.smooth_weight * smooth +
                  p.cfg.lateral_weight * y_err * y_err;
  return chk;
}

namespace {

/// One SQP attempt with the ahead/behind branch fixed per relevant agent.
/// branch[agent index] == 1 means "stay fully ahead of the interval".
struct SqpOutcome {
  std::vector<ControlInput> controls;
  PlanCheck check;
  int iterations = 0;
};

SqpOutcome run_sqp(const MpcProblem& p, const std::vector<int>& relevant,
                   const std::vector<int>& branch,
                   std::vector<ControlInput> U) {
  const int k = p.k;
  const int n = 2 * k;
  const int kc = p.commit_step();
  const double margin = 2.0 * p.cfg.feas_tol;
  const double L = p.cfg.safety_margin;
  auto [band_lo, band_hi] = p.commitment_band();
  band_lo = std::max(band_lo, p.road.y_inf);
  band_hi = std::min(band_hi, p.road.y_sup);

  double tr_accel = 2.0;
  double tr_steer = 0.1;

  SqpOutcome out;
  out.check = evaluate_plan(p, U);
  double merit_now =
      out.check.objective + 1e3 * out.check.max_violation;
  int stagnant = 0;

  Eigen::Matrix<double, 4, 4> A;
  Eigen::Matrix<double, 4, 2> B;

  for (int iter = 0; iter < p.cfg.max_iters; ++iter) {
    ++out.iterations;
    const auto& traj = out.check.trajectory;

    // Sensitivities of every state in the horizon w.r.t. the control stack.
    std::vector<Eigen::MatrixXd> S(k + 1, Eigen::MatrixXd::Zero(4, n));
    for (int i = 0; i < k; ++i) {
      jacobians(traj[i], clamp_control(U[i], p.params), p.dt, p.params, A, B);
      S[i + 1] = A * S[i];
      S[i + 1].block(0, 2 * i, 4, 2) += B;
    }

    std::vector<Eigen::VectorXd> rows;
    std::vector<double> los, his;
    bool hopeless = false;
    auto add_row = [&](const Eigen::VectorXd& a, double lo, double hi) {
      const double norm = a.norm();
      if (norm < 1e-12) {
        if (lo > 1e-9 || hi < -1e-9) hopeless = true;
        return;
      }
      rows.push_back(a / norm);
      los.push_back(lo / norm);
      his.push_back(hi / norm);
    };

    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(j) = 1.0;
      const bool is_accel = (j % 2 == 0);
      const double u = is_accel ? U[j / 2].accel : U[j / 2].steer;
      const double lo = is_accel ? p.params.accel_min : p.params.steer_min;
      const double hi = is_accel ? p.params.accel_max : p.params.steer_max;
      const double tr = is_accel ? tr_accel : tr_steer;
      add_row(e, std::max(lo - u, -tr), std::min(hi - u, tr));
    }

    for (int i = 1; i <= k; ++i) {
      double ylo = p.road.y_inf + margin;
      double yhi = p.road.y_sup - margin;
      if (i >= kc) {
        ylo = std::max(ylo, band_lo + margin);
        yhi = std::min(yhi, band_hi - margin);
      }
      if (ylo > yhi) ylo = yhi = (ylo + yhi) / 2.0;
      add_row(S[i].row(1), ylo - traj[i].y, yhi - traj[i].y);
    }

    for (std::size_t r = 0; r < relevant.size(); ++r) {
      const auto& pred = p.predictions[relevant[r]];
      for (int i = 1; i <= k; ++i) {
        const IntervalBox box = box_at(pred, i);
        const auto agent_lanes = lanes_of_interval(
            box.y_lo, box.y_hi, pred.agent_half_width, p.road);
        if (!lanes_intersect(agent_lanes, lane_of(traj[i].y, p.road), p))
          continue;
        const Eigen::VectorXd gx = S[i].row(0);
        if (p.cfg.paper_literal_safety) {
          for (double bound : {box.x_lo, box.x_hi}) {
            const double side = traj[i].x >= bound ? 1.0 : -1.0;
            if (side > 0)
              add_row(gx, bound + L + margin - traj[i].x, kInf);
            else
              add_row(gx, -kInf, bound - L - margin - traj[i].x);
          }
        } else if (branch[r] == 1) {
          add_row(gx, box.x_hi + L + margin - traj[i].x, kInf);
        } else {
          add_row(gx, -kInf, box.x_lo - L - margin - traj[i].x);
        }
      }
    }
    if (hopeless) break;

    QpProblem qp;
    qp.P = Eigen::MatrixXd::Zero(n, n);
    qp.q = Eigen::VectorXd::Zero(n);
    qp.P.diagonal().array() += 1e-6;

    const Eigen::VectorXd gx_k = S[k].row(0);
    const Eigen::VectorXd gy_k = S[k].row(1);
    qp.q -= gx_k;
    const double y_err = traj[k].y - p.lateral_setpoint();
    qp.P += 2.0 * p.cfg.lateral_weight * gy_k * gy_k.transpose();
    qp.q += 2.0 * p.cfg.lateral_weight * y_err * gy_k;

    // Reweighted quadratic surrogate of the control-difference 2-norm.
    for (int i = 0; i + 1 < k; ++i) {
      const double da = U[i + 1].accel - U[i].accel;
      const double ds = U[i + 1].steer - U[i].steer;
      const double w = p.cfg.smooth_weight / std::max(std::hypot(da, ds), 1e-3);
      Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, n);
      D(0, 2 * i) = -1.0;
      D(0, 2 * (i + 1)) = 1.0;
      D(1, 2 * i + 1) = -1.0;
      D(1, 2 * (i + 1) + 1) = 1.0;
      qp.P += w * D.transpose() * D;
      Eigen::Vector2d r0(da, ds);
      qp.q += w * D.transpose() * r0;
    }

    const int m = static_cast<int>(rows.size());
    qp.A.resize(m, n);
    qp.lo.resize(m);
    qp.hi.resize(m);
    for (int i = 0; i < m; ++i) {
      qp.A.row(i) = rows[i].transpose();
      qp.lo(i) = los[i];
      qp.hi(i) = his[i];
    }

    const QpResult qres = solve_qp(qp, 1e-6);
    const double step_norm = qres.z.lpNorm<Eigen::Infinity>();
    if (step_norm < 1e-9 && out.check.max_violation <= 0.5 * p.cfg.feas_tol)
      break;

    std::vector<ControlInput> cand(U.size());
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 5; ++ls) {
      for (int i = 0; i < k; ++i)
        cand[i] = clamp_control(
            ControlInput{U[i].accel + t * qres.z(2 * i),
                         U[i].steer + t * qres.z(2 * i + 1)},
            p.params);
      PlanCheck c = evaluate_plan(p, cand);
      const double merit_cand = c.objective + 1e3 * c.max_violation;
      if (merit_cand <= merit_now - 1e-12) {
        U = cand;
        const double improvement = merit_now - merit_cand;
        merit_now = merit_cand;
        out.check = std::move(c);
        accepted = true;
        stagnant = improvement < 1e-9 ? stagnant + 1 : 0;
        break;
      }
      t *= 0.5;
    }

    if (!accepted) {
      tr_accel = std::max(tr_accel * 0.5, 1e-4);
      tr_steer = std::max(tr_steer * 0.5, 1e-5);
      ++stagnant;
    } else if (t == 1.0) {
      tr_accel = std::min(tr_accel * 1.4, 3.0);
      tr_steer = std::min(tr_steer * 1.4, 0.15);
    }
    if (stagnant >= 4) break;
    if (accepted && step_norm < 1e-9) break;
  }

  out.controls = U;
  return out;
}

std::vector<std::vector<int>> branch_assignments(
    const std::vector<int>& init_branch) {
  const std::size_t r = init_branch.size();
  std::vector<std::vector<int>> out;
  if (r == 0) {
    out.push_back({});
    return out;
  }
  if (r <= 4) {
    std::vector<std::pair<int, std::vector<int>>> ranked;
    for (std::size_t mask = 0; mask < (1u << r); ++mask) {
      std::vector<int> b(r);
      int dist = 0;
      for (std::size_t i = 0; i < r; ++i) {
        b[i] = (mask >> i) & 1;
        dist += (b[i] != init_branch[i]);
      }
      ranked.emplace_back(dist, std::move(b));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [d, b] : ranked) out.push_back(std::move(b));
    return out;
  }
  out.push_back(init_branch);
  for (std::size_t i = 0; i < r; ++i) {
    auto b = init_branch;
    b[i] = 1 - b[i];
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

PlanResult solve_lane_conditioned(const MpcProblem& p) {
  validate_problem(p);

  PlanResult result;

  // The present is not plannable: a violated separation at s0 rejects the
  // behavior outright.
  for (const auto& pred : p.predictions) {
    const IntervalBox now = box_at(pred, 0);
    const auto agent_lanes =
        lanes_of_interval(now.y_lo, now.y_hi, pred.agent_half_width, p.road);
    if (!lanes_intersect(agent_lanes, lane_of(p.s0.y, p.road), p)) continue;
    const double v = safety_violation(p.s0.x, now, p.cfg.safety_margin,
                                      p.cfg.paper_literal_safety);
    if (v > p.cfg.feas_tol) {
      result.status = PlanStatus::Infeasible;
      result.diagnostics.worst =
          ConstraintViolation{"safety_separation", 0, v, pred.agent_id};
      std::vector<ControlInput> zero(p.k);
      const PlanCheck chk = evaluate_plan(p, zero);
      result.trajectory = chk.trajectory;
      result.diagnostics.objective = chk.objective;
      return result;
    }
  }

  std::vector<std::vector<ControlInput>> inits;
  inits.emplace_back(p.k);  // zero-control rollout
  if (p.cfg.init_strategy == InitStrategy::ZeroThenBrake) {
    std::vector<ControlInput> brake(p.k,
                                    ControlInput{p.params.accel_min, 0.0});
    inits.push_back(std::move(brake));
  }

  bool have_best = false;
  PlanCheck best_check;
  std::vector<ControlInput> best_controls;
  bool have_fallback = false;
  PlanCheck fallback_check;  // least-violating infeasible attempt
  int total_iters = 0;

  for (const auto& init : inits) {
    const auto init_traj = rollout(p, init);

    // Relevant agents and their initial ahead/behind branch.
    std::vector<int> relevant;
    std::vector<int> init_branch;
    for (std::size_t j = 0; j < p.predictions.size(); ++j) {
      const auto& pred = p.predictions[j];
      bool any = false;
      for (int i = 1; i <= p.k && !any; ++i) {
        const IntervalBox box = box_at(pred, i);
        const auto agent_lanes = lanes_of_interval(
            box.y_lo, box.y_hi, pred.agent_half_width, p.road);
        any = lanes_intersect(agent_lanes, lane_of(init_traj[i].y, p.road), p);
      }
      if (any) {
        relevant.push_back(static_cast<int>(j));
        const IntervalBox first = box_at(pred, 1);
        init_branch.push_back(
            p.s0.x >= (first.x_lo + first.x_hi) / 2.0 ? 1 : 0);
      }
    }

    const auto assignments = p.cfg.paper_literal_safety
                                 ? std::vector<std::vector<int>>{init_branch}
                                 : branch_assignments(init_branch);
    for (const auto& branch : assignments) {
      SqpOutcome attempt = run_sqp(p, relevant, branch, init);
      total_iters += attempt.iterations;
      if (attempt.check.max_violation <= p.cfg.feas_tol) {
        if (!have_best || attempt.check.objective < best_check.objective) {
          have_best = true;
          best_check = attempt.check;
          best_controls = attempt.controls;
        }
      } else if (!have_fallback ||
                 attempt.check.max_violation < fallback_check.max_violation) {
        have_fallback = true;
        fallback_check = attempt.check;
      }
    }
    if (have_best) break;  // later inits exist only to rescue feasibility
  }

  result.diagnostics.iterations = total_iters;
  if (have_best) {
    result.status = PlanStatus::Feasible;
    result.controls = std::move(best_controls);
    result.trajectory = best_check.trajectory;
    result.diagnostics.objective = best_check.objective;
    result.diagnostics.worst = best_check.worst;
  } else {
    result.status = PlanStatus::Infeasible;
    result.trajectory = fallback_check.trajectory;
    result.diagnostics.objective = fallback_check.objective;
    result.diagnostics.worst = fallback_check.worst;
  }
  return result;
}

MinlpResult solve_naive_minlp(const MpcProblem& p) {
  MinlpResult out;
  const LaneId current = lane_of(p.s0.y, p.road);
  bool have_feasible = false;
  double best_infeasible_violation = std::numeric_limits<double>::infinity();

  for (LaneId lane : lane_preference_order(current)) {
    MpcProblem q = p;
    q.target_lane = lane;
    q.y_ref.reset();
    q.commit_band.reset();
    q.extra_relevant_lanes.clear();
    PlanResult r = solve_lane_conditioned(q);
    const bool feasible = r.status == PlanStatus::Feasible;
    const double obj = r.diagnostics.objective;
    const double viol = r.diagnostics.worst.magnitude;
    out.per_lane.emplace(lane, std::move(r));
    if (feasible) {
      // Strict comparison: equal objectives keep the earlier (preferred) lane.
      if (!have_feasible ||
          obj < out.per_lane.at(out.best_lane).diagnostics.objective) {
        have_feasible = true;
        out.best_lane = lane;
      }
    } else if (!have_feasible && viol < best_infeasible_violation) {
      best_infeasible_violation = viol;
      out.best_lane = lane;
    }
  }
  out.best = out.per_lane.at(out.best_lane);
  return out;
}

PlanResult grid_oracle(const MpcProblem& p,
                       const std::vector<double>& accel_grid,
                       const std::vector<double>& steer_grid) {
  validate_problem(p);
  if (p.k > 4 || accel_grid.size() > 5 || steer_grid.size() > 5 ||
      accel_grid.empty() || steer_grid.empty())
    throw std::invalid_argument("grid_oracle: combinatorial bound exceeded");
  for (double a : accel_grid)
    if (a < p.params.accel_min || a > p.params.accel_max)
      throw std::invalid_argument("grid_oracle: accel grid out of bounds");
  for (double s : steer_grid)
    if (s < p.params.steer_min || s > p.params.steer_max)
      throw std::invalid_argument("grid_oracle: steer grid out of bounds");

  const std::size_t per_step = accel_grid.size() * steer_grid.size();
  std::size_t total = 1;
  for (int i = 0; i < p.k; ++i) total *= per_step;

  PlanResult result;
  bool have_best = false;
  PlanCheck best;
  std::vector<ControlInput> best_controls;
  bool have_fallback = false;
  PlanCheck fallback;

  std::vector<ControlInput> controls(p.k);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (int i = 0; i < p.k; ++i) {
      const std::size_t choice = rem % per_step;
      rem /= per_step;
      controls[i].accel = accel_grid[choice / steer_grid.size()];
      controls[i].steer = steer_grid[choice % steer_grid.size()];
    }
    PlanCheck chk = evaluate_plan(p, controls);
    if (chk.max_violation <= p.cfg.feas_tol) {
      if (!have_best || chk.objective < best.objective) {
        have_best = true;
        best = chk;
        best_controls = controls;
      }
    } else if (!have_fallback || chk.max_violation < fallback.max_violation) {
      have_fallback = true;
      fallback = chk;
    }
  }

  result.diagnostics.iterations = static_cast<int>(total);
  if (have_best) {
    result.status = PlanStatus::Feasible;
    result.controls = best_controls;
    result.trajectory = best.trajectory;
    result.diagnostics.objective = best.objective;
    result.diagnostics.worst = best.worst;
  } else {
    result.status = PlanStatus::Infeasible;
    result.trajectory = fallback.trajectory;
    result.diagnostics.objective = fallback.objective;
    result.diagnostics.worst = fallback.worst;
  }
  return result;
}

ControlInput failsafe_control(
    const VehicleState& ego, const VehicleParams& ego_params,
    const std::optional<std::pair<VehicleState, VehicleParams>>& leader,
    const RoadGeometry& road, const FailsafeConfig& cfg) {
  const double y_center = road.lane_center(lane_of(ego.y, road));
  const double steer = std::clamp(
      cfg.steer_kp * (y_center - ego.y) - cfg.steer_kd * ego.vy,
      ego_params.steer_min, ego_params.steer_max);

  if (!leader) return ControlInput{0.0, steer};

  const auto& [ls, lp] = *leader;
  const double gap_length = (ego_params.length + lp.length) / 2.0;
  const double gap = ls.x - ego.x - gap_length;
  const double ttc = compute_ttc(ego, ls, TtcRelation::LeaderSameLane,
                                 gap_length);
  // Worst-case braking reserve: the gap left if both vehicles brake at the
  // ego's limit from now on. Invariant under synchronized max braking, so
  // triggering before it erodes guarantees separation against any leader
  // deceleration no harder than accel_min.
  const double reserve =
      gap + (ls.vx * ls.vx - ego.vx * ego.vx) / (2.0 * -ego_params.accel_min);
  if (gap < cfg.min_gap || ttc < cfg.ttc_trigger ||
      reserve < cfg.min_gap + cfg.reaction_time * ego.vx)
    return ControlInput{ego_params.accel_min, steer};

  const double closing = ego.vx - ls.vx;
  double accel = 0.0;
  if (closing > 0.0) {
    const double room = std::max(gap - cfg.min_gap, 0.1);
    accel = std::max(ego_params.accel_min,
                     -cfg.brake_margin * closing * closing / (2.0 * room));
  }
  return ControlInput{accel, steer};
}

}  // namespace lcmpc

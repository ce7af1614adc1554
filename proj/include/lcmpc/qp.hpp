#pragma once

#include <Eigen/Dense>

namespace lcmpc {

/// Dense convex QP:  min 1/2 z'Pz + q'z  s.t.  lo <= A z <= hi.
/// P must be positive semidefinite (callers add a small ridge).
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct QpResult {
  Eigen::VectorXd z;
  double max_violation = 0.0;
  int worst_row = -1;
  int iterations = 0;
  bool feasible = false;
};

/// Quadratic-penalty solve with escalating weights and Newton inner steps.
/// On an infeasible problem the iterate converges to a least-violation point
/// and `feasible` is false with the worst row reported.
QpResult solve_qp(const QpProblem& qp, double feas_tol = 1e-7);

}  // namespace lcmpc

#include "lcmpc/qp.hpp"

#include <cmath>
#include <stdexcept>

namespace lcmpc {

namespace {

double merit(const QpProblem& qp, const Eigen::VectorXd& z, double w,
             const Eigen::VectorXd& r) {
  double m = 0.5 * z.dot(qp.P * z) + qp.q.dot(z);
  for (int i = 0; i < r.size(); ++i) {
    const double below = qp.lo(i) - r(i);
    const double above = r(i) - qp.hi(i);
    const double v = std::max({below, above, 0.0});
    m += w * v * v;
  }
  return m;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, double feas_tol) {
  const int n = static_cast<int>(qp.q.size());
  const int m = static_cast<int>(qp.lo.size());
  if (qp.P.rows() != n || qp.P.cols() != n || qp.A.rows() != m ||
      qp.A.cols() != n || qp.hi.size() != m)
    throw std::invalid_argument("solve_qp: inconsistent dimensions");

  QpResult res;
  res.z = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd r(m), g(n), dz(n);
  Eigen::MatrixXd H(n, n);

  for (double w : {1e2, 1e4, 1e6, 1e8, 1e10}) {
    for (int it = 0; it < 30; ++it) {
      ++res.iterations;
      r = qp.A * res.z;
      g = qp.P * res.z + qp.q;
      H = qp.P;
      H.diagonal().array() += 1e-12;
      for (int i = 0; i < m; ++i) {
        double d = 0.0;
        if (r(i) < qp.lo(i))
          d = r(i) - qp.lo(i);
        else if (r(i) > qp.hi(i))
          d = r(i) - qp.hi(i);
        if (d != 0.0) {
          g.noalias() += 2.0 * w * d * qp.A.row(i).transpose();
          H.noalias() +=
              2.0 * w * qp.A.row(i).transpose() * qp.A.row(i);
        }
      }
      dz = -H.ldlt().solve(g);
      if (!dz.allFinite()) break;
      if (dz.lpNorm<Eigen::Infinity>() < 1e-13) break;

      const double m0 = merit(qp, res.z, w, r);
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls) {
        const Eigen::VectorXd cand = res.z + t * dz;
        const Eigen::VectorXd rc = qp.A * cand;
        if (merit(qp, cand, w, rc) <= m0 + 1e-14 * std::abs(m0)) {
          res.z = cand;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      if (t * dz.lpNorm<Eigen::Infinity>() < 1e-12) break;
    }
  }

  r = qp.A * res.z;
  res.max_violation = 0.0;
  for (int i = 0; i < m; ++i) {
    const double v = std::max({qp.lo(i) - r(i), r(i) - qp.hi(i), 0.0});
    if (v > res.max_violation) {
      res.max_violation = v;
      res.worst_row = i;
    }
  }
  res.feasible = res.max_violation <= feas_tol;
  return res;
}

}  // namespace lcmpc

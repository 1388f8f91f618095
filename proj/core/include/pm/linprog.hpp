#pragma once

#include <Eigen/Dense>

#include "pm/errors.hpp"

namespace pm::lp {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status;
  double value = 0.0;
  Eigen::VectorXd x;
};

// maximize c^T x  subject to  A x <= b,  E x = f,  x >= 0.
// Dense two-phase simplex with Bland's rule; sized for the tiny programs
// produced by cell geometry (k, d <= 16).  Throws LpFailure on numerical
// breakdown (iteration cap), never for infeasible/unbounded inputs.
LpResult maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::MatrixXd& E = Eigen::MatrixXd(), const Eigen::VectorXd& f = Eigen::VectorXd());

inline LpResult minimize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                         const Eigen::MatrixXd& E = Eigen::MatrixXd(),
                         const Eigen::VectorXd& f = Eigen::VectorXd()) {
  LpResult r = maximize(-c, A, b, E, f);
  r.value = -r.value;
  return r;
}

}  // namespace pm::lp

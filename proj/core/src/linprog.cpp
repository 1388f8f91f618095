#include "pm/linprog.hpp"

#include <cmath>
#include <vector>

namespace pm::lp {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-8;
constexpr int kMaxIters = 20000;

struct Tableau {
  Eigen::MatrixXd rows;  // m x (ncols + 1), last column is the rhs
  Eigen::VectorXd obj;   // ncols + 1, reduced objective row (maximize)
  std::vector<int> basis;

  int m() const { return static_cast<int>(rows.rows()); }
  int ncols() const { return static_cast<int>(rows.cols()) - 1; }

  void pivot(int r, int c) {
    rows.row(r) /= rows(r, c);
    for (int i = 0; i < m(); ++i) {
      if (i == r) continue;
      const double factor = rows(i, c);
      if (factor != 0.0) rows.row(i) -= factor * rows.row(r);
    }
    const double of = obj(c);
    if (of != 0.0) obj -= of * rows.row(r).transpose();
    basis[r] = c;
  }

  // Bland's rule simplex on the current objective row.  `allowed` masks the
  // columns that may enter.  Returns false when the problem is unbounded.
  bool run(const std::vector<bool>& allowed) {
    for (int iter = 0; iter < kMaxIters; ++iter) {
      int enter = -1;
      for (int j = 0; j < ncols(); ++j) {
        if (allowed[j] && obj(j) > kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < m(); ++i) {
        const double a = rows(i, enter);
        if (a > kPivotTol) {
          const double ratio = rows(i, ncols()) / a;
          if (leave < 0 || ratio < best_ratio - kPivotTol ||
              (std::abs(ratio - best_ratio) <= kPivotTol && basis[i] < basis[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw LpFailure("simplex iteration cap reached");
  }
};

}  // namespace

LpResult maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::MatrixXd& E, const Eigen::VectorXd& f) {
  const int n = static_cast<int>(c.size());
  const int mi = static_cast<int>(A.rows());
  const int me = static_cast<int>(E.rows());
  if (mi > 0 && A.cols() != n) throw DimensionMismatch("LP: A column count mismatch");
  if (me > 0 && E.cols() != n) throw DimensionMismatch("LP: E column count mismatch");

  const int m = mi + me;
  const int nslack = mi;
  // Worst case every row needs an artificial.
  const int ncols_max = n + nslack + m;
  Tableau t;
  t.rows = Eigen::MatrixXd::Zero(m, ncols_max + 1);
  t.basis.assign(m, -1);

  // Fill constraint rows, flipping signs so every rhs is non-negative.
  for (int i = 0; i < m; ++i) {
    const bool ineq = i < mi;
    Eigen::RowVectorXd row = ineq ? Eigen::RowVectorXd(A.row(i)) : Eigen::RowVectorXd(E.row(i - mi));
    double rhs = ineq ? b(i) : f(i - mi);
    double slack_sign = ineq ? 1.0 : 0.0;
    if (rhs < 0.0) {
      row = -row;
      rhs = -rhs;
      slack_sign = -slack_sign;
    }
    t.rows.block(i, 0, 1, n) = row;
    if (ineq) t.rows(i, n + i) = slack_sign;
    t.rows(i, ncols_max) = rhs;
  }

  // Artificials where no slack can start basic.
  int nart = 0;
  std::vector<int> art_cols;
  for (int i = 0; i < m; ++i) {
    if (i < mi && t.rows(i, n + i) > 0.0) {
      t.basis[i] = n + i;
    } else {
      const int col = n + nslack + nart++;
      t.rows(i, col) = 1.0;
      t.basis[i] = col;
      art_cols.push_back(col);
    }
  }
  const int ncols = n + nslack + nart;
  Eigen::MatrixXd trimmed = t.rows.leftCols(ncols + 1);
  trimmed.col(ncols) = t.rows.col(ncols_max);
  t.rows = trimmed;

  std::vector<bool> allowed(ncols, true);

  // Phase 1: maximize -sum(artificials).
  if (nart > 0) {
    t.obj = Eigen::VectorXd::Zero(ncols + 1);
    for (int col : art_cols) t.obj(col) = -1.0;
    // Price out the basic artificials.
    for (int i = 0; i < m; ++i)
      if (t.obj(t.basis[i]) != 0.0) t.obj -= t.obj(t.basis[i]) * t.rows.row(i).transpose();
    if (!t.run(allowed)) throw LpFailure("phase-1 unbounded, input inconsistent");
    // The reduced objective row carries the negated phase-1 value in its
    // last slot; a positive entry means artificials remain at a positive
    // level and the constraints are inconsistent.
    if (t.obj(ncols) > kFeasTol) return {LpStatus::Infeasible, 0.0, Eigen::VectorXd()};
    // Drive out any artificial still basic (at zero level).
    for (int i = 0; i < m; ++i) {
      if (t.basis[i] >= n + nslack) {
        int col = -1;
        for (int j = 0; j < n + nslack; ++j)
          if (std::abs(t.rows(i, j)) > kPivotTol) {
            col = j;
            break;
          }
        if (col >= 0) t.pivot(i, col);
        // Otherwise the row is redundant; the artificial stays basic at 0.
      }
    }
    for (int col : art_cols) allowed[col] = false;
  }

  // Phase 2.
  t.obj = Eigen::VectorXd::Zero(ncols + 1);
  t.obj.head(n) = c;
  for (int i = 0; i < m; ++i)
    if (t.obj(t.basis[i]) != 0.0) t.obj -= t.obj(t.basis[i]) * t.rows.row(i).transpose();
  if (!t.run(allowed)) return {LpStatus::Unbounded, 0.0, Eigen::VectorXd()};

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (t.basis[i] < n) x(t.basis[i]) = t.rows(i, ncols);
  return {LpStatus::Optimal, c.dot(x), std::move(x)};
}

}  // namespace pm::lp

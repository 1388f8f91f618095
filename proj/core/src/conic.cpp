#include "pm/conic.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace pm::conic {

namespace detail {

bool block_in_domain(BlockType type, const Eigen::VectorXd& s) {
  switch (type) {
    case BlockType::NonNegative:
      return (s.array() > 0.0).all();
    case BlockType::RotatedCone: {
      const double u = s(0), v = s(1);
      return u > 0.0 && v > 0.0 && u * v - s.tail(s.size() - 2).squaredNorm() > 0.0;
    }
    case BlockType::ExponentialCone: {
      const double x = s(0), y = s(1), z = s(2);
      return y > 0.0 && z > 0.0 && y * std::log(z / y) - x > 0.0;
    }
  }
  return false;
}

double block_margin(BlockType type, const Eigen::VectorXd& s) {
  switch (type) {
    case BlockType::NonNegative:
      return s.minCoeff();
    case BlockType::RotatedCone:
      return std::min({s(0), s(1), s(0) * s(1) - s.tail(s.size() - 2).squaredNorm()});
    case BlockType::ExponentialCone:
      return std::min({s(1), s(2), s(1) * std::log(s(2) / s(1)) - s(0)});
  }
  return 0.0;
}

int block_degree(BlockType type, int size) {
  switch (type) {
    case BlockType::NonNegative: return size;
    case BlockType::RotatedCone: return 2;
    case BlockType::ExponentialCone: return 3;
  }
  return 0;
}

BlockDerivs block_derivs(BlockType type, const Eigen::VectorXd& s) {
  BlockDerivs out;
  out.in_domain = block_in_domain(type, s);
  if (!out.in_domain) return out;
  const int n = static_cast<int>(s.size());
  out.grad = Eigen::VectorXd::Zero(n);
  out.hess = Eigen::MatrixXd::Zero(n, n);
  switch (type) {
    case BlockType::NonNegative: {
      out.phi = 0.0;
      for (int i = 0; i < n; ++i) {
        out.phi -= std::log(s(i));
        out.grad(i) = -1.0 / s(i);
        out.hess(i, i) = 1.0 / (s(i) * s(i));
      }
      break;
    }
    case BlockType::RotatedCone: {
      const double u = s(0), v = s(1);
      const Eigen::VectorXd z = s.tail(n - 2);
      const double D = u * v - z.squaredNorm();
      Eigen::VectorXd dD(n);
      dD(0) = v;
      dD(1) = u;
      dD.tail(n - 2) = -2.0 * z;
      out.phi = -std::log(D);
      out.grad = -dD / D;
      out.hess = dD * dD.transpose() / (D * D);
      // -HessD/D part.
      out.hess(0, 1) -= 1.0 / D;
      out.hess(1, 0) -= 1.0 / D;
      for (int i = 2; i < n; ++i) out.hess(i, i) += 2.0 / D;
      break;
    }
    case BlockType::ExponentialCone: {
      const double x = s(0), y = s(1), z = s(2);
      const double l = std::log(z / y);
      const double D = y * l - x;
      Eigen::Vector3d dD(-1.0, l - 1.0, y / z);
      Eigen::Matrix3d hD = Eigen::Matrix3d::Zero();
      hD(1, 1) = -1.0 / y;
      hD(1, 2) = hD(2, 1) = 1.0 / z;
      hD(2, 2) = -y / (z * z);
      out.phi = -std::log(D) - std::log(y) - std::log(z);
      out.grad = -dD / D;
      out.grad(1) -= 1.0 / y;
      out.grad(2) -= 1.0 / z;
      out.hess = dD * dD.transpose() / (D * D) - hD / D;
      out.hess(1, 1) += 1.0 / (y * y);
      out.hess(2, 2) += 1.0 / (z * z);
      break;
    }
  }
  return out;
}

}  // namespace detail

namespace {

struct BarrierEval {
  bool in_domain = false;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

Eigen::VectorXd slacks(const Program& p, const Eigen::VectorXd& x) {
  return p.slack_const - p.slack_map * x;
}

bool in_domain(const Program& p, const Eigen::VectorXd& s) {
  for (const Block& b : p.blocks)
    if (!detail::block_in_domain(b.type, s.segment(b.offset, b.size))) return false;
  return true;
}

BarrierEval eval_barrier(const Program& p, const Eigen::VectorXd& s) {
  BarrierEval out;
  out.in_domain = true;
  const int n = p.num_vars;
  out.grad = Eigen::VectorXd::Zero(n);
  out.hess = Eigen::MatrixXd::Zero(n, n);
  for (const Block& b : p.blocks) {
    detail::BlockDerivs d = detail::block_derivs(b.type, s.segment(b.offset, b.size));
    if (!d.in_domain) {
      out.in_domain = false;
      return out;
    }
    const auto Fb = p.slack_map.middleRows(b.offset, b.size);
    out.grad.noalias() -= Fb.transpose() * d.grad;
    out.hess.noalias() += Fb.transpose() * d.hess * Fb;
  }
  return out;
}

}  // namespace

Result solve(const Program& prog, const Eigen::VectorXd& interior_start, const Settings& settings) {
  const int n = prog.num_vars;
  const int me = static_cast<int>(prog.eq_lhs.rows());
  Result res;
  res.x = interior_start;

  // Feasible-start Newton: put the start exactly on the equality manifold
  // (our starts are constructed there; stray solver output gets a tiny
  // least-squares correction first).
  if (me > 0) {
    const Eigen::VectorXd r = prog.eq_lhs * res.x - prog.eq_rhs;
    if (r.cwiseAbs().maxCoeff() > 0.0) {
      const Eigen::MatrixXd aat = prog.eq_lhs * prog.eq_lhs.transpose();
      res.x -= prog.eq_lhs.transpose() * aat.ldlt().solve(r);
    }
  }
  if (!in_domain(prog, slacks(prog, res.x)))
    throw SolverFailure("conic solve: starting point is not strictly interior");

  double degree_total = 0.0;
  for (const Block& b : prog.blocks) degree_total += detail::block_degree(b.type, b.size);

  auto barrier_value = [&](const Eigen::VectorXd& s) {
    double phi = 0.0;
    for (const Block& b : prog.blocks) {
      const detail::BlockDerivs d = detail::block_derivs(b.type, s.segment(b.offset, b.size));
      if (!d.in_domain) return std::numeric_limits<double>::infinity();
      phi += d.phi;
    }
    return phi;
  };

  double t = settings.t0;
  int steps = 0;
  bool out_of_budget = false;
  Eigen::VectorXd snap_x;
  double snap_gap = std::numeric_limits<double>::infinity();

  for (int stage = 0; stage < 40; ++stage) {
    // The gap certificate m/t is only meaningful at a centred point, so a
    // stage that cannot centre ends the solve at the previous snapshot.
    bool centred = false;
    double lambda_sq = std::numeric_limits<double>::infinity();
    double prev_lambda_sq = std::numeric_limits<double>::infinity();
    double fx = t * prog.objective.dot(res.x) + barrier_value(slacks(prog, res.x));
    for (int it = 0; it < 150; ++it) {
      if (steps++ > settings.max_newton) {
        out_of_budget = true;
        break;
      }
      BarrierEval be = eval_barrier(prog, slacks(prog, res.x));
      const Eigen::VectorXd grad = t * prog.objective + be.grad;

      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + me, n + me);
      kkt.topLeftCorner(n, n) = be.hess;
      kkt.topLeftCorner(n, n).diagonal().array() += 1e-12;
      if (me > 0) {
        kkt.topRightCorner(n, me) = prog.eq_lhs.transpose();
        kkt.bottomLeftCorner(me, n) = prog.eq_lhs;
      }
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + me);
      rhs.head(n) = -grad;
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
      Eigen::VectorXd delta = lu.solve(rhs);
      delta += lu.solve(rhs - kkt * delta);  // one refinement step for stiff stages
      if (!delta.allFinite()) break;
      const Eigen::VectorXd dx = delta.head(n);

      prev_lambda_sq = lambda_sq;
      lambda_sq = -grad.dot(dx);
      if (const char* dbg = std::getenv("PM_CONIC_TRACE"); dbg && dbg[0] == '1')
        std::fprintf(stderr, "  [nt] stage=%d it=%d t=%g dec2=%g\n", stage, it, t, lambda_sq);
      if (lambda_sq <= 1e-6) {
        centred = true;
        break;
      }
      // Finite precision floors the decrement near the central path; a
      // stagnating small decrement still certifies the gap up to 1 + lambda.
      if (lambda_sq > 0.9 * prev_lambda_sq) {
        centred = lambda_sq <= 1e-2;
        break;
      }

      // Armijo backtracking on the centering objective itself.
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 70; ++ls) {
        const Eigen::VectorXd xn = res.x + alpha * dx;
        const double fn = t * prog.objective.dot(xn) + barrier_value(slacks(prog, xn));
        if (fn <= fx - 0.25 * alpha * lambda_sq) {
          res.x = xn;
          fx = fn;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Line search exhausted; treat as centred if the decrement is small
        // enough that the certificate is still honest.
        centred = lambda_sq <= 1e-2;
        break;
      }
    }

    if (!centred || out_of_budget) break;
    snap_x = res.x;
    snap_gap = degree_total / t * (1.0 + std::sqrt(std::max(0.0, lambda_sq)));
    const double tol = settings.rel_tol * (1.0 + std::abs(prog.objective.dot(res.x)));
    if (snap_gap <= tol) break;
    t *= settings.mu;
  }

  if (snap_x.size() > 0) res.x = snap_x;
  res.objective = prog.objective.dot(res.x);
  res.gap_bound = snap_gap;
  res.status = (snap_x.size() > 0 &&
                snap_gap <= settings.rel_tol * (1.0 + std::abs(res.objective)))
                   ? SolveStatus::Optimal
                   : SolveStatus::NumericalFailure;
  if (const char* dbg = std::getenv("PM_CONIC_DEBUG"); dbg && dbg[0] == '1') {
    std::fprintf(stderr, "[conic] steps=%d t=%g gap=%g obj=%g centred_snap=%d budget=%d\n",
                 steps, t, snap_gap, res.objective, snap_x.size() > 0 ? 1 : 0,
                 out_of_budget ? 1 : 0);
  }

  const Eigen::VectorXd s = slacks(prog, res.x);
  res.min_margin = std::numeric_limits<double>::infinity();
  for (const Block& b : prog.blocks)
    res.min_margin = std::min(res.min_margin, detail::block_margin(b.type, s.segment(b.offset, b.size)));
  res.eq_residual =
      me > 0 ? (prog.eq_lhs * res.x - prog.eq_rhs).cwiseAbs().maxCoeff() : 0.0;
  res.newton_steps = steps;
  return res;
}

int Builder::push_row(const Expr& e) {
  slack_rows_.push_back(e);
  return static_cast<int>(slack_rows_.size()) - 1;
}

void Builder::add_eq(const Expr& e, double rhs) {
  eq_.push_back(e);
  eq_rhs_.push_back(rhs - e.constant());
}

void Builder::add_nonneg(const Expr& e) {
  const int at = push_row(e);
  blocks_.push_back({BlockType::NonNegative, at, 1});
}

void Builder::add_rotated(const Expr& u, const Expr& v, const std::vector<Expr>& z) {
  const int at = push_row(u);
  push_row(v);
  for (const Expr& e : z) push_row(e);
  blocks_.push_back({BlockType::RotatedCone, at, 2 + static_cast<int>(z.size())});
}

void Builder::add_exp(const Expr& x, const Expr& y, const Expr& z) {
  const int at = push_row(x);
  push_row(y);
  push_row(z);
  blocks_.push_back({BlockType::ExponentialCone, at, 3});
}

Program Builder::build() const {
  Program p;
  p.num_vars = num_vars_;
  p.objective = Eigen::VectorXd::Zero(num_vars_);
  for (const auto& [v, c] : obj_) p.objective(v) += c;
  const int me = static_cast<int>(eq_.size());
  p.eq_lhs = Eigen::MatrixXd::Zero(me, num_vars_);
  p.eq_rhs = Eigen::VectorXd::Zero(me);
  for (int i = 0; i < me; ++i) {
    for (const auto& [v, c] : eq_[i].terms()) p.eq_lhs(i, v) += c;
    p.eq_rhs(i) = eq_rhs_[i];
  }
  const int ms = static_cast<int>(slack_rows_.size());
  p.slack_map = Eigen::MatrixXd::Zero(ms, num_vars_);
  p.slack_const = Eigen::VectorXd::Zero(ms);
  for (int i = 0; i < ms; ++i) {
    // s = h - F x must evaluate to the expression itself.
    p.slack_const(i) = slack_rows_[i].constant();
    for (const auto& [v, c] : slack_rows_[i].terms()) p.slack_map(i, v) -= c;
  }
  p.blocks = blocks_;
  return p;
}

}  // namespace pm::conic

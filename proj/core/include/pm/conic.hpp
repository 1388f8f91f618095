#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "pm/errors.hpp"

// Small dense conic solver: linear objective, linear equalities, and a slack
// vector s = h - F x constrained to a product of non-negative coordinates,
// rotated second-order cones and exponential cones.  Solved by a log-barrier
// interior-point method with infeasible-start Newton steps; the caller
// supplies a strictly interior starting point (every program assembled in
// this project has an analytic one).
namespace pm::conic {

enum class BlockType {
  NonNegative,      // s_i >= 0 coordinatewise
  RotatedCone,      // (u, v, z...): u v >= ||z||^2, u, v >= 0
  ExponentialCone,  // (x, y, z): y e^(x/y) <= z, y > 0
};

struct Block {
  BlockType type;
  int offset;
  int size;
};

struct Program {
  int num_vars = 0;
  Eigen::VectorXd objective;
  Eigen::MatrixXd eq_lhs;      // may have zero rows
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd slack_map;   // F
  Eigen::VectorXd slack_const; // h
  std::vector<Block> blocks;
};

struct Settings {
  double rel_tol = 1e-8;   // certified gap <= rel_tol * (1 + |objective|)
  double t0 = 1.0;
  double mu = 20.0;
  int max_newton = 800;
};

enum class SolveStatus { Optimal, NumericalFailure };

struct Result {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  double gap_bound = 0.0;     // barrier suboptimality certificate
  double eq_residual = 0.0;   // ||Ax - b||_inf at the returned point
  double min_margin = 0.0;    // smallest strict-interior margin over blocks
  int newton_steps = 0;
};

Result solve(const Program& prog, const Eigen::VectorXd& interior_start,
             const Settings& settings = {});

// Affine expression used by the builder.
class Expr {
 public:
  Expr() = default;
  Expr(double constant) : constant_(constant) {}
  static Expr variable(int index, double coef = 1.0) {
    Expr e;
    e.terms_.emplace_back(index, coef);
    return e;
  }
  Expr& add(int index, double coef) {
    terms_.emplace_back(index, coef);
    return *this;
  }
  Expr& add_constant(double c) {
    constant_ += c;
    return *this;
  }
  Expr operator+(const Expr& o) const {
    Expr e = *this;
    e.constant_ += o.constant_;
    e.terms_.insert(e.terms_.end(), o.terms_.begin(), o.terms_.end());
    return e;
  }
  Expr operator-(const Expr& o) const {
    Expr e = *this;
    e.constant_ -= o.constant_;
    for (const auto& [v, c] : o.terms_) e.terms_.emplace_back(v, -c);
    return e;
  }
  Expr operator*(double s) const {
    Expr e;
    e.constant_ = constant_ * s;
    for (const auto& [v, c] : terms_) e.terms_.emplace_back(v, c * s);
    return e;
  }
  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  double constant() const { return constant_; }

 private:
  std::vector<std::pair<int, double>> terms_;
  double constant_ = 0.0;
};

class Builder {
 public:
  int add_vars(int n) {
    const int first = num_vars_;
    num_vars_ += n;
    return first;
  }
  int num_vars() const { return num_vars_; }
  void objective_term(int var, double coef) { obj_.emplace_back(var, coef); }
  void add_eq(const Expr& e, double rhs);
  void add_nonneg(const Expr& e);  // e >= 0
  void add_rotated(const Expr& u, const Expr& v, const std::vector<Expr>& z);
  void add_exp(const Expr& x, const Expr& y, const Expr& z);  // y e^(x/y) <= z
  Program build() const;

 private:
  int push_row(const Expr& e);  // slack row s = e evaluated at x
  int num_vars_ = 0;
  std::vector<std::pair<int, double>> obj_;
  std::vector<Expr> eq_;
  std::vector<double> eq_rhs_;
  std::vector<Expr> slack_rows_;
  std::vector<Block> blocks_;
};

namespace detail {
// Barrier value/derivatives of one block at slack values s; exposed for the
// finite-difference tests.
struct BlockDerivs {
  bool in_domain = false;
  double phi = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};
BlockDerivs block_derivs(BlockType type, const Eigen::VectorXd& s);
bool block_in_domain(BlockType type, const Eigen::VectorXd& s);
double block_margin(BlockType type, const Eigen::VectorXd& s);
int block_degree(BlockType type, int size);
}  // namespace detail

}  // namespace pm::conic

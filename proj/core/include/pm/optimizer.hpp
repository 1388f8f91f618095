#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <vector>

#include "pm/conic.hpp"
#include "pm/estimation.hpp"
#include "pm/game.hpp"
#include "pm/geometry.hpp"

namespace pm {

struct SolverSettings {
  double tol_solver = 1e-6;  // relative objective tolerance
  int max_iterations = 800;
  std::optional<double> epsilon;  // floor on p for the quadratic path; default eta^2
  enum class Path { Socp, Exact } path = Path::Socp;
};

enum class WitnessSource { Solver, AnalyticBandit, AnalyticFullInfo, AnalyticGlobal, AnalyticWater };
const char* to_string(WitnessSource w);

struct FeasibilityReport {
  double eq_residual = 0.0;    // |sum p - 1| at the solver point
  double cone_margin = 0.0;    // smallest strict-interior margin
  double unbiasedness = 0.0;   // H-circ residual of the returned G
};

// Everything solve_exploration needs about a game, computed once.
struct GameGeometry {
  GameClassification cls;
  std::vector<int> pareto;
  bool self_revealing = false;
  bool full_information = false;
  bool local_estimators_ok = false;
  std::map<std::pair<int, int>, EdgeEstimator> local_estimators;
  std::optional<EstimationFunction> global_estimator;  // chained pseudo-inverse construction
  double beta = 0.0;  // sup norm of the global estimator
  double c_g = 1.0;   // max(1, 2 k beta)

  static GameGeometry compute(const Game& game);
};

struct ExplorationSolution {
  ExplorationSolution(SimplexVector p_in, EstimationFunction g_in, double value_in = 0.0)
      : p(std::move(p_in)), G(std::move(g_in)), value(value_in) {}
  SimplexVector p;
  EstimationFunction G;
  double value = 0.0;  // objective of the returned candidate under the true psi
  WitnessSource witness_source = WitnessSource::Solver;
  bool solver_converged = false;
  bool fallback_warning = false;  // solver failed; analytic witness returned
  double solver_value = std::numeric_limits<double>::quiet_NaN();       // program optimum
  double solver_objective = std::numeric_limits<double>::quiet_NaN();   // true-psi objective at it
  FeasibilityReport feasibility;
};

// Psi_q(z) = <q, exp(-z) + z - 1>; coordinates with q_j = 0 contribute 0.
double psi(const SimplexVector& q, const Eigen::VectorXd& z);

// <q, L e_x - sum_a G(a,Phi_ax)> + max_{c in Pareto} (sum_a G(a,Phi_ax)_c - L_cx).
double bias(const SimplexVector& q, const EstimationFunction& G, int outcome,
            const std::vector<int>& pareto, const Game& game);

// Value of the exact per-round objective at (p, G).  Returns +infinity when
// some p_a = 0 with G(a,.) nonzero.
double objective_exact(const SimplexVector& q, double eta, const SimplexVector& p,
                       const EstimationFunction& G, const Game& game,
                       const std::vector<int>& pareto);

// Solves the per-round exploration program at proposal q and learning rate
// eta, compares the optimizer's point against every applicable analytic
// witness (self-revealing, full-information, global mixing, water transfer)
// and returns the candidate with the smallest true-psi objective.
ExplorationSolution solve_exploration(const SimplexVector& q, double eta, const Game& game,
                                      const GameGeometry& geometry,
                                      const SolverSettings& settings = {});

struct HpBisectionPoint {
  double lambda = 0.0;
  double value = 0.0;  // lambda + stability objective; +inf when infeasible
  bool feasible = false;
};

struct HpSolution {
  HpSolution(SimplexVector p_in, EstimationFunction g_in, double lambda_in = 0.0)
      : p(std::move(p_in)), G(std::move(g_in)), lambda(lambda_in) {}
  SimplexVector p;
  EstimationFunction G;
  double lambda = 0.0;
  double value = 0.0;  // lambda + stability objective at the returned point
  WitnessSource witness_source = WitnessSource::Solver;
  FeasibilityReport feasibility;
  std::vector<HpBisectionPoint> trace;
};

// High-probability program: bisection on lambda over the fixed-lambda convex
// program, warm-started and cross-checked against the analytic witnesses.
HpSolution solve_hp(const SimplexVector& q, double eta, const Game& game,
                    const GameGeometry& geometry, const SolverSettings& settings = {},
                    std::optional<double> lambda_hint = std::nullopt);

// Feasible high-probability point built from (p, G, phi) satisfying the
// helper conditions: range bound, per-outcome second-moment bound by phi,
// and eta^2 phi <= 1/2.  Shifts G by -3 eta p_a phi and certifies the moment
// constraint.  Throws Error when a condition fails.
HpSolution hp_analytic_witness(const SimplexVector& q, double eta, const SimplexVector& p,
                               const EstimationFunction& G, const Eigen::VectorXd& phi,
                               const Game& game);

// c(sigma) = log(<q, exp(-eta sigma)>) / eta for a loss column sigma.
double hedge_shift_constant(const SimplexVector& q, double eta, const Eigen::VectorXd& sigma_column);

}  // namespace pm

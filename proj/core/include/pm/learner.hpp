#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pm/game.hpp"
#include "pm/optimizer.hpp"

namespace pm {

// Softmax of -eta * cumulative restricted to the support set, computed with
// max-subtraction; exact zeros elsewhere.
SimplexVector exp_weights_distribution(const Eigen::VectorXd& cumulative, double eta,
                                       const std::vector<int>& support);

// Diagnostics recorded once per completed round.
struct StepRecord {
  Eigen::VectorXd Q;     // exponential-weights proposal
  Eigen::VectorXd P;     // sampling distribution
  Eigen::VectorXd yhat;  // importance-weighted loss estimate
  double eta = 0.0;
  double V = 0.0;        // max(0, program value); 0 for baselines
  double lambda = 0.0;   // hp mode only
  WitnessSource source = WitnessSource::Solver;
};

// Incremental policy: propose() yields P_t, the harness samples an action,
// update() feeds back (A_t, sigma_t).  Instances are single-episode state
// machines; all shared inputs stay immutable.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual SimplexVector propose() = 0;
  virtual void update(int action, int signal_id) = 0;
  virtual std::string name() const = 0;
  virtual const std::vector<StepRecord>& history() const = 0;
};

// Algorithm with a fixed learning rate: exponential weights over the Pareto
// actions with the per-round exploration solve.
std::unique_ptr<Policy> make_fixed_policy(const Game& game, const GameGeometry& geometry,
                                          double eta, SolverSettings settings = {});

// Adaptive learning rate eta_t = min(1/B, sqrt(log k / (1 + sum V_s))).
// When B is not given it defaults to 2mk^2 for locally observable games and
// to c_G^2 for globally observable ones.
std::unique_ptr<Policy> make_adaptive_policy(const Game& game, const GameGeometry& geometry,
                                             std::optional<double> B = std::nullopt,
                                             SolverSettings settings = {});
double default_adaptive_B(const Game& game, const GameGeometry& geometry);

// High-probability variant; delta is recorded in the run metadata only.
std::unique_ptr<Policy> make_hp_policy(const Game& game, const GameGeometry& geometry, double eta,
                                       double delta, SolverSettings settings = {});

// Baselines for the experiment figures.
std::unique_ptr<Policy> make_hedge_policy(const Game& game, double eta);
std::unique_ptr<Policy> make_exp3_policy(const Game& game, double eta, double gamma);

}  // namespace pm

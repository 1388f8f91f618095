#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pm/errors.hpp"

namespace pm {

// Which simplex a probability vector lives on.
enum class Side { Actions, Outcomes };

// Probability vector with a dimension tag.  Entries are validated at
// construction (non-negative, sum within 1e-12 of one) and renormalized
// exactly once there; nothing downstream renormalizes silently.
class SimplexVector {
 public:
  SimplexVector(Eigen::VectorXd entries, Side side);

  // Loud renormalization for solver output whose sum may be off by more
  // than the construction tolerance.  Tiny negative entries (> -1e-9)
  // are clamped to zero.
  static SimplexVector renormalized(Eigen::VectorXd entries, Side side);

  static SimplexVector uniform(int n, Side side);
  static SimplexVector unit(int n, int index, Side side);

  const Eigen::VectorXd& entries() const { return v_; }
  double operator[](int i) const { return v_(i); }
  int size() const { return static_cast<int>(v_.size()); }
  Side side() const { return side_; }

 private:
  SimplexVector() = default;
  Eigen::VectorXd v_;
  Side side_;
};

// Finite partial monitoring game.  Immutable after construction; safe to
// share across threads.
struct Game {
  std::string name;
  Eigen::MatrixXd losses;   // k x d, entries in [0,1] after scaling
  Eigen::MatrixXi signals;  // k x d, ids interned into `alphabet`
  std::vector<std::string> alphabet;  // id -> original label
  double scale = 1.0;  // original losses = scale * losses
  int k = 0;
  int d = 0;
  int m = 0;  // max over actions of distinct signals in that action's row

  // Distinct signal ids per action, ascending.
  std::vector<std::vector<int>> action_signals;

  int signal_id(int action, int outcome) const { return signals(action, outcome); }
  const std::string& signal_label(int id) const { return alphabet.at(id); }
  double loss(int action, int outcome) const { return losses(action, outcome); }
};

// Validates shapes and ranges, interns signal labels in order of first
// appearance (row-major scan), computes m.
Game validate_game(const Eigen::MatrixXd& losses,
                   const std::vector<std::vector<std::string>>& signal_labels,
                   std::string name = "", double scale = 1.0);
Game validate_game(const Eigen::MatrixXd& losses, const Eigen::MatrixXi& signal_ids,
                   std::string name = "", double scale = 1.0);

// Bandit reduction: the signal reveals exactly the incurred loss.
Game make_bandit(const Eigen::MatrixXd& losses, std::string name = "bandit");

// Full-information reduction: one signal id per distinct loss column.
Game make_full_info(const Eigen::MatrixXd& losses, std::string name = "full-info");

// L = [[0,1],[1,0],[c,c]] with actions 1,2 blind and action 3 revealing.
// For c > 1 all losses are divided by c and the factor recorded in `scale`.
Game make_costly_matching_pennies(double c);

// p^T L nu.
double expected_loss(const SimplexVector& p, const Game& game, const SimplexVector& nu);

// Returns true when, for every action, the signal determines that action's
// own loss (the bandit-style estimator G(a,sigma) = e_a * loss applies).
bool is_self_revealing(const Game& game);
// Returns true when any action's signal determines the entire loss column.
bool is_full_information(const Game& game);
// Loss of `action` implied by observing `signal_id` (self-revealing games).
double loss_for_signal(const Game& game, int action, int signal_id);
// Loss column implied by observing `signal_id` at `action` (full-info games).
Eigen::VectorXd column_for_signal(const Game& game, int action, int signal_id);

Game load_game(const std::string& path);
void save_game(const Game& game, const std::string& path);

// Parses "builtin:cmp:<c>" or falls back to load_game(path).
Game load_game_spec(const std::string& spec);

}  // namespace pm

#pragma once

#include <Eigen/Dense>
#include <tuple>
#include <utility>
#include <vector>

#include "pm/game.hpp"

namespace pm {

inline constexpr double kDimTol = 1e-7;  // rank threshold for affine-hull dimension
inline constexpr double kObsTol = 1e-8;  // residual threshold for observability systems

// Feasible region { nu : A nu <= b } over the outcome simplex.  The rows
// include the simplex constraints (nu >= 0 and both directions of sum = 1).
struct Polytope {
  int ambient_dim = 0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

Polytope simplex_polytope(int d);
Polytope cell(const Game& game, int action);
Polytope intersect(const Polytope& p, const Polytope& q);
bool contains(const Polytope& p, const Eigen::VectorXd& nu, double tol = 1e-9);

struct DimensionDiagnostics {
  bool marginal = false;       // some tested spread within a factor 10 of kDimTol
  double closest_spread = -1;  // the spread nearest the threshold (log scale)
};

// Dimension of the affine hull of the feasible set, -1 when empty.
// Finds a feasible point by LP, then grows an orthonormal set of feasible
// directions by maximizing/minimizing objectives orthogonal to the ones
// already found; a direction counts when the optimal spread exceeds kDimTol.
int polytope_dimension(const Polytope& poly, DimensionDiagnostics* diag = nullptr);

struct ActionClassification {
  std::vector<int> pareto;      // dim(C_a) = d-1
  std::vector<int> degenerate;  // nonempty, dim <= d-2
  std::vector<int> dominated;   // empty cell
  std::vector<std::pair<int, int>> duplicates;
  std::vector<int> cell_dimension;  // per action
  bool marginal = false;
};
ActionClassification classify_actions(const Game& game);

struct NeighbourGraph {
  std::vector<std::pair<int, int>> edges;    // unordered pairs (a < b) of Pareto actions
  std::vector<std::vector<int>> adjacency;   // per action
  bool marginal = false;
};
NeighbourGraph neighbour_graph(const Game& game, const ActionClassification& cls);

// Minimum-norm solution of the loss-difference system for one edge,
// restricted to `support` actions.  Feasible iff the residual is below
// kObsTol.
struct EdgeWitness {
  std::pair<int, int> edge;
  bool feasible = false;
  double residual = 0.0;
  double sup_norm = 0.0;
  std::vector<std::tuple<int, int, double>> entries;  // (action, signal id, value)
};

// Minimum-norm least-squares solve of the loss-difference system for one
// edge over the signals of the `support` actions.
EdgeWitness edge_witness(const Game& game, std::pair<int, int> edge,
                         const std::vector<int>& support);

struct ObservabilityReport {
  bool observable = true;  // all edges feasible (vacuously true with no edges)
  std::vector<EdgeWitness> witnesses;
};

ObservabilityReport check_local_observability(const Game& game, const NeighbourGraph& graph);
ObservabilityReport check_global_observability(const Game& game, const NeighbourGraph& graph);

enum class GameCategory { Trivial, Easy, Hard, Hopeless };
const char* to_string(GameCategory c);

struct GameClassification {
  GameCategory category = GameCategory::Hopeless;
  bool locally_observable = false;
  bool globally_observable = false;
  bool degenerate = false;
  bool has_duplicates = false;
  bool numerically_marginal = false;
  ActionClassification actions;
  NeighbourGraph graph;
  ObservabilityReport local;
  ObservabilityReport global;
};

GameClassification classify_game(const Game& game);

}  // namespace pm

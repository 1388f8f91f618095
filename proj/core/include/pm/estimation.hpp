#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "pm/game.hpp"
#include "pm/geometry.hpp"

namespace pm {

// Loss-difference estimator for one edge (a,b): sum_c w(c, Phi_cx) equals
// L_ax - L_bx for every outcome x.
struct EdgeEstimator {
  std::pair<int, int> edge;
  Eigen::MatrixXd w;  // k x |alphabet|, zero outside the support actions
  std::vector<int> support;
  double sup_norm = 0.0;
  double residual = 0.0;

  double value(int action, int signal_id) const { return w(action, signal_id); }
};

// Pairwise estimator supported on the edge's own two actions, rebalanced
// per connected component of the bipartite signal graph so that
// sup_norm <= m/2.  Throws NotObservable when the edge has no local witness.
EdgeEstimator local_edge_estimator(const Game& game, std::pair<int, int> edge);

// Estimator over all k actions from the pseudo-inverse of the stacked
// signal-indicator matrix; sup_norm <= sqrt(d) * k^(d/2).
EdgeEstimator global_edge_estimator(const Game& game, std::pair<int, int> edge);

// Directed tree where every vertex has a path to the root.
class InTree {
 public:
  // `parent` maps every non-root vertex to its parent; the single vertex
  // missing from the map is the root.
  InTree(std::vector<int> vertices, std::map<int, int> parent);

  int root() const { return root_; }
  const std::vector<int>& vertices() const { return vertices_; }
  bool has_vertex(int a) const { return depth_.count(a) > 0; }
  // -1 for the root.
  int parent(int a) const;
  int depth(int a) const;  // depth(root) = 1
  // Edges (child, parent) from `a` up to the root; empty for the root.
  std::vector<std::pair<int, int>> path(int a) const;
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

 private:
  std::vector<int> vertices_;
  std::map<int, int> parent_;
  std::map<int, int> depth_;
  std::vector<std::pair<int, int>> edges_;
  int root_ = -1;
};

// Estimation function G : (action, signal) -> R^k with sup norm beta.
struct EstimationFunction {
  int k = 0;
  int alphabet_size = 0;
  std::vector<Eigen::MatrixXd> table;  // per action: |alphabet| x k
  double sup_norm = 0.0;
  bool unbiased = false;

  static EstimationFunction zero(const Game& game);
  Eigen::VectorXd value(int action, int signal_id) const { return table[action].row(signal_id); }
  // sum_a G(a, Phi_ax), the estimate of the loss column at outcome x.
  Eigen::VectorXd column_sum(const Game& game, int outcome) const;
};

// Chains edge estimators along tree paths: G(a,sigma)_b sums w_e over the
// path from b to the root.  Estimators are keyed by unordered edge and are
// negated when traversed against their orientation.
EstimationFunction chain_estimator(const Game& game, const InTree& tree,
                                   const std::map<std::pair<int, int>, EdgeEstimator>& estimators,
                                   const std::vector<int>& pareto);

// In-tree over the Pareto actions with parent(a) the neighbour of least
// expected loss under nu; rooted at the nu-optimal Pareto action.  Boundary
// nu are perturbed by 1e-9 toward uniform.  The returned tree makes
// L nu non-increasing along every edge (checked within 1e-10).
InTree greedy_in_tree(const Game& game, const std::vector<int>& pareto,
                      const NeighbourGraph& graph, const SimplexVector& nu);

// r_a = sum over descendants b of q_b / depth(b).  Requires q to vanish
// off the tree's vertex set.  The result satisfies r >= q/k entrywise and
// is non-decreasing toward the root.
SimplexVector water_transfer(const SimplexVector& q, const InTree& tree);

struct UnbiasednessReport {
  double max_violation = 0.0;       // direct identity over (b,c,x)
  double max_violation_iw = 0.0;    // importance-weighted form with a positive p
  bool unbiased = false;            // max violation < 1e-8
};

UnbiasednessReport verify_unbiased(const Game& game, const EstimationFunction& G,
                                   const std::vector<int>& pareto,
                                   const std::optional<SimplexVector>& p = std::nullopt);

}  // namespace pm

#include "pm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pm {

namespace {

constexpr double kTreeTol = 1e-10;
constexpr double kPerturb = 1e-9;

}  // namespace

EdgeEstimator local_edge_estimator(const Game& game, std::pair<int, int> edge) {
  const auto [a, b] = edge;
  EdgeWitness wit = edge_witness(game, edge, {a, b});
  if (!wit.feasible)
    throw NotObservable("edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                        ") is not locally observable (residual " + std::to_string(wit.residual) + ")");

  // Values on the bipartite vertex sets: side a and side b, keyed by signal.
  std::map<int, double> fa, fb;
  for (const auto& [action, sid, v] : wit.entries) (action == a ? fa : fb)[sid] = v;

  // Connected components of the bipartite graph whose edges are the
  // outcomes x joining (a, Phi_ax) to (b, Phi_bx).
  std::map<int, int> comp_a, comp_b;
  int ncomp = 0;
  for (const auto& [sid, v] : fa) comp_a[sid] = ncomp++;
  for (const auto& [sid, v] : fb) comp_b[sid] = ncomp++;
  // Union-find over the small component index space.
  std::vector<int> uf(ncomp);
  for (int i = 0; i < ncomp; ++i) uf[i] = i;
  auto find = [&](int i) {
    while (uf[i] != i) i = uf[i] = uf[uf[i]];
    return i;
  };
  for (int x = 0; x < game.d; ++x) {
    const int ia = comp_a[game.signals(a, x)];
    const int ib = comp_b[game.signals(b, x)];
    uf[find(ia)] = find(ib);
  }

  // One scalar offset per component: g = f - t on side a, g = f + t on
  // side b keeps all edge sums intact.  Try the argmin-anchored offset
  // from the bipartite rebalancing lemma and the sup-norm-optimal offset,
  // keep whichever lands smaller.
  std::set<int> roots;
  for (int i = 0; i < ncomp; ++i) roots.insert(find(i));
  std::map<int, double> offset;
  for (int root : roots) {
    std::vector<double> va, vb;
    for (const auto& [sid, v] : fa)
      if (find(comp_a[sid]) == root) va.push_back(v);
    for (const auto& [sid, v] : fb)
      if (find(comp_b[sid]) == root) vb.push_back(v);
    auto sup_at = [&](double t) {
      double s = 0.0;
      for (double v : va) s = std::max(s, std::abs(v - t));
      for (double v : vb) s = std::max(s, std::abs(v + t));
      return s;
    };
    // sup_at is a max of four linear pieces in t; its minimizer sits at an
    // intersection of a decreasing piece with an increasing one.
    std::vector<double> candidates{0.0};
    if (!va.empty() && !vb.empty()) {
      const double alo = *std::min_element(va.begin(), va.end());
      const double ahi = *std::max_element(va.begin(), va.end());
      const double blo = *std::min_element(vb.begin(), vb.end());
      const double bhi = *std::max_element(vb.begin(), vb.end());
      candidates = {(ahi + alo) / 2, (ahi - bhi) / 2, (alo - blo) / 2, -(blo + bhi) / 2,
                    alo + game.m / 2.0 - 1.0};  // last: the lemma's anchored choice
    } else if (!va.empty()) {
      const double alo = *std::min_element(va.begin(), va.end());
      const double ahi = *std::max_element(va.begin(), va.end());
      candidates = {(ahi + alo) / 2};
    } else if (!vb.empty()) {
      const double blo = *std::min_element(vb.begin(), vb.end());
      const double bhi = *std::max_element(vb.begin(), vb.end());
      candidates = {-(blo + bhi) / 2};
    }
    double best_t = candidates[0];
    for (double t : candidates)
      if (sup_at(t) < sup_at(best_t)) best_t = t;
    offset[root] = best_t;
  }

  EdgeEstimator est;
  est.edge = edge;
  est.w = Eigen::MatrixXd::Zero(game.k, static_cast<int>(game.alphabet.size()));
  for (const auto& [sid, v] : fa) est.w(a, sid) = v - offset[find(comp_a[sid])];
  for (const auto& [sid, v] : fb) est.w(b, sid) = v + offset[find(comp_b[sid])];
  est.support = {a, b};
  est.sup_norm = est.w.cwiseAbs().maxCoeff();
  // Recheck the defining identity on the rebalanced table.
  double resid = 0.0;
  for (int x = 0; x < game.d; ++x) {
    const double lhs = est.w(a, game.signals(a, x)) + est.w(b, game.signals(b, x));
    resid = std::max(resid, std::abs(lhs - (game.losses(a, x) - game.losses(b, x))));
  }
  est.residual = resid;
  if (est.residual > kObsTol)
    throw Error("rebalanced local estimator lost feasibility");
  if (est.sup_norm > game.m / 2.0 + 1e-9)
    throw Error("local estimator sup-norm " + std::to_string(est.sup_norm) +
                " exceeds m/2; game is degenerate along this edge");
  return est;
}

EdgeEstimator global_edge_estimator(const Game& game, std::pair<int, int> edge) {
  std::vector<int> all(game.k);
  for (int c = 0; c < game.k; ++c) all[c] = c;
  EdgeWitness wit = edge_witness(game, edge, all);
  if (!wit.feasible)
    throw NotObservable("edge (" + std::to_string(edge.first + 1) + "," +
                        std::to_string(edge.second + 1) + ") is not globally observable (residual " +
                        std::to_string(wit.residual) + ")");
  EdgeEstimator est;
  est.edge = edge;
  est.w = Eigen::MatrixXd::Zero(game.k, static_cast<int>(game.alphabet.size()));
  for (const auto& [action, sid, v] : wit.entries) {
    est.w(action, sid) = v;
    if (v != 0.0 && std::find(est.support.begin(), est.support.end(), action) == est.support.end())
      est.support.push_back(action);
  }
  est.sup_norm = wit.sup_norm;
  est.residual = wit.residual;
  const double bound = std::sqrt(double(game.d)) * std::pow(double(game.k), game.d / 2.0);
  if (est.sup_norm > bound + 1e-6)
    throw Error("global estimator sup-norm exceeds sqrt(d) k^(d/2)");
  return est;
}

InTree::InTree(std::vector<int> vertices, std::map<int, int> parent)
    : vertices_(std::move(vertices)), parent_(std::move(parent)) {
  if (vertices_.empty()) throw Error("in-tree needs at least one vertex");
  std::set<int> vset(vertices_.begin(), vertices_.end());
  if (vset.size() != vertices_.size()) throw Error("in-tree vertex list has duplicates");
  for (const auto& [child, par] : parent_) {
    if (!vset.count(child) || !vset.count(par))
      throw Error("in-tree parent map mentions a vertex outside the vertex set");
  }
  for (int v : vertices_)
    if (!parent_.count(v)) {
      if (root_ >= 0) throw Error("in-tree has more than one root");
      root_ = v;
    }
  if (root_ < 0) throw Error("in-tree has no root (cycle in parent map)");
  // Depths via walk-up; also detects cycles and unreachable vertices.
  for (int v : vertices_) {
    int cur = v;
    int steps = 0;
    while (cur != root_) {
      auto it = parent_.find(cur);
      if (it == parent_.end() || ++steps > static_cast<int>(vertices_.size()))
        throw Error("in-tree vertex " + std::to_string(v + 1) + " does not reach the root");
      cur = it->second;
    }
    depth_[v] = steps + 1;
  }
  for (const auto& [child, par] : parent_) edges_.emplace_back(child, par);
}

int InTree::parent(int a) const {
  auto it = parent_.find(a);
  return it == parent_.end() ? -1 : it->second;
}

int InTree::depth(int a) const {
  auto it = depth_.find(a);
  if (it == depth_.end()) throw Error("vertex not in tree");
  return it->second;
}

std::vector<std::pair<int, int>> InTree::path(int a) const {
  std::vector<std::pair<int, int>> out;
  int cur = a;
  while (cur != root_) {
    const int par = parent_.at(cur);
    out.emplace_back(cur, par);
    cur = par;
  }
  return out;
}

EstimationFunction EstimationFunction::zero(const Game& game) {
  EstimationFunction g;
  g.k = game.k;
  g.alphabet_size = static_cast<int>(game.alphabet.size());
  g.table.assign(game.k, Eigen::MatrixXd::Zero(g.alphabet_size, game.k));
  return g;
}

Eigen::VectorXd EstimationFunction::column_sum(const Game& game, int outcome) const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
  for (int a = 0; a < k; ++a) s += table[a].row(game.signals(a, outcome));
  return s;
}

EstimationFunction chain_estimator(const Game& game, const InTree& tree,
                                   const std::map<std::pair<int, int>, EdgeEstimator>& estimators,
                                   const std::vector<int>& pareto) {
  EstimationFunction g = EstimationFunction::zero(game);
  for (int b : tree.vertices()) {
    for (const auto& [u, v] : tree.path(b)) {
      const auto key = std::minmax(u, v);
      auto it = estimators.find({key.first, key.second});
      if (it == estimators.end())
        throw Error("tree edge (" + std::to_string(u + 1) + "," + std::to_string(v + 1) +
                    ") has no estimator");
      const EdgeEstimator& est = it->second;
      // est.w estimates L_first - L_second; the path needs L_u - L_v.
      const double sign = (est.edge.first == u) ? 1.0 : -1.0;
      for (int c = 0; c < game.k; ++c)
        for (int sid : game.action_signals[c]) g.table[c](sid, b) += sign * est.w(c, sid);
    }
  }
  for (int c = 0; c < game.k; ++c)
    g.sup_norm = std::max(g.sup_norm, g.table[c].cwiseAbs().maxCoeff());
  g.unbiased = verify_unbiased(game, g, pareto).unbiased;
  return g;
}

InTree greedy_in_tree(const Game& game, const std::vector<int>& pareto,
                      const NeighbourGraph& graph, const SimplexVector& nu) {
  if (nu.side() != Side::Outcomes || nu.size() != game.d)
    throw DimensionMismatch("greedy_in_tree expects an outcome distribution");
  if (pareto.empty()) throw Error("greedy_in_tree needs a non-empty Pareto set");
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(game.d, 1.0 / game.d);
  const Eigen::VectorXd nu_pert = (1.0 - kPerturb) * nu.entries() + kPerturb * uniform;
  const Eigen::VectorXd losses = game.losses * nu_pert;

  int root = pareto[0];
  for (int a : pareto)
    if (losses(a) < losses(root)) root = a;

  std::map<int, int> parent;
  for (int a : pareto) {
    if (a == root) continue;
    int best = -1;
    for (int b : graph.adjacency[a])
      if (best < 0 || losses(b) < losses(best)) best = b;
    if (best < 0)
      throw Error("neighbourhood graph is disconnected: action " + std::to_string(a + 1) +
                  " has no neighbour");
    parent[a] = best;
  }
  InTree tree(pareto, std::move(parent));

  const Eigen::VectorXd true_losses = game.losses * nu.entries();
  for (const auto& [child, par] : tree.edges()) {
    if (true_losses(child) < true_losses(par) - kTreeTol)
      throw Error("greedy tree is not decreasing along edge (" + std::to_string(child + 1) + "," +
                  std::to_string(par + 1) + ")");
  }
  return tree;
}

SimplexVector water_transfer(const SimplexVector& q, const InTree& tree) {
  if (q.side() != Side::Actions) throw DimensionMismatch("water_transfer expects an action distribution");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(q.size());
  for (int a = 0; a < q.size(); ++a) {
    if (!tree.has_vertex(a)) {
      if (q[a] != 0.0)
        throw Error("water_transfer: action " + std::to_string(a + 1) +
                    " carries mass but is not a tree vertex");
      continue;
    }
    if (q[a] == 0.0) continue;
    const double share = q[a] / tree.depth(a);
    int cur = a;
    r(cur) += share;
    while (cur != tree.root()) {
      cur = tree.parent(cur);
      r(cur) += share;
    }
  }
  return SimplexVector(std::move(r), Side::Actions);
}

UnbiasednessReport verify_unbiased(const Game& game, const EstimationFunction& G,
                                   const std::vector<int>& pareto,
                                   const std::optional<SimplexVector>& p) {
  UnbiasednessReport rep;
  const Eigen::VectorXd pv =
      p ? p->entries() : Eigen::VectorXd::Constant(game.k, 1.0 / game.k);
  if (pv.size() != game.k || pv.minCoeff() <= 0.0)
    throw Error("verify_unbiased needs a strictly positive p over all actions");
  for (int x = 0; x < game.d; ++x) {
    const Eigen::VectorXd direct = G.column_sum(game, x);
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(game.k);
    for (int a = 0; a < game.k; ++a)
      weighted += pv(a) * (G.value(a, game.signals(a, x)) / pv(a));
    for (int b : pareto)
      for (int c : pareto) {
        const double want = game.losses(b, x) - game.losses(c, x);
        rep.max_violation = std::max(rep.max_violation, std::abs(direct(b) - direct(c) - want));
        rep.max_violation_iw =
            std::max(rep.max_violation_iw, std::abs(weighted(b) - weighted(c) - want));
      }
  }
  rep.unbiased = rep.max_violation < kObsTol;
  return rep;
}

}  // namespace pm

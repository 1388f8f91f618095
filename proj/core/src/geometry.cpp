#include "pm/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pm/linprog.hpp"

namespace pm {

namespace {

constexpr double kDuplicateTol = 1e-12;

void note_spread(DimensionDiagnostics* diag, double spread) {
  if (!diag) return;
  if (spread > kDimTol / 10 && spread < kDimTol * 10) diag->marginal = true;
  if (diag->closest_spread < 0 ||
      std::abs(std::log10(std::max(spread, 1e-300) / kDimTol)) <
          std::abs(std::log10(std::max(diag->closest_spread, 1e-300) / kDimTol)))
    diag->closest_spread = spread;
}

// Orthonormal basis of the complement of span(dirs) in R^d.
std::vector<Eigen::VectorXd> complement_basis(int d, const std::vector<Eigen::VectorXd>& dirs) {
  std::vector<Eigen::VectorXd> out;
  std::vector<Eigen::VectorXd> all = dirs;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(d, i);
    for (const auto& u : all) v -= u.dot(v) * u;
    const double n = v.norm();
    if (n > 1e-10) {
      v /= n;
      all.push_back(v);
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace

Polytope simplex_polytope(int d) {
  Polytope p;
  p.ambient_dim = d;
  p.A = Eigen::MatrixXd::Zero(d + 2, d);
  p.b = Eigen::VectorXd::Zero(d + 2);
  for (int i = 0; i < d; ++i) p.A(i, i) = -1.0;  // nu_i >= 0
  p.A.row(d).setOnes();
  p.b(d) = 1.0;  // sum <= 1
  p.A.row(d + 1).setConstant(-1.0);
  p.b(d + 1) = -1.0;  // sum >= 1
  return p;
}

Polytope cell(const Game& game, int action) {
  Polytope p = simplex_polytope(game.d);
  const int extra = game.k - 1;
  const int base = static_cast<int>(p.A.rows());
  p.A.conservativeResize(base + extra, game.d);
  p.b.conservativeResize(base + extra);
  int r = base;
  for (int b = 0; b < game.k; ++b) {
    if (b == action) continue;
    p.A.row(r) = game.losses.row(action) - game.losses.row(b);
    p.b(r) = 0.0;
    ++r;
  }
  return p;
}

Polytope intersect(const Polytope& p, const Polytope& q) {
  if (p.ambient_dim != q.ambient_dim) throw DimensionMismatch("polytope intersection dimension mismatch");
  Polytope out;
  out.ambient_dim = p.ambient_dim;
  out.A.resize(p.A.rows() + q.A.rows(), p.ambient_dim);
  out.A << p.A, q.A;
  out.b.resize(p.b.size() + q.b.size());
  out.b << p.b, q.b;
  return out;
}

bool contains(const Polytope& p, const Eigen::VectorXd& nu, double tol) {
  if (nu.size() != p.ambient_dim) throw DimensionMismatch("contains: point dimension mismatch");
  return ((p.A * nu - p.b).array() <= tol).all();
}

int polytope_dimension(const Polytope& poly, DimensionDiagnostics* diag) {
  const int d = poly.ambient_dim;
  {
    lp::LpResult feas = lp::maximize(Eigen::VectorXd::Zero(d), poly.A, poly.b);
    if (feas.status == lp::LpStatus::Infeasible) return -1;
    if (feas.status != lp::LpStatus::Optimal) throw LpFailure("feasibility LP did not solve");
  }
  std::vector<Eigen::VectorXd> dirs;
  bool progress = true;
  while (progress && static_cast<int>(dirs.size()) < d) {
    progress = false;
    for (const Eigen::VectorXd& c : complement_basis(d, dirs)) {
      lp::LpResult hi = lp::maximize(c, poly.A, poly.b);
      lp::LpResult lo = lp::maximize(-c, poly.A, poly.b);
      if (hi.status != lp::LpStatus::Optimal || lo.status != lp::LpStatus::Optimal)
        throw LpFailure("spread LP did not solve");
      const double spread = hi.value + lo.value;  // max c.x - min c.x
      note_spread(diag, spread);
      if (spread > kDimTol) {
        Eigen::VectorXd v = hi.x - lo.x;
        for (const auto& u : dirs) v -= u.dot(v) * u;
        const double n = v.norm();
        if (n > 1e-12) {
          dirs.push_back(v / n);
          progress = true;
          break;
        }
      }
    }
  }
  return static_cast<int>(dirs.size());
}

ActionClassification classify_actions(const Game& game) {
  ActionClassification cls;
  cls.cell_dimension.resize(game.k);
  DimensionDiagnostics diag;
  for (int a = 0; a < game.k; ++a) {
    cls.cell_dimension[a] = polytope_dimension(cell(game, a), &diag);
    if (cls.cell_dimension[a] == game.d - 1)
      cls.pareto.push_back(a);
    else if (cls.cell_dimension[a] >= 0)
      cls.degenerate.push_back(a);
    else
      cls.dominated.push_back(a);
  }
  cls.marginal = diag.marginal;
  for (int a = 0; a < game.k; ++a)
    for (int b = a + 1; b < game.k; ++b)
      if ((game.losses.row(a) - game.losses.row(b)).cwiseAbs().maxCoeff() <= kDuplicateTol)
        cls.duplicates.emplace_back(a, b);
  return cls;
}

NeighbourGraph neighbour_graph(const Game& game, const ActionClassification& cls) {
  NeighbourGraph g;
  g.adjacency.resize(game.k);
  DimensionDiagnostics diag;
  for (size_t i = 0; i < cls.pareto.size(); ++i) {
    for (size_t j = i + 1; j < cls.pareto.size(); ++j) {
      const int a = cls.pareto[i];
      const int b = cls.pareto[j];
      const int dim = polytope_dimension(intersect(cell(game, a), cell(game, b)), &diag);
      if (dim == game.d - 2) {
        g.edges.emplace_back(a, b);
        g.adjacency[a].push_back(b);
        g.adjacency[b].push_back(a);
      }
    }
  }
  g.marginal = diag.marginal;
  return g;
}

EdgeWitness edge_witness(const Game& game, std::pair<int, int> edge,
                         const std::vector<int>& support) {
  std::vector<std::pair<int, int>> unknowns;  // (action, signal id)
  for (int c : support)
    for (int sid : game.action_signals[c]) unknowns.emplace_back(c, sid);
  const int n = static_cast<int>(unknowns.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(game.d, n);
  Eigen::VectorXd y(game.d);
  for (int x = 0; x < game.d; ++x) {
    for (int i = 0; i < n; ++i) {
      const auto& [c, sid] = unknowns[i];
      if (game.signals(c, x) == sid) M(x, i) += 1.0;
    }
    y(x) = game.losses(edge.first, x) - game.losses(edge.second, x);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
  Eigen::VectorXd w = cod.solve(y);
  EdgeWitness out;
  out.edge = edge;
  out.residual = (M * w - y).cwiseAbs().maxCoeff();
  out.feasible = out.residual < kObsTol;
  out.sup_norm = n > 0 ? w.cwiseAbs().maxCoeff() : 0.0;
  for (int i = 0; i < n; ++i)
    out.entries.emplace_back(unknowns[i].first, unknowns[i].second, w(i));
  return out;
}

namespace {

ObservabilityReport check_observability(const Game& game, const NeighbourGraph& graph, bool local) {
  ObservabilityReport report;
  std::vector<int> all(game.k);
  for (int c = 0; c < game.k; ++c) all[c] = c;
  for (const auto& edge : graph.edges) {
    const std::vector<int> support =
        local ? std::vector<int>{edge.first, edge.second} : all;
    EdgeWitness w = edge_witness(game, edge, support);
    report.observable = report.observable && w.feasible;
    report.witnesses.push_back(std::move(w));
  }
  return report;
}

}  // namespace

ObservabilityReport check_local_observability(const Game& game, const NeighbourGraph& graph) {
  return check_observability(game, graph, true);
}

ObservabilityReport check_global_observability(const Game& game, const NeighbourGraph& graph) {
  return check_observability(game, graph, false);
}

const char* to_string(GameCategory c) {
  switch (c) {
    case GameCategory::Trivial: return "trivial";
    case GameCategory::Easy: return "easy";
    case GameCategory::Hard: return "hard";
    case GameCategory::Hopeless: return "hopeless";
  }
  return "?";
}

GameClassification classify_game(const Game& game) {
  GameClassification out;
  out.actions = classify_actions(game);
  out.graph = neighbour_graph(game, out.actions);
  out.local = check_local_observability(game, out.graph);
  out.global = check_global_observability(game, out.graph);
  out.locally_observable = out.local.observable;
  out.globally_observable = out.global.observable;
  out.degenerate = !out.actions.degenerate.empty();
  out.has_duplicates = !out.actions.duplicates.empty();
  out.numerically_marginal = out.actions.marginal || out.graph.marginal;

  bool trivial = false;
  for (int a = 0; a < game.k && !trivial; ++a) {
    bool dominates = true;
    for (int x = 0; x < game.d && dominates; ++x)
      dominates = game.losses(a, x) <= game.losses.col(x).minCoeff() + kDuplicateTol;
    trivial = dominates;
  }
  if (trivial)
    out.category = GameCategory::Trivial;
  else if (out.locally_observable)
    out.category = GameCategory::Easy;
  else if (out.globally_observable)
    out.category = GameCategory::Hard;
  else
    out.category = GameCategory::Hopeless;
  return out;
}

}  // namespace pm

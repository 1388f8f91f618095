#include "pm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSupportTol = 1e-12;

// Realizable (action, signal) pairs and their variable indexing.
struct PairIndex {
  std::vector<std::pair<int, int>> pairs;
  std::map<std::pair<int, int>, int> index;

  static PairIndex build(const Game& game) {
    PairIndex pi;
    for (int a = 0; a < game.k; ++a)
      for (int sid : game.action_signals[a]) {
        pi.index[{a, sid}] = static_cast<int>(pi.pairs.size());
        pi.pairs.emplace_back(a, sid);
      }
    return pi;
  }
  int at(int a, int sid) const { return index.at({a, sid}); }
  int size() const { return static_cast<int>(pairs.size()); }
};

std::vector<int> support_of(const SimplexVector& q) {
  std::vector<int> s;
  for (int j = 0; j < q.size(); ++j)
    if (q[j] > 0.0) s.push_back(j);
  return s;
}

void check_proposal(const SimplexVector& q, const Game& game, const std::vector<int>& pareto) {
  if (q.side() != Side::Actions || q.size() != game.k)
    throw DimensionMismatch("proposal q must be a distribution over the game's actions");
  for (int a = 0; a < game.k; ++a) {
    if (q[a] > kSupportTol && std::find(pareto.begin(), pareto.end(), a) == pareto.end())
      throw Error("proposal q puts mass " + std::to_string(q[a]) + " on non-Pareto action " +
                  std::to_string(a + 1));
  }
}

EstimationFunction self_revealing_estimator(const Game& game) {
  EstimationFunction g = EstimationFunction::zero(game);
  for (int a = 0; a < game.k; ++a)
    for (int sid : game.action_signals[a]) g.table[a](sid, a) = loss_for_signal(game, a, sid);
  g.sup_norm = 1.0;
  g.unbiased = true;
  return g;
}

EstimationFunction full_info_estimator(const Game& game, const Eigen::VectorXd& weights) {
  EstimationFunction g = EstimationFunction::zero(game);
  double norm = 0.0;
  for (int a = 0; a < game.k; ++a)
    for (int sid : game.action_signals[a]) {
      const Eigen::VectorXd col = weights(a) * column_for_signal(game, a, sid);
      g.table[a].row(sid) = col.transpose();
      norm = std::max(norm, col.cwiseAbs().maxCoeff());
    }
  g.sup_norm = norm;
  g.unbiased = true;
  return g;
}

}  // namespace

const char* to_string(WitnessSource w) {
  switch (w) {
    case WitnessSource::Solver: return "solver";
    case WitnessSource::AnalyticBandit: return "analytic-bandit";
    case WitnessSource::AnalyticFullInfo: return "analytic-fullinfo";
    case WitnessSource::AnalyticGlobal: return "analytic-global";
    case WitnessSource::AnalyticWater: return "analytic-water";
  }
  return "?";
}

double psi(const SimplexVector& q, const Eigen::VectorXd& z) {
  if (q.size() != z.size()) throw DimensionMismatch("psi: dimension mismatch");
  double out = 0.0;
  for (int j = 0; j < q.size(); ++j) {
    if (q[j] == 0.0) continue;
    if (-z(j) > 700.0) return kInf;
    out += q[j] * (std::exp(-z(j)) + z(j) - 1.0);
  }
  return out;
}

double bias(const SimplexVector& q, const EstimationFunction& G, int outcome,
            const std::vector<int>& pareto, const Game& game) {
  const Eigen::VectorXd t = G.column_sum(game, outcome);
  double head = q.entries().dot(game.losses.col(outcome) - t);
  double tail = -kInf;
  for (int c : pareto) tail = std::max(tail, t(c) - game.losses(c, outcome));
  return head + tail;
}

double objective_exact(const SimplexVector& q, double eta, const SimplexVector& p,
                       const EstimationFunction& G, const Game& game,
                       const std::vector<int>& pareto) {
  double value = -kInf;
  for (int x = 0; x < game.d; ++x) {
    const double linear = (p.entries() - q.entries()).dot(game.losses.col(x));
    const double b = bias(q, G, x, pareto, game);
    double stab = 0.0;
    for (int a = 0; a < game.k; ++a) {
      const Eigen::VectorXd ga = G.value(a, game.signals(a, x));
      if (p[a] == 0.0) {
        if (ga.cwiseAbs().maxCoeff() > 0.0) return kInf;
        continue;
      }
      const double term = psi(q, eta * ga / p[a]);
      if (std::isinf(term)) return kInf;
      stab += p[a] * term;
    }
    value = std::max(value, (linear + b) / eta + stab / (eta * eta));
  }
  return value;
}

double hedge_shift_constant(const SimplexVector& q, double eta, const Eigen::VectorXd& sigma_column) {
  if (q.size() != sigma_column.size()) throw DimensionMismatch("hedge_shift_constant: dimension mismatch");
  double acc = 0.0;
  for (int j = 0; j < q.size(); ++j) acc += q[j] * std::exp(-eta * sigma_column(j));
  return std::log(acc) / eta;
}

GameGeometry GameGeometry::compute(const Game& game) {
  GameGeometry geo;
  geo.cls = classify_game(game);
  geo.pareto = geo.cls.actions.pareto;
  geo.self_revealing = is_self_revealing(game);
  geo.full_information = is_full_information(game);

  if (geo.cls.locally_observable) {
    geo.local_estimators_ok = true;
    try {
      for (const auto& e : geo.cls.graph.edges)
        geo.local_estimators.emplace(e, local_edge_estimator(game, e));
    } catch (const Error&) {
      geo.local_estimators.clear();
      geo.local_estimators_ok = false;
    }
  }

  if (geo.cls.globally_observable && !geo.pareto.empty()) {
    // BFS spanning in-tree of the neighbourhood graph rooted at the lowest
    // Pareto action, with pseudo-inverse estimators chained along it.
    try {
      const int root = *std::min_element(geo.pareto.begin(), geo.pareto.end());
      std::map<int, int> parent;
      std::vector<int> order{root};
      std::vector<bool> seen(game.k, false);
      seen[root] = true;
      for (size_t i = 0; i < order.size(); ++i) {
        for (int b : geo.cls.graph.adjacency[order[i]]) {
          if (!seen[b]) {
            seen[b] = true;
            parent[b] = order[i];
            order.push_back(b);
          }
        }
      }
      if (order.size() == geo.pareto.size()) {
        InTree tree(geo.pareto, std::move(parent));
        std::map<std::pair<int, int>, EdgeEstimator> ests;
        for (const auto& [child, par] : tree.edges()) {
          const auto key = std::minmax(child, par);
          ests.emplace(std::pair<int, int>(key.first, key.second),
                       global_edge_estimator(game, {key.first, key.second}));
        }
        geo.global_estimator = chain_estimator(game, tree, ests, geo.pareto);
        geo.beta = geo.global_estimator->sup_norm;
        geo.c_g = std::max(1.0, 2.0 * game.k * geo.beta);
      }
    } catch (const Error&) {
      geo.global_estimator.reset();
    }
  }
  return geo;
}

namespace {

// Shared layout of the exploration programs.
struct ProgramVars {
  PairIndex pi;
  std::vector<int> cols;  // G columns kept (union of Pareto and support(q))
  std::map<int, int> col_at;
  int p0 = 0, g0 = 0, z0 = 0, extra0 = 0, u = 0;
  int ncols = 0;
};

ProgramVars layout(const Game& game, const SimplexVector& q, const std::vector<int>& pareto) {
  ProgramVars v;
  v.pi = PairIndex::build(game);
  std::vector<int> cols = pareto;
  for (int j : support_of(q))
    if (std::find(cols.begin(), cols.end(), j) == cols.end()) cols.push_back(j);
  std::sort(cols.begin(), cols.end());
  v.cols = cols;
  for (size_t i = 0; i < cols.size(); ++i) v.col_at[cols[i]] = static_cast<int>(i);
  v.ncols = static_cast<int>(cols.size());
  return v;
}

struct SolverOutcome {
  bool converged = false;
  double program_value = std::numeric_limits<double>::quiet_NaN();
  SimplexVector p = SimplexVector::uniform(1, Side::Actions);
  EstimationFunction G;
  FeasibilityReport feas;
};

// Quadratic-bound path: stability as rotated cones, sign constraints on G,
// and the epsilon floor on p.
SolverOutcome solve_socp_path(const SimplexVector& q, double eta, const Game& game,
                              const std::vector<int>& pareto, double eps,
                              const SolverSettings& settings) {
  const int k = game.k, d = game.d;
  if (eps < 0.0 || eps * k >= 1.0)
    throw Error("epsilon floor " + std::to_string(eps) + " leaves no feasible p");
  ProgramVars v = layout(game, q, pareto);
  const int npairs = v.pi.size();
  conic::Builder b;
  const int pv = b.add_vars(k);
  const int gv = b.add_vars(npairs * v.ncols);
  const int zv = b.add_vars(d);
  const int sv = b.add_vars(npairs);
  const int uv = b.add_vars(1);
  auto G = [&](int pair, int col) { return gv + pair * v.ncols + col; };
  b.objective_term(uv, 1.0);

  {
    conic::Expr sum;
    for (int a = 0; a < k; ++a) sum.add(pv + a, 1.0);
    b.add_eq(sum, 1.0);
  }
  for (int a = 0; a < k; ++a) b.add_nonneg(conic::Expr::variable(pv + a).add_constant(-eps));
  for (int i = 0; i < npairs; ++i) {
    const int a = v.pi.pairs[i].first;
    for (int c = 0; c < v.ncols; ++c)
      b.add_nonneg(conic::Expr::variable(G(i, c)) + conic::Expr::variable(pv + a, 1.0 / eta));
  }
  // Rotated cones s * p_a >= sum_j q_j G_j^2 over the support of q.
  const std::vector<int> jset = support_of(q);
  for (int i = 0; i < npairs; ++i) {
    const int a = v.pi.pairs[i].first;
    std::vector<conic::Expr> z;
    for (int j : jset) z.push_back(conic::Expr::variable(G(i, v.col_at.at(j)), std::sqrt(q[j])));
    b.add_rotated(conic::Expr::variable(sv + i), conic::Expr::variable(pv + a), z);
  }
  // Bias epigraph: z_x >= sum_a G(a,Phi_ax)_c - L_cx for Pareto c.
  for (int x = 0; x < d; ++x) {
    for (int c : pareto) {
      conic::Expr e = conic::Expr::variable(zv + x);
      for (int a = 0; a < k; ++a) e.add(G(v.pi.at(a, game.signals(a, x)), v.col_at.at(c)), -1.0);
      e.add_constant(game.losses(c, x));
      b.add_nonneg(e);
    }
  }
  // Outcome epigraph: u >= (p.L e_x - <q, T_x> + z_x)/eta + sum_a s_(a,Phi_ax).
  for (int x = 0; x < d; ++x) {
    conic::Expr e = conic::Expr::variable(uv);
    for (int a = 0; a < k; ++a) {
      e.add(pv + a, -game.losses(a, x) / eta);
      const int pair = v.pi.at(a, game.signals(a, x));
      for (int j : jset) e.add(G(pair, v.col_at.at(j)), q[j] / eta);
      e.add(sv + pair, -1.0);
    }
    e.add(zv + x, -1.0 / eta);
    b.add_nonneg(e);
  }

  // Interior start.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(b.num_vars());
  Eigen::VectorXd p0 = 0.5 * q.entries() + Eigen::VectorXd::Constant(k, 0.5 / k);
  if (p0.minCoeff() <= eps + 0.5 * (1.0 / k - eps))
    p0 = Eigen::VectorXd::Constant(k, 1.0 / k);
  x0.segment(pv, k) = p0;
  for (int x = 0; x < d; ++x) {
    double zx = -kInf;
    for (int c : pareto) zx = std::max(zx, -game.losses(c, x));
    x0(zv + x) = zx + 1.0;
  }
  x0.segment(sv, npairs).setOnes();
  double u0 = -kInf;
  for (int x = 0; x < d; ++x) {
    const double lin = p0.dot(game.losses.col(x)) + x0(zv + x);
    u0 = std::max(u0, lin / eta + k);
  }
  x0(uv) = u0 + 1.0;

  conic::Settings cs;
  cs.rel_tol = settings.tol_solver * 0.5;
  cs.max_newton = settings.max_iterations;
  conic::Result res = conic::solve(b.build(), x0, cs);

  SolverOutcome out;
  out.converged = res.status == conic::SolveStatus::Optimal;
  if (!out.converged) return out;
  out.program_value = res.objective;
  out.p = SimplexVector::renormalized(res.x.segment(pv, k), Side::Actions);
  out.G = EstimationFunction::zero(game);
  for (int i = 0; i < npairs; ++i) {
    const auto [a, sid] = v.pi.pairs[i];
    for (int c = 0; c < v.ncols; ++c) out.G.table[a](sid, v.cols[c]) = res.x(G(i, c));
  }
  for (int a = 0; a < k; ++a)
    out.G.sup_norm = std::max(out.G.sup_norm, out.G.table[a].cwiseAbs().maxCoeff());
  out.feas.eq_residual = res.eq_residual;
  out.feas.cone_margin = res.min_margin;
  return out;
}

// Exact path: perspective-exponential epigraphs for the psi terms.
SolverOutcome solve_exact_path(const SimplexVector& q, double eta, const Game& game,
                               const std::vector<int>& pareto, const SolverSettings& settings) {
  const int k = game.k, d = game.d;
  ProgramVars v = layout(game, q, pareto);
  const int npairs = v.pi.size();
  const std::vector<int> jset = support_of(q);
  const int nj = static_cast<int>(jset.size());
  conic::Builder b;
  const int pv = b.add_vars(k);
  const int gv = b.add_vars(npairs * v.ncols);
  const int zv = b.add_vars(d);
  const int wv = b.add_vars(npairs * nj);
  const int uv = b.add_vars(1);
  auto G = [&](int pair, int col) { return gv + pair * v.ncols + col; };
  auto W = [&](int pair, int jj) { return wv + pair * nj + jj; };
  b.objective_term(uv, 1.0);

  {
    conic::Expr sum;
    for (int a = 0; a < k; ++a) sum.add(pv + a, 1.0);
    b.add_eq(sum, 1.0);
  }
  // w >= p_a exp(-eta G_j / p_a) via the exponential cone.
  for (int i = 0; i < npairs; ++i) {
    const int a = v.pi.pairs[i].first;
    for (int jj = 0; jj < nj; ++jj) {
      b.add_exp(conic::Expr::variable(G(i, v.col_at.at(jset[jj])), -eta),
                conic::Expr::variable(pv + a), conic::Expr::variable(W(i, jj)));
    }
  }
  for (int x = 0; x < d; ++x) {
    for (int c : pareto) {
      conic::Expr e = conic::Expr::variable(zv + x);
      for (int a = 0; a < k; ++a) e.add(G(v.pi.at(a, game.signals(a, x)), v.col_at.at(c)), -1.0);
      e.add_constant(game.losses(c, x));
      b.add_nonneg(e);
    }
  }
  const double inv_eta2 = 1.0 / (eta * eta);
  for (int x = 0; x < d; ++x) {
    conic::Expr e = conic::Expr::variable(uv);
    for (int a = 0; a < k; ++a) {
      e.add(pv + a, -game.losses(a, x) / eta);
      const int pair = v.pi.at(a, game.signals(a, x));
      for (int jj = 0; jj < nj; ++jj) {
        const int j = jset[jj];
        e.add(G(pair, v.col_at.at(j)), q[j] / eta);            // -<q,T_x>/eta
        e.add(W(pair, jj), -q[j] * inv_eta2);                  // -q_j w / eta^2
        e.add(G(pair, v.col_at.at(j)), -q[j] * inv_eta2 * eta);  // -q_j eta G / eta^2
        e.add(pv + a, q[j] * inv_eta2);                        // +q_j p_a / eta^2
      }
    }
    e.add(zv + x, -1.0 / eta);
    b.add_nonneg(e);
  }

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(b.num_vars());
  Eigen::VectorXd p0 = 0.5 * q.entries() + Eigen::VectorXd::Constant(k, 0.5 / k);
  x0.segment(pv, k) = p0;
  for (int x = 0; x < d; ++x) {
    double zx = -kInf;
    for (int c : pareto) zx = std::max(zx, -game.losses(c, x));
    x0(zv + x) = zx + 1.0;
  }
  for (int i = 0; i < npairs; ++i)
    for (int jj = 0; jj < nj; ++jj) x0(W(i, jj)) = 2.0 * p0(v.pi.pairs[i].first);
  double u0 = -kInf;
  for (int x = 0; x < d; ++x) {
    double stab = 0.0;
    for (int a = 0; a < k; ++a)
      for (int j : jset) stab += q[j] * (2.0 * p0(a) + 0.0 - p0(a)) * inv_eta2;
    u0 = std::max(u0, (p0.dot(game.losses.col(x)) + x0(zv + x)) / eta + stab);
  }
  x0(uv) = u0 + 1.0;

  conic::Settings cs;
  cs.rel_tol = settings.tol_solver * 0.5;
  cs.max_newton = settings.max_iterations;
  conic::Result res = conic::solve(b.build(), x0, cs);

  SolverOutcome out;
  out.converged = res.status == conic::SolveStatus::Optimal;
  if (!out.converged) return out;
  out.program_value = res.objective;
  out.p = SimplexVector::renormalized(res.x.segment(pv, k), Side::Actions);
  out.G = EstimationFunction::zero(game);
  for (int i = 0; i < npairs; ++i) {
    const auto [a, sid] = v.pi.pairs[i];
    for (int c = 0; c < v.ncols; ++c) out.G.table[a](sid, v.cols[c]) = res.x(G(i, c));
  }
  for (int a = 0; a < k; ++a)
    out.G.sup_norm = std::max(out.G.sup_norm, out.G.table[a].cwiseAbs().maxCoeff());
  out.feas.eq_residual = res.eq_residual;
  out.feas.cone_margin = res.min_margin;
  return out;
}

struct Candidate {
  SimplexVector p;
  EstimationFunction G;
  double objective = kInf;
  WitnessSource source = WitnessSource::Solver;
};

}  // namespace

ExplorationSolution solve_exploration(const SimplexVector& q, double eta, const Game& game,
                                      const GameGeometry& geometry,
                                      const SolverSettings& settings) {
  if (!(eta > 0.0)) throw Error("solve_exploration needs eta > 0");
  check_proposal(q, game, geometry.pareto);
  const std::vector<int>& pareto = geometry.pareto;
  const double eps = settings.epsilon.value_or(eta * eta);

  std::vector<Candidate> candidates;
  SolverOutcome sol;
  try {
    sol = settings.path == SolverSettings::Path::Exact
              ? solve_exact_path(q, eta, game, pareto, settings)
              : solve_socp_path(q, eta, game, pareto, eps, settings);
  } catch (const SolverFailure&) {
    sol.converged = false;
  }
  double solver_objective = std::numeric_limits<double>::quiet_NaN();
  if (sol.converged) {
    Candidate c{sol.p, sol.G, 0.0, WitnessSource::Solver};
    c.objective = objective_exact(q, eta, c.p, c.G, game, pareto);
    solver_objective = c.objective;
    candidates.push_back(std::move(c));
  }

  if (geometry.self_revealing) {
    Candidate c{q, self_revealing_estimator(game), 0.0, WitnessSource::AnalyticBandit};
    c.objective = objective_exact(q, eta, c.p, c.G, game, pareto);
    candidates.push_back(std::move(c));
  }
  if (geometry.full_information) {
    Candidate c{q, full_info_estimator(game, q.entries()), 0.0, WitnessSource::AnalyticFullInfo};
    c.objective = objective_exact(q, eta, c.p, c.G, game, pareto);
    candidates.push_back(std::move(c));
  }
  if (geometry.global_estimator && geometry.beta > 0.0) {
    const double gamma = game.k * geometry.beta * std::sqrt(eta);
    if (gamma <= 1.0) {
      Eigen::VectorXd pv =
          (1.0 - gamma) * q.entries() + Eigen::VectorXd::Constant(game.k, gamma / game.k);
      Candidate c{SimplexVector(std::move(pv), Side::Actions), *geometry.global_estimator, 0.0,
                  WitnessSource::AnalyticGlobal};
      c.objective = objective_exact(q, eta, c.p, c.G, game, pareto);
      candidates.push_back(std::move(c));
    }
  }
  if (geometry.cls.locally_observable && !geometry.cls.degenerate && geometry.local_estimators_ok) {
    const double gamma = eta * game.m * game.k * game.k / 2.0;
    if (gamma <= 1.0) {
      std::vector<SimplexVector> probes;
      probes.push_back(SimplexVector::uniform(game.d, Side::Outcomes));
      for (int x = 0; x < game.d; ++x) probes.push_back(SimplexVector::unit(game.d, x, Side::Outcomes));
      for (const SimplexVector& nu : probes) {
        try {
          InTree tree = greedy_in_tree(game, pareto, geometry.cls.graph, nu);
          EstimationFunction G = chain_estimator(game, tree, geometry.local_estimators, pareto);
          SimplexVector r = water_transfer(q, tree);
          Eigen::VectorXd pv =
              (1.0 - gamma) * r.entries() + Eigen::VectorXd::Constant(game.k, gamma / game.k);
          Candidate c{SimplexVector(std::move(pv), Side::Actions), std::move(G), 0.0,
                      WitnessSource::AnalyticWater};
          c.objective = objective_exact(q, eta, c.p, c.G, game, pareto);
          candidates.push_back(std::move(c));
        } catch (const Error&) {
          // boundary tree failure: skip this probe
        }
      }
    }
  }

  const Candidate* best = nullptr;
  for (const Candidate& c : candidates)
    if (std::isfinite(c.objective) && (!best || c.objective < best->objective)) best = &c;
  if (!best) {
    throw SolverFailure("exploration solve failed and no analytic witness applies (" +
                        std::string(sol.converged ? "solver value infinite" : "solver diverged") + ")");
  }

  ExplorationSolution out{best->p, best->G, best->objective};
  out.witness_source = best->source;
  out.solver_converged = sol.converged;
  out.fallback_warning = !sol.converged;
  out.solver_value = sol.converged ? sol.program_value : std::numeric_limits<double>::quiet_NaN();
  out.solver_objective = solver_objective;
  out.feasibility = best->source == WitnessSource::Solver ? sol.feas : FeasibilityReport{};
  out.feasibility.unbiasedness = verify_unbiased(game, out.G, pareto).max_violation;
  return out;
}

namespace {

// Stability part of the hp objective: (2/eta^2) max_x sum_a p_a Psi_q(eta G/p_a).
double hp_stability(const SimplexVector& q, double eta, const SimplexVector& p,
                    const EstimationFunction& G, const Game& game) {
  double worst = 0.0;
  for (int x = 0; x < game.d; ++x) {
    double acc = 0.0;
    for (int a = 0; a < game.k; ++a) {
      if (p[a] == 0.0) continue;
      acc += p[a] * psi(q, eta * G.value(a, game.signals(a, x)) / p[a]);
    }
    worst = std::max(worst, acc);
  }
  return 2.0 * worst / (eta * eta);
}

// Largest violation of the moment constraint (positive means violated).
double hp_moment_violation(const SimplexVector& q, double eta, const SimplexVector& p,
                           const EstimationFunction& G, double lambda, const Game& game) {
  double worst = -kInf;
  for (int c = 0; c < game.k; ++c) {
    for (int x = 0; x < game.d; ++x) {
      double acc = 0.0;
      for (int a = 0; a < game.k; ++a) {
        if (p[a] == 0.0) continue;
        const Eigen::VectorXd ga = G.value(a, game.signals(a, x));
        const double inner = q.entries().dot(ga) - ga(c);
        acc += p[a] * std::exp(eta * (game.losses(a, x) - game.losses(c, x) - inner / p[a]));
      }
      worst = std::max(worst, acc - std::exp(lambda * eta * eta));
    }
  }
  return worst;
}

double hp_range_violation(double eta, const SimplexVector& p, const EstimationFunction& G,
                          const Game& game) {
  double worst = -kInf;
  for (int a = 0; a < game.k; ++a)
    for (int sid : game.action_signals[a])
      worst = std::max(worst,
                       eta * G.value(a, sid).cwiseAbs().maxCoeff() - p[a]);
  return worst;
}

struct HpProbe {
  bool feasible = false;
  double value = kInf;  // lambda + stability objective
  SimplexVector p = SimplexVector::uniform(1, Side::Actions);
  EstimationFunction G;
  FeasibilityReport feas;
  Eigen::VectorXd raw;  // solver point, reused to warm start larger lambdas
};

// Fixed-lambda convex program behind the hp objective; phase-I (an extra
// slack on the moment rows) finds a strictly interior point when the warm
// start is unusable.
class HpFixedProgram {
 public:
  HpFixedProgram(const SimplexVector& q, double eta, const Game& game,
                 const SolverSettings& settings)
      : q_(q), eta_(eta), game_(game), settings_(settings), pi_(PairIndex::build(game)),
        jset_(support_of(q)) {}

  HpProbe probe(double lambda, const Eigen::VectorXd* warm) {
    HpProbe out;
    const conic::Program prog = build(lambda, false).build();
    conic::Settings cs;
    cs.rel_tol = settings_.tol_solver * 0.5;
    cs.max_newton = settings_.max_iterations;
    conic::Result res;
    res.status = conic::SolveStatus::NumericalFailure;
    if (warm && warm->size() > 0) {
      try {
        res = conic::solve(prog, *warm, cs);
      } catch (const SolverFailure&) {
        // warm point not interior at this lambda; fall through to phase-I
      }
    }
    if (res.status != conic::SolveStatus::Optimal) {
      Eigen::VectorXd start;
      if (!run_phase1(lambda, &start)) return out;  // infeasible at this lambda
      res = conic::solve(prog, start, cs);
    }
    if (res.status != conic::SolveStatus::Optimal) return out;
    out.feasible = true;
    out.value = lambda + res.objective;
    out.raw = res.x;
    out.p = SimplexVector::renormalized(res.x.segment(pv_, game_.k), Side::Actions);
    out.G = EstimationFunction::zero(game_);
    for (int i = 0; i < pi_.size(); ++i) {
      const auto [a, sid] = pi_.pairs[i];
      for (int j = 0; j < game_.k; ++j) out.G.table[a](sid, j) = res.x(gvar(i, j));
    }
    for (int a = 0; a < game_.k; ++a)
      out.G.sup_norm = std::max(out.G.sup_norm, out.G.table[a].cwiseAbs().maxCoeff());
    out.feas.eq_residual = res.eq_residual;
    out.feas.cone_margin = res.min_margin;
    return out;
  }

 private:
  int gvar(int pair, int j) const { return gv_ + pair * game_.k + j; }

  conic::Builder build(double lambda, bool phase1) {
    const int k = game_.k, d = game_.d;
    const int npairs = pi_.size();
    const int nj = static_cast<int>(jset_.size());
    conic::Builder b;
    pv_ = b.add_vars(k);
    gv_ = b.add_vars(npairs * k);
    wst_ = b.add_vars(npairs * nj);
    wmo_ = b.add_vars(npairs * k);
    uv_ = b.add_vars(1);
    s0_ = b.add_vars(1);  // phase-I slack; pinned near zero in phase-II
    b.objective_term(phase1 ? s0_ : uv_, 1.0);

    conic::Expr sum;
    for (int a = 0; a < k; ++a) sum.add(pv_ + a, 1.0);
    b.add_eq(sum, 1.0);
    if (!phase1) b.add_eq(conic::Expr::variable(s0_), 0.0);

    for (int i = 0; i < npairs; ++i) {
      const int a = pi_.pairs[i].first;
      for (int jj = 0; jj < nj; ++jj)
        b.add_exp(conic::Expr::variable(gvar(i, jset_[jj]), -eta_),
                  conic::Expr::variable(pv_ + a), conic::Expr::variable(wst_ + i * nj + jj));
      for (int c = 0; c < k; ++c) {
        conic::Expr xarg = conic::Expr::variable(gvar(i, c), eta_);
        for (int j : jset_) xarg.add(gvar(i, j), -eta_ * q_[j]);
        b.add_exp(xarg, conic::Expr::variable(pv_ + a),
                  conic::Expr::variable(wmo_ + i * k + c));
      }
      for (int j = 0; j < k; ++j) {
        b.add_nonneg(conic::Expr::variable(pv_ + a) - conic::Expr::variable(gvar(i, j), eta_));
        b.add_nonneg(conic::Expr::variable(pv_ + a) + conic::Expr::variable(gvar(i, j), eta_));
      }
    }
    // Moment rows, with the phase-I slack available in both phases.
    for (int c = 0; c < k; ++c)
      for (int x = 0; x < d; ++x) {
        conic::Expr e(std::exp(lambda * eta_ * eta_));
        e.add(s0_, 1.0);
        for (int a = 0; a < k; ++a) {
          const int pair = pi_.at(a, game_.signals(a, x));
          e.add(wmo_ + pair * k + c, -std::exp(eta_ * (game_.losses(a, x) - game_.losses(c, x))));
        }
        b.add_nonneg(e);
      }
    // Stability epigraph rows.
    const double scale = 2.0 / (eta_ * eta_);
    for (int x = 0; x < d; ++x) {
      conic::Expr e = conic::Expr::variable(uv_);
      for (int a = 0; a < k; ++a) {
        const int pair = pi_.at(a, game_.signals(a, x));
        for (int jj = 0; jj < nj; ++jj) {
          const int j = jset_[jj];
          e.add(wst_ + pair * nj + jj, -scale * q_[j]);
          e.add(gvar(pair, j), -scale * q_[j] * eta_);
          e.add(pv_ + a, scale * q_[j]);
        }
      }
      b.add_nonneg(e);
    }
    return b;
  }

  bool run_phase1(double lambda, Eigen::VectorXd* start_out) {
    conic::Builder b = build(lambda, true);
    const int k = game_.k;
    const int npairs = pi_.size();
    const int nj = static_cast<int>(jset_.size());
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(b.num_vars());
    const Eigen::VectorXd p0 =
        0.5 * q_.entries() + Eigen::VectorXd::Constant(k, 0.5 / k);
    x0.segment(pv_, k) = p0;
    for (int i = 0; i < npairs; ++i) {
      const int a = pi_.pairs[i].first;
      for (int jj = 0; jj < nj; ++jj) x0(wst_ + i * nj + jj) = 2.0 * p0(a);
      for (int c = 0; c < k; ++c) x0(wmo_ + i * k + c) = 2.0 * p0(a);
    }
    double viol = 0.0;
    for (int c = 0; c < k; ++c)
      for (int x = 0; x < game_.d; ++x) {
        double acc = 0.0;
        for (int a = 0; a < k; ++a)
          acc += 2.0 * p0(a) * std::exp(eta_ * (game_.losses(a, x) - game_.losses(c, x)));
        viol = std::max(viol, acc - std::exp(lambda * eta_ * eta_));
      }
    x0(s0_) = viol + 1.0;
    x0(uv_) = 2.0 / (eta_ * eta_) + 1.0;

    conic::Settings cs;
    cs.rel_tol = 1e-7;
    cs.max_newton = settings_.max_iterations;
    conic::Result res = conic::solve(b.build(), x0, cs);
    // Any interior point with a strictly negative slack certifies
    // feasibility, even when the minimization itself stalled.
    if (res.x(s0_) > -1e-9) return false;
    *start_out = res.x;
    // With s0* < 0, resetting s0 to 0 strictly enlarges every moment margin,
    // so the point stays interior for phase-II where s0 is pinned to 0.
    (*start_out)(s0_) = 0.0;
    return true;
  }

  const SimplexVector& q_;
  double eta_;
  const Game& game_;
  const SolverSettings& settings_;
  PairIndex pi_;
  std::vector<int> jset_;
  int pv_ = 0, gv_ = 0, wst_ = 0, wmo_ = 0, uv_ = 0, s0_ = 0;
};

void validate_hp(const SimplexVector& q, double eta, HpSolution& sol, const Game& game) {
  const double moment = hp_moment_violation(q, eta, sol.p, sol.G, sol.lambda, game);
  const double range = hp_range_violation(eta, sol.p, sol.G, game);
  if (moment > 1e-8)
    throw Error("hp solution violates the moment constraint by " + std::to_string(moment));
  if (range > 1e-9)
    throw Error("hp solution violates the range constraint by " + std::to_string(range));
  sol.feasibility.cone_margin = std::min(-moment, -range);
}

}  // namespace

HpSolution hp_analytic_witness(const SimplexVector& q, double eta, const SimplexVector& p,
                               const EstimationFunction& G, const Eigen::VectorXd& phi,
                               const Game& game) {
  if (!(eta > 0.0 && eta < 0.5)) throw Error("hp witness needs eta in (0, 1/2)");
  if (phi.size() != game.k) throw DimensionMismatch("phi must have one entry per action");
  if (phi.minCoeff() < 0.0) throw Error("hp witness needs phi >= 0");
  if (eta * eta * phi.maxCoeff() > 0.5 + 1e-12)
    throw Error("hp witness condition eta^2 phi <= 1/2 fails");
  // The shifted-estimator argument needs the exact column identity
  // sum_a G(a, Phi_ax) = L e_x, which the bandit/full-info forms satisfy.
  for (int x = 0; x < game.d; ++x) {
    const Eigen::VectorXd t = G.column_sum(game, x);
    if ((t - game.losses.col(x)).cwiseAbs().maxCoeff() > 1e-8)
      throw Error("hp witness estimator is not column-exact unbiased");
    Eigen::VectorXd second = Eigen::VectorXd::Zero(game.k);
    for (int a = 0; a < game.k; ++a) {
      const Eigen::VectorXd ga = G.value(a, game.signals(a, x));
      if (p[a] == 0.0) {
        if (ga.cwiseAbs().maxCoeff() > 0.0)
          throw Error("hp witness has mass-zero action with nonzero estimator");
        continue;
      }
      if (eta / p[a] * ga.cwiseAbs().maxCoeff() > 0.5 + 1e-12)
        throw Error("hp witness range condition eta |G|/p <= 1/2 fails");
      second += ga.cwiseProduct(ga) / p[a];
    }
    if (((second - phi).array() > 1e-9).any())
      throw Error("hp witness second-moment bound by phi fails");
  }

  HpSolution sol{p, EstimationFunction::zero(game), 0.0};
  for (int a = 0; a < game.k; ++a)
    for (int sid : game.action_signals[a]) {
      sol.G.table[a].row(sid) =
          (G.value(a, sid) - 3.0 * eta * p[a] * phi).transpose();
    }
  for (int a = 0; a < game.k; ++a)
    sol.G.sup_norm = std::max(sol.G.sup_norm, sol.G.table[a].cwiseAbs().maxCoeff());
  double worst_shift = -kInf;
  for (int x = 0; x < game.d; ++x)
    worst_shift = std::max(worst_shift, (p.entries() - q.entries()).dot(game.losses.col(x)));
  sol.lambda = 1.0 + 6.0 * q.entries().dot(phi) + worst_shift / eta;
  sol.value = sol.lambda + hp_stability(q, eta, sol.p, sol.G, game);
  validate_hp(q, eta, sol, game);
  return sol;
}

HpSolution solve_hp(const SimplexVector& q, double eta, const Game& game,
                    const GameGeometry& geometry, const SolverSettings& settings,
                    std::optional<double> lambda_hint) {
  if (!(eta > 0.0 && eta < 0.5)) throw Error("solve_hp needs eta in (0, 1/2)");
  check_proposal(q, game, geometry.pareto);

  std::vector<HpSolution> candidates;
  std::vector<HpBisectionPoint> trace;

  HpFixedProgram program(q, eta, game, settings);
  Eigen::VectorXd warm;     // interior point valid for every lambda >= warm_lambda
  double warm_lambda = kInf;
  auto probe = [&](double lam) -> HpProbe {
    const Eigen::VectorXd* ws = (lam >= warm_lambda && warm.size() > 0) ? &warm : nullptr;
    HpProbe pr = program.probe(lam, ws);
    if (pr.feasible && lam < warm_lambda) {
      warm = pr.raw;
      warm_lambda = lam;
    }
    trace.push_back({lam, pr.feasible ? pr.value : kInf, pr.feasible});
    return pr;
  };

  double lo = 0.0;
  double hi = lambda_hint.value_or(1.0);
  if (!(hi > 0.0)) hi = 1.0;
  HpProbe at_hi = probe(hi);
  int grows = 0;
  while (!(at_hi.feasible && at_hi.value <= 2.0 * hi)) {
    lo = hi;
    hi *= 2.0;
    if (++grows > 40)
      throw SolverFailure("hp program infeasible at all probed lambda (largest " +
                          std::to_string(hi) + ")");
    at_hi = probe(hi);
  }
  while (hi - lo > 1e-6 * (1.0 + hi)) {
    const double mid = 0.5 * (lo + hi);
    HpProbe at_mid = probe(mid);
    if (at_mid.feasible && at_mid.value <= 2.0 * mid) {
      hi = mid;
      at_hi = at_mid;
    } else {
      lo = mid;
    }
  }
  {
    HpSolution sol{at_hi.p, at_hi.G, hi};
    sol.value = at_hi.value;
    sol.witness_source = WitnessSource::Solver;
    sol.feasibility = at_hi.feas;
    validate_hp(q, eta, sol, game);
    candidates.push_back(std::move(sol));
  }

  if (geometry.full_information) {
    try {
      HpSolution w = hp_analytic_witness(q, eta, q, full_info_estimator(game, q.entries()),
                                         Eigen::VectorXd::Ones(game.k), game);
      w.witness_source = WitnessSource::AnalyticFullInfo;
      candidates.push_back(std::move(w));
    } catch (const Error&) {
    }
  }
  if (geometry.self_revealing) {
    const double gamma = game.k * eta;
    if (gamma < 1.0) {
      try {
        Eigen::VectorXd pv =
            (1.0 - gamma) * q.entries() + Eigen::VectorXd::Constant(game.k, gamma / game.k);
        SimplexVector p(pv, Side::Actions);
        HpSolution w = hp_analytic_witness(q, eta, p, self_revealing_estimator(game),
                                           p.entries().cwiseInverse(), game);
        w.witness_source = WitnessSource::AnalyticBandit;
        candidates.push_back(std::move(w));
      } catch (const Error&) {
      }
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].value < candidates[best].value) best = i;
  HpSolution out = std::move(candidates[best]);
  out.trace = std::move(trace);
  return out;
}

}  // namespace pm

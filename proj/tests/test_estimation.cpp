#include <doctest.h>

#include <random>

#include "pm/estimation.hpp"
#include "pm/geometry.hpp"
#include "test_util.hpp"

using namespace pm;
using doctest::Approx;
using pmtest::mat;

namespace {

// Substitution oracle for the defining identity of an edge estimator.
double edge_identity_residual(const Game& g, const EdgeEstimator& est) {
  double worst = 0.0;
  for (int x = 0; x < g.d; ++x) {
    double acc = 0.0;
    for (int c = 0; c < g.k; ++c) acc += est.w(c, g.signals(c, x));
    const double want = g.losses(est.edge.first, x) - g.losses(est.edge.second, x);
    worst = std::max(worst, std::abs(acc - want));
  }
  return worst;
}

struct NamedGame {
  const char* label;
  Game game;
};

std::vector<NamedGame> locally_observable_games() {
  std::mt19937_64 rng(2024);
  std::vector<NamedGame> out;
  out.push_back({"cmp-0.25", make_costly_matching_pennies(0.25)});
  out.push_back({"cmp-0.3", make_costly_matching_pennies(0.3)});
  out.push_back({"cmp-0.49", make_costly_matching_pennies(0.49)});
  out.push_back({"bandit-mp", make_bandit(mat({{0, 1}, {1, 0}}))});
  out.push_back({"bandit-3x4", make_bandit(pmtest::random_losses(rng, 3, 4))});
  return out;
}

}  // namespace

TEST_CASE("local edge estimator on costly matching pennies") {
  const Game g = make_costly_matching_pennies(0.25);
  const EdgeEstimator est = local_edge_estimator(g, {0, 2});
  CHECK(edge_identity_residual(g, est) < 1e-10);
  CHECK(est.support == std::vector<int>{0, 2});
  CHECK(est.sup_norm <= g.m / 2.0 + 1e-9);
  // Row for action 2 must stay zero: the witness uses the edge's own actions.
  CHECK(est.w.row(1).cwiseAbs().maxCoeff() == 0.0);
  // One valid table is w1(blank)=0, w3(H)=-1/4, w3(T)=3/4; any rebalanced
  // variant keeps the H/T gap at exactly 1.
  const int h = g.signals(2, 0), t = g.signals(2, 1);
  CHECK(est.w(2, t) - est.w(2, h) == Approx(1.0).epsilon(1e-10));

  const EdgeEstimator other = local_edge_estimator(g, {1, 2});
  CHECK(edge_identity_residual(g, other) < 1e-10);
  CHECK(other.sup_norm <= g.m / 2.0 + 1e-9);
}

TEST_CASE("local edge estimator on reductions") {
  {
    const Game g = make_full_info(mat({{0, 1}, {1, 0}}));
    const EdgeEstimator est = local_edge_estimator(g, {0, 1});
    CHECK(edge_identity_residual(g, est) < 1e-10);
    CHECK(est.sup_norm <= g.m / 2.0 + 1e-9);
  }
  {
    const Game g = make_bandit(mat({{0, 1}, {1, 0}}));
    const EdgeEstimator est = local_edge_estimator(g, {0, 1});
    CHECK(edge_identity_residual(g, est) < 1e-10);
    CHECK(est.sup_norm <= g.m / 2.0 + 1e-9);
    // The textbook table w_a(sigma) = loss, w_b(sigma) = -loss also works;
    // check it against the same identity as a cross-oracle.
    EdgeEstimator text;
    text.edge = {0, 1};
    text.w = Eigen::MatrixXd::Zero(g.k, static_cast<int>(g.alphabet.size()));
    for (int sid : g.action_signals[0]) text.w(0, sid) = loss_for_signal(g, 0, sid);
    for (int sid : g.action_signals[1]) text.w(1, sid) = -loss_for_signal(g, 1, sid);
    CHECK(edge_identity_residual(g, text) < 1e-12);
  }
}

TEST_CASE("local estimator requires local observability") {
  const Game g = make_costly_matching_pennies(1.0);
  CHECK_THROWS_AS(local_edge_estimator(g, {0, 1}), NotObservable);
}

TEST_CASE("rebalancing keeps edge sums and the m/2 norm bound") {
  std::mt19937_64 rng(5);
  for (const auto& [label, g] : locally_observable_games()) {
    INFO(label);
    const auto cls = classify_actions(g);
    const auto graph = neighbour_graph(g, cls);
    for (const auto& e : graph.edges) {
      const EdgeEstimator est = local_edge_estimator(g, e);
      CHECK(edge_identity_residual(g, est) < 1e-8);  // edge sums preserved
      CHECK(est.sup_norm <= g.m / 2.0 + 1e-9);
    }
  }
}

TEST_CASE("global edge estimator") {
  {
    const Game g = make_costly_matching_pennies(1.0);
    const EdgeEstimator est = global_edge_estimator(g, {0, 1});
    CHECK(edge_identity_residual(g, est) < 1e-10);
    // The minimum-norm witness routes everything through the revealing action.
    const int h = g.signals(2, 0), t = g.signals(2, 1);
    CHECK(est.w(2, h) == Approx(-1.0).epsilon(1e-9));
    CHECK(est.w(2, t) == Approx(1.0).epsilon(1e-9));
    const double bound = std::sqrt(2.0) * std::pow(3.0, 1.0);
    CHECK(est.sup_norm <= bound + 1e-6);
  }
  {
    // Locally observable edges admit the global estimator too.
    const Game g = make_costly_matching_pennies(0.25);
    for (const auto& e : {std::pair<int, int>{0, 2}, std::pair<int, int>{1, 2}}) {
      const EdgeEstimator est = global_edge_estimator(g, e);
      CHECK(edge_identity_residual(g, est) < 1e-8);
    }
  }
  {
    const Game g = validate_game(mat({{0, 1}, {1, 0}}),
                                 std::vector<std::vector<std::string>>{{"x", "x"}, {"x", "x"}});
    CHECK_THROWS_AS(global_edge_estimator(g, {0, 1}), NotObservable);
  }
}

TEST_CASE("global estimator norm bound on random small games") {
  std::mt19937_64 rng(17);
  int built = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 2 + int(rng() % 4);
    const int d = 2 + int(rng() % 4);
    const Game g = make_bandit(pmtest::random_losses(rng, k, d));
    const auto cls = classify_actions(g);
    const auto graph = neighbour_graph(g, cls);
    const double bound = std::sqrt(double(d)) * std::pow(double(k), d / 2.0);
    for (const auto& e : graph.edges) {
      const EdgeEstimator est = global_edge_estimator(g, e);
      CHECK(est.sup_norm <= bound + 1e-6);
      ++built;
    }
  }
  CHECK(built > 10);
}

TEST_CASE("in-tree validation") {
  CHECK_THROWS_AS(InTree({}, {}), Error);
  CHECK_THROWS_AS(InTree({0, 1}, {{0, 1}, {1, 0}}), Error);  // cycle, no root
  CHECK_THROWS_AS(InTree({0, 1, 2}, {{1, 0}}), Error);       // two roots
  const InTree t({0, 1, 2}, {{1, 0}, {2, 1}});
  CHECK(t.root() == 0);
  CHECK(t.depth(0) == 1);
  CHECK(t.depth(2) == 3);
  CHECK(t.path(2).size() == 2);
  CHECK(t.path(0).empty());
}

TEST_CASE("chained estimator satisfies the pairwise identities") {
  const Game g = make_costly_matching_pennies(0.25);
  const auto cls = classify_actions(g);
  const auto graph = neighbour_graph(g, cls);
  std::map<std::pair<int, int>, EdgeEstimator> ests;
  for (const auto& e : graph.edges) ests.emplace(e, local_edge_estimator(g, e));
  const InTree tree({0, 1, 2}, {{0, 2}, {1, 2}});  // rooted at the revealing action
  const EstimationFunction G = chain_estimator(g, tree, ests, cls.pareto);
  CHECK(G.unbiased);
  // Root column is an empty path.
  for (int a = 0; a < g.k; ++a) CHECK(G.table[a].col(2).cwiseAbs().maxCoeff() == 0.0);
  const UnbiasednessReport rep = verify_unbiased(g, G, cls.pareto);
  CHECK(rep.max_violation < 1e-8);
  CHECK(rep.max_violation_iw < 1e-8);
  CHECK(G.sup_norm <= g.k * g.m / 2.0 + 1e-9);

  CHECK_THROWS_AS(chain_estimator(g, InTree({0, 2}, {{0, 2}}), {}, cls.pareto), Error);
}

TEST_CASE("chained estimator over a single-action Pareto set is zero") {
  const Game g = make_bandit(mat({{0.1, 0.2}, {0.6, 0.7}}));  // action 1 dominates
  const auto cls = classify_actions(g);
  REQUIRE(cls.pareto == std::vector<int>{0});
  const EstimationFunction G =
      chain_estimator(g, InTree({0}, {}), {}, cls.pareto);
  for (int a = 0; a < g.k; ++a) CHECK(G.table[a].cwiseAbs().maxCoeff() == 0.0);
  CHECK(G.unbiased);
}

TEST_CASE("chain over a three-action full-information game") {
  const Game g = make_full_info(mat({{0, 0.5, 1}, {1, 0, 0.5}, {0.5, 1, 0}}));
  const auto cls = classify_actions(g);
  REQUIRE(cls.pareto.size() == 3);
  const auto graph = neighbour_graph(g, cls);
  std::map<std::pair<int, int>, EdgeEstimator> ests;
  for (const auto& e : graph.edges) ests.emplace(e, local_edge_estimator(g, e));
  const InTree tree = greedy_in_tree(g, cls.pareto, graph, SimplexVector::uniform(3, Side::Outcomes));
  const EstimationFunction G = chain_estimator(g, tree, ests, cls.pareto);
  CHECK(G.unbiased);
  CHECK(G.sup_norm <= g.k * g.m / 2.0 + 1e-9);
}

TEST_CASE("greedy in-tree on costly matching pennies") {
  const Game g = make_costly_matching_pennies(0.25);
  const auto cls = classify_actions(g);
  const auto graph = neighbour_graph(g, cls);
  {
    // Expected losses (0.1, 0.9, 0.25): root 1, parent(3)=1, parent(2)=3.
    const SimplexVector nu(Eigen::Vector2d(0.9, 0.1), Side::Outcomes);
    const InTree tree = greedy_in_tree(g, cls.pareto, graph, nu);
    CHECK(tree.root() == 0);
    CHECK(tree.parent(2) == 0);
    CHECK(tree.parent(1) == 2);
  }
  {
    // Boundary nu where actions 1 and 3 tie; the perturbation decides.
    const SimplexVector nu(Eigen::Vector2d(0.75, 0.25), Side::Outcomes);
    const InTree tree = greedy_in_tree(g, cls.pareto, graph, nu);
    CHECK(tree.root() == 2);
    CHECK(tree.parent(0) == 2);
    CHECK(tree.parent(1) == 2);
  }
}

TEST_CASE("greedy in-tree trivial and error cases") {
  {
    const Game g = make_bandit(mat({{0.1, 0.2}, {0.6, 0.7}}));
    const auto cls = classify_actions(g);
    const auto graph = neighbour_graph(g, cls);
    const InTree tree = greedy_in_tree(g, cls.pareto, graph, SimplexVector::uniform(2, Side::Outcomes));
    CHECK(tree.root() == 0);
    CHECK(tree.edges().empty());
  }
  {
    // Two-action game whose Pareto set is disconnected in the passed graph.
    const Game g = make_bandit(mat({{0, 1}, {1, 0}}));
    const auto cls = classify_actions(g);
    NeighbourGraph empty_graph;
    empty_graph.adjacency.resize(g.k);
    CHECK_THROWS_AS(greedy_in_tree(g, cls.pareto, empty_graph, SimplexVector::uniform(2, Side::Outcomes)),
                    Error);
  }
}

TEST_CASE("water transfer closed forms") {
  {
    // Chain 1 -> 2 rooted at 2 with all mass on 1: r = (1/2, 1/2).
    const InTree chain({0, 1}, {{0, 1}});
    const SimplexVector q(Eigen::Vector2d(1.0, 0.0), Side::Actions);
    const SimplexVector r = water_transfer(q, chain);
    CHECK(r[0] == Approx(0.5).epsilon(1e-12));
    CHECK(r[1] == Approx(0.5).epsilon(1e-12));
  }
  {
    // Star into the root under uniform q.
    const int k = 4;
    std::map<int, int> parent;
    for (int a = 1; a < k; ++a) parent[a] = 0;
    const InTree star({0, 1, 2, 3}, std::move(parent));
    const SimplexVector q = SimplexVector::uniform(k, Side::Actions);
    const SimplexVector r = water_transfer(q, star);
    CHECK(r[0] == Approx(1.0 / k + (k - 1) / (2.0 * k)).epsilon(1e-12));
    for (int a = 1; a < k; ++a) CHECK(r[a] == Approx(1.0 / (2.0 * k)).epsilon(1e-12));
  }
  {
    const InTree single({0}, {});
    const SimplexVector q(Eigen::VectorXd::Ones(1), Side::Actions);
    const SimplexVector r = water_transfer(q, single);
    CHECK(r[0] == 1.0);
  }
  {
    const InTree single({0}, {});
    const SimplexVector q(Eigen::Vector2d(0.5, 0.5), Side::Actions);
    CHECK_THROWS_AS(water_transfer(q, single), Error);
  }
}

TEST_CASE("water transfer triple property on locally observable games") {
  std::mt19937_64 rng(99);
  for (const auto& [label, g] : locally_observable_games()) {
    INFO(label);
    const GameClassification cls = classify_game(g);
    REQUIRE(cls.locally_observable);
    REQUIRE(!cls.degenerate);
    for (int trial = 0; trial < 200; ++trial) {
      const SimplexVector q = pmtest::random_simplex_on(rng, g.k, cls.actions.pareto);
      const SimplexVector nu = pmtest::random_simplex(rng, g.d, Side::Outcomes);
      const InTree tree = greedy_in_tree(g, cls.actions.pareto, cls.graph, nu);
      const SimplexVector r = water_transfer(q, tree);
      // (a) expected loss does not increase
      CHECK((r.entries() - q.entries()).dot(g.losses * nu.entries()) <= 1e-9);
      // (b) no action is starved below q/k
      for (int a = 0; a < g.k; ++a) CHECK(r[a] >= q[a] / g.k - 1e-12);
      // (c) mass is non-decreasing toward the root
      for (const auto& [child, par] : tree.edges()) CHECK(r[child] <= r[par] + 1e-12);
    }
  }
}

TEST_CASE("verify_unbiased flags the textbook estimators") {
  const Game bg = make_bandit(mat({{0, 1}, {1, 0}}));
  EstimationFunction G = EstimationFunction::zero(bg);
  for (int a = 0; a < bg.k; ++a)
    for (int sid : bg.action_signals[a]) G.table[a](sid, a) = loss_for_signal(bg, a, sid);
  const auto cls = classify_actions(bg);
  CHECK(verify_unbiased(bg, G, cls.pareto).unbiased);

  const Game fg = make_full_info(mat({{0, 1}, {1, 0}}));
  EstimationFunction Gf = EstimationFunction::zero(fg);
  const Eigen::Vector2d p(0.3, 0.7);
  for (int a = 0; a < fg.k; ++a)
    for (int sid : fg.action_signals[a])
      Gf.table[a].row(sid) = (p(a) * column_for_signal(fg, a, sid)).transpose();
  CHECK(verify_unbiased(fg, Gf, classify_actions(fg).pareto).unbiased);

  // A broken table is reported with its violation.
  Gf.table[0](0, 0) += 0.5;
  const auto rep = verify_unbiased(fg, Gf, classify_actions(fg).pareto);
  CHECK(!rep.unbiased);
  CHECK(rep.max_violation == Approx(0.5).epsilon(1e-9));
}

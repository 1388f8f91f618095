#include <doctest.h>

#include <functional>
#include <random>

#include "pm/geometry.hpp"
#include "pm/linprog.hpp"

using namespace pm;
using doctest::Approx;

namespace {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.begin()->size());
  Eigen::MatrixXd m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// All points of a regular grid over the outcome simplex with roughly a
// thousand nodes; exact rational coordinates scaled by 1/steps.
std::vector<Eigen::VectorXd> simplex_grid(int d, int steps) {
  std::vector<Eigen::VectorXd> out;
  std::vector<int> part(d, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == d - 1) {
      part[pos] = left;
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = double(part[i]) / steps;
      out.push_back(std::move(v));
      return;
    }
    for (int take = 0; take <= left; ++take) {
      part[pos] = take;
      rec(pos + 1, left - take);
    }
  };
  rec(0, steps);
  return out;
}

// Membership oracle: action a is optimal at nu iff its expected loss is
// within tolerance of the minimum.
bool grid_in_cell(const Game& g, int action, const Eigen::VectorXd& nu) {
  const Eigen::VectorXd losses = g.losses * nu;
  return losses(action) <= losses.minCoeff() + 1e-9;
}

Game random_bandit(int k, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd L(k, d);
  for (int a = 0; a < k; ++a)
    for (int x = 0; x < d; ++x) L(a, x) = unif(rng);
  return make_bandit(L);
}

}  // namespace

TEST_CASE("polytope dimension") {
  CHECK(polytope_dimension(simplex_polytope(3)) == 2);
  CHECK(polytope_dimension(simplex_polytope(1)) == 0);

  const Game g = make_costly_matching_pennies(0.25);
  CHECK(polytope_dimension(cell(g, 2)) == 1);

  Polytope empty = simplex_polytope(2);
  const int base = static_cast<int>(empty.A.rows());
  empty.A.conservativeResize(base + 1, 2);
  empty.b.conservativeResize(base + 1);
  empty.A.row(base) << 1.0, 0.0;
  empty.b(base) = -1.0;  // nu_1 <= -1
  CHECK(polytope_dimension(empty) == -1);
}

TEST_CASE("cells match the grid oracle on costly matching pennies") {
  const Game g = make_costly_matching_pennies(0.25);
  for (int s = 0; s <= 1000; ++s) {
    Eigen::VectorXd nu(2);
    nu << 1.0 - s / 1000.0, s / 1000.0;
    for (int a = 0; a < 3; ++a) {
      CHECK(contains(cell(g, a), nu, 1e-9) == grid_in_cell(g, a, nu));
    }
  }
  // C_1 is the nu_2 <= 1/4 slice, C_3 the middle band [1/4, 3/4] of nu_2.
  Eigen::VectorXd c(2);
  c << 0.0, 1.0;
  CHECK(lp::maximize(c, cell(g, 0).A, cell(g, 0).b).value == Approx(0.25).epsilon(1e-9));
  CHECK(lp::maximize(c, cell(g, 2).A, cell(g, 2).b).value == Approx(0.75).epsilon(1e-9));
  CHECK(lp::minimize(c, cell(g, 2).A, cell(g, 2).b).value == Approx(0.25).epsilon(1e-9));

  // c = 3/5 dominates action 3 out of existence.
  const Game gh = make_costly_matching_pennies(0.6);
  CHECK(polytope_dimension(cell(gh, 2)) == -1);
  for (int s = 0; s <= 1000; ++s) {
    Eigen::VectorXd nu(2);
    nu << 1.0 - s / 1000.0, s / 1000.0;
    CHECK(!grid_in_cell(gh, 2, nu));
  }
}

TEST_CASE("action classification across the pennies cost range") {
  {
    const ActionClassification cls = classify_actions(make_costly_matching_pennies(0.25));
    CHECK(cls.pareto == std::vector<int>{0, 1, 2});
    CHECK(cls.degenerate.empty());
    CHECK(cls.dominated.empty());
  }
  {
    const ActionClassification cls = classify_actions(make_costly_matching_pennies(0.5));
    CHECK(cls.pareto == std::vector<int>{0, 1});
    CHECK(cls.degenerate == std::vector<int>{2});
    CHECK(cls.cell_dimension[2] == 0);  // the single point (1/2, 1/2)
  }
  {
    const ActionClassification cls = classify_actions(make_costly_matching_pennies(1.0));
    CHECK(cls.pareto == std::vector<int>{0, 1});
    CHECK(cls.dominated == std::vector<int>{2});
  }
}

TEST_CASE("duplicate rows are reported exactly once") {
  Eigen::MatrixXd L = mat({{0, 1}, {1, 0}, {0, 1}});
  std::vector<std::vector<std::string>> sig = {{"a", "b"}, {"a", "b"}, {"c", "d"}};
  const ActionClassification cls = classify_actions(validate_game(L, sig));
  REQUIRE(cls.duplicates.size() == 1);
  CHECK(cls.duplicates[0] == std::pair<int, int>(0, 2));
}

TEST_CASE("neighbour graph") {
  {
    const Game g = make_costly_matching_pennies(0.25);
    const NeighbourGraph graph = neighbour_graph(g, classify_actions(g));
    REQUIRE(graph.edges.size() == 2);
    CHECK(graph.edges[0] == std::pair<int, int>(0, 2));
    CHECK(graph.edges[1] == std::pair<int, int>(1, 2));  // 1 and 2 are split by 3
  }
  {
    const Game g = make_costly_matching_pennies(1.0);
    const NeighbourGraph graph = neighbour_graph(g, classify_actions(g));
    REQUIRE(graph.edges.size() == 1);
    CHECK(graph.edges[0] == std::pair<int, int>(0, 1));
  }
  {
    const Game g = make_bandit(mat({{0.5, 0.5}}));
    CHECK(neighbour_graph(g, classify_actions(g)).edges.empty());
  }
}

TEST_CASE("observability checks") {
  {
    const Game g = make_costly_matching_pennies(0.25);
    const auto graph = neighbour_graph(g, classify_actions(g));
    const auto local = check_local_observability(g, graph);
    CHECK(local.observable);
    for (const auto& w : local.witnesses) {
      CHECK(w.feasible);
      CHECK(w.residual < 1e-10);
    }
    CHECK(check_global_observability(g, graph).observable);
  }
  {
    const Game g = make_costly_matching_pennies(1.0);
    const auto graph = neighbour_graph(g, classify_actions(g));
    const auto local = check_local_observability(g, graph);
    CHECK(!local.observable);  // actions 1,2 emit a constant signal
    CHECK(check_global_observability(g, graph).observable);
  }
  {
    const Game g = make_full_info(mat({{0, 0, 1, 1}, {0, 1, 0, 1}}));
    const auto graph = neighbour_graph(g, classify_actions(g));
    CHECK(check_local_observability(g, graph).observable);
  }
  {
    // Constant signals but differing losses: nothing is estimable.
    const Game g = validate_game(mat({{0, 1}, {1, 0}}),
                                 std::vector<std::vector<std::string>>{{"x", "x"}, {"x", "x"}});
    const auto graph = neighbour_graph(g, classify_actions(g));
    CHECK(!check_global_observability(g, graph).observable);
    CHECK(!check_local_observability(g, graph).observable);
  }
  {
    const Game g = random_bandit(3, 4, 5);
    const auto graph = neighbour_graph(g, classify_actions(g));
    CHECK(check_global_observability(g, graph).observable);
    CHECK(check_local_observability(g, graph).observable);
  }
}

TEST_CASE("pennies classification matches the cost-range characterization") {
  auto category_at = [](double c) { return classify_game(make_costly_matching_pennies(c)); };
  CHECK(category_at(0.0).category == GameCategory::Trivial);
  CHECK(category_at(0.1).category == GameCategory::Easy);
  CHECK(category_at(0.3).category == GameCategory::Easy);
  CHECK(category_at(0.49).category == GameCategory::Easy);
  CHECK(category_at(0.5).degenerate);
  CHECK(category_at(0.6).category == GameCategory::Hard);
  CHECK(category_at(1.0).category == GameCategory::Hard);

  const GameClassification easy = category_at(0.3);
  CHECK(easy.locally_observable);
  CHECK(easy.globally_observable);
  CHECK(!easy.degenerate);
  CHECK(!easy.has_duplicates);
  const GameClassification hard = category_at(1.0);
  CHECK(!hard.locally_observable);
  CHECK(hard.globally_observable);
}

TEST_CASE("cells cover the outcome simplex") {
  std::vector<Game> games;
  games.push_back(make_costly_matching_pennies(0.3));
  games.push_back(make_costly_matching_pennies(1.0));
  games.push_back(random_bandit(3, 3, 11));
  games.push_back(make_full_info(mat({{0, 0.25, 1, 0.5}, {0.5, 0.25, 0, 1}})));
  for (const Game& g : games) {
    const int steps = g.d == 2 ? 1000 : (g.d == 3 ? 43 : 17);
    std::vector<Polytope> cells;
    for (int a = 0; a < g.k; ++a) cells.push_back(cell(g, a));
    for (const Eigen::VectorXd& nu : simplex_grid(g.d, steps)) {
      bool covered = false;
      for (int a = 0; a < g.k && !covered; ++a) covered = contains(cells[a], nu, 1e-9);
      CHECK(covered);
    }
  }
}

TEST_CASE("intersection dimension is monotone") {
  for (double c : {0.25, 0.5, 1.0}) {
    const Game g = make_costly_matching_pennies(c);
    std::vector<int> dims(g.k);
    for (int a = 0; a < g.k; ++a) dims[a] = polytope_dimension(cell(g, a));
    for (int a = 0; a < g.k; ++a)
      for (int b = a + 1; b < g.k; ++b) {
        const int dab = polytope_dimension(intersect(cell(g, a), cell(g, b)));
        CHECK(dab <= std::min(dims[a], dims[b]));
      }
  }
}

TEST_CASE("local observability implies global on sampled games") {
  std::vector<Game> games = {make_costly_matching_pennies(0.2), random_bandit(4, 3, 21),
                             make_full_info(mat({{0, 1, 0.5}, {1, 0, 0.5}}))};
  for (const Game& g : games) {
    const GameClassification cls = classify_game(g);
    if (cls.locally_observable) CHECK(cls.globally_observable);
  }
}

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "pm/game.hpp"

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

}  // namespace

TEST_CASE("costly matching pennies construction") {
  const Game g = make_costly_matching_pennies(0.25);
  CHECK(g.k == 3);
  CHECK(g.d == 2);
  CHECK(g.m == 2);
  CHECK(g.scale == 1.0);
  CHECK(g.losses(2, 0) == 0.25);
  CHECK(g.losses(2, 1) == 0.25);
  // Actions 1 and 2 see only the blank signal; action 3 separates H from T.
  CHECK(g.signals(0, 0) == g.signals(0, 1));
  CHECK(g.signals(0, 0) == g.signals(1, 0));
  CHECK(g.signals(2, 0) != g.signals(2, 1));
  CHECK(g.action_signals[0].size() == 1);
  CHECK(g.action_signals[2].size() == 2);

  const Game hard = make_costly_matching_pennies(1.0);
  CHECK(hard.scale == 1.0);  // c = 1 stays representable unscaled
  CHECK(hard.losses(2, 0) == 1.0);

  const Game scaled = make_costly_matching_pennies(2.0);
  CHECK(scaled.scale == 2.0);
  CHECK(scaled.losses(2, 0) == 1.0);
  CHECK(scaled.losses(0, 1) == 0.5);
  CHECK(scaled.losses.maxCoeff() <= 1.0);

  CHECK_THROWS_AS(make_costly_matching_pennies(-0.1), InvalidGame);
}

TEST_CASE("validate_game edge cases") {
  const Game tiny = validate_game(mat({{0.0}}), std::vector<std::vector<std::string>>{{"s"}});
  CHECK(tiny.k == 1);
  CHECK(tiny.d == 1);
  CHECK(tiny.m == 1);

  CHECK_THROWS_AS(validate_game(mat({{0.0, 1.5}}), std::vector<std::vector<std::string>>{{"a", "b"}}),
                  InvalidGame);
  CHECK_THROWS_AS(validate_game(Eigen::MatrixXd(), std::vector<std::vector<std::string>>{}),
                  InvalidGame);
  CHECK_THROWS_AS(validate_game(mat({{0.0, 1.0}}), std::vector<std::vector<std::string>>{{"a"}}),
                  InvalidGame);
}

TEST_CASE("bandit and full-information reductions") {
  const Game b = make_bandit(mat({{0, 1}, {1, 0}}));
  CHECK(b.m == 2);
  CHECK(is_self_revealing(b));
  CHECK(loss_for_signal(b, 0, b.signals(0, 1)) == 1.0);

  const Game flat = make_bandit(Eigen::MatrixXd::Constant(3, 4, 0.5));
  CHECK(flat.m == 1);

  const Game f = make_full_info(mat({{0, 1}, {1, 0}}));
  CHECK(f.m == 2);
  CHECK(is_full_information(f));
  // Both actions observe the same signal for a given outcome.
  CHECK(f.signals(0, 0) == f.signals(1, 0));
  CHECK(f.signals(0, 1) == f.signals(1, 1));

  // Binary-loss full information game with d = 2^k outcome columns.
  const Game fb = make_full_info(mat({{0, 0, 1, 1}, {0, 1, 0, 1}}));
  CHECK(fb.m == 4);
  CHECK(column_for_signal(fb, 0, fb.signals(0, 2)) == fb.losses.col(2));

  const Game fc = make_full_info(Eigen::MatrixXd::Constant(2, 3, 0.25));
  CHECK(fc.m == 1);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + int(rng() % 4);
    const int d = 1 + int(rng() % 5);
    Eigen::MatrixXd L(k, d);
    for (int a = 0; a < k; ++a)
      for (int x = 0; x < d; ++x) L(a, x) = unif(rng);
    CHECK(make_bandit(L).m <= d);
    CHECK(make_full_info(L).m <= d);
  }
}

TEST_CASE("expected loss") {
  const Game g = make_costly_matching_pennies(0.25);
  const SimplexVector e3 = SimplexVector::unit(3, 2, Side::Actions);
  const SimplexVector nu(Eigen::Vector2d(0.3, 0.7), Side::Outcomes);
  CHECK(expected_loss(e3, g, nu) == Approx(0.25).epsilon(1e-12));

  SimplexVector half(Eigen::Vector3d(0.5, 0.5, 0.0), Side::Actions);
  CHECK(expected_loss(half, g, nu) == Approx(0.5).epsilon(1e-12));

  // (p - q)^T L = (-0.2, -0.2) for q = (0.4, 0.4, 0.2), p = e_3 at c = 1/4.
  const SimplexVector q(Eigen::Vector3d(0.4, 0.4, 0.2), Side::Actions);
  for (int x = 0; x < 2; ++x) {
    const SimplexVector ex = SimplexVector::unit(2, x, Side::Outcomes);
    CHECK(expected_loss(e3, g, ex) - expected_loss(q, g, ex) == Approx(-0.2).epsilon(1e-12));
  }

  CHECK_THROWS_AS(expected_loss(e3, g, SimplexVector::uniform(3, Side::Outcomes)),
                  DimensionMismatch);
  CHECK_THROWS_AS(expected_loss(nu, g, nu), DimensionMismatch);
}

TEST_CASE("expected loss is bilinear") {
  const Game g = make_costly_matching_pennies(0.3);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto random_simplex = [&](int n, Side side) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = -std::log(1.0 - unif(rng));
    return SimplexVector::renormalized(v, side);
  };
  for (int trial = 0; trial < 50; ++trial) {
    const SimplexVector p1 = random_simplex(3, Side::Actions);
    const SimplexVector p2 = random_simplex(3, Side::Actions);
    const SimplexVector nu = random_simplex(2, Side::Outcomes);
    const double alpha = unif(rng);
    const SimplexVector mix(alpha * p1.entries() + (1 - alpha) * p2.entries(), Side::Actions);
    const double lhs = expected_loss(mix, g, nu);
    const double rhs = alpha * expected_loss(p1, g, nu) + (1 - alpha) * expected_loss(p2, g, nu);
    CHECK(lhs == Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("pennies mass transform lowers both loss columns equally") {
  // p = q - mu (e_1 + e_2) + 2 mu e_3 gives (p - q)^T L = mu (2c - 1) 1^T.
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (double c : {0.25, 0.3, 0.49, 0.7, 1.0}) {
    const Game g = make_costly_matching_pennies(c);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::Vector3d qv(-std::log(1 - unif(rng)), -std::log(1 - unif(rng)),
                         -std::log(1 - unif(rng)));
      qv /= qv.sum();
      const double mu = std::min(qv(0), qv(1));
      Eigen::Vector3d pv = qv;
      pv(0) -= mu;
      pv(1) -= mu;
      pv(2) += 2 * mu;
      const Eigen::RowVector2d diff = (pv - qv).transpose() * g.losses;
      const double want = mu * (2 * g.losses(2, 0) - 1.0);
      CHECK(diff(0) == Approx(want).epsilon(1e-10));
      CHECK(diff(1) == Approx(want).epsilon(1e-10));
      if (c == 0.25) CHECK(diff(0) == Approx(-0.5 * mu).epsilon(1e-10));
    }
  }
}

TEST_CASE("simplex vector validation") {
  CHECK_THROWS_AS(SimplexVector(Eigen::Vector2d(0.6, 0.6), Side::Actions), Error);
  CHECK_THROWS_AS(SimplexVector(Eigen::Vector2d(1.2, -0.2), Side::Actions), Error);
  const SimplexVector ok(Eigen::Vector2d(0.5, 0.5 + 4e-13), Side::Actions);
  CHECK(ok.entries().sum() == Approx(1.0).epsilon(1e-15));
  const SimplexVector re = SimplexVector::renormalized(Eigen::Vector3d(2.0, 1.0, 1.0), Side::Actions);
  CHECK(re[0] == Approx(0.5));
  CHECK_THROWS_AS(SimplexVector::renormalized(Eigen::Vector2d(-0.5, 0.2), Side::Actions), Error);
}

TEST_CASE("game file round trip") {
  const Game g = make_costly_matching_pennies(0.3);
  const std::string path = "roundtrip_cmp.json";
  save_game(g, path);
  const Game back = load_game(path);
  CHECK(back.name == g.name);
  CHECK(back.k == g.k);
  CHECK(back.d == g.d);
  CHECK(back.m == g.m);
  CHECK(back.scale == g.scale);
  CHECK((back.losses - g.losses).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.signals == g.signals);
  CHECK(back.alphabet == g.alphabet);
  std::remove(path.c_str());
}

TEST_CASE("game file parsing") {
  {
    std::ofstream out("bad_game.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_game("bad_game.json"), IoError);
  std::remove("bad_game.json");
  CHECK_THROWS_AS(load_game("missing_file.json"), IoError);

  // String labels are interned by first appearance, row-major.
  {
    std::ofstream out("labels.json");
    out << R"({"name":"t","losses":[[0,1],[1,0],[0.25,0.25]],)"
        << R"("signals":[["⊥","⊥"],["⊥","⊥"],["H","T"]]})";
  }
  const Game g = load_game("labels.json");
  CHECK(g.alphabet == std::vector<std::string>{"⊥", "H", "T"});
  CHECK(g.signals(0, 0) == 0);
  CHECK(g.signals(2, 0) == 1);
  CHECK(g.signals(2, 1) == 2);
  std::remove("labels.json");

  // Integer signal entries are accepted and namespaced by value.
  {
    std::ofstream out("ints.json");
    out << R"({"losses":[[0,1]],"signals":[[7,9]]})";
  }
  const Game gi = load_game("ints.json");
  CHECK(gi.alphabet == std::vector<std::string>{"7", "9"});
  std::remove("ints.json");
}

TEST_CASE("builtin game specs") {
  const Game g = load_game_spec("builtin:cmp:0.3");
  CHECK(g.k == 3);
  CHECK(g.losses(2, 0) == Approx(0.3));
  CHECK_THROWS_AS(load_game_spec("builtin:cmp:zzz"), IoError);
}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pm/estimation.hpp"
#include "pm/game.hpp"
#include "pm/geometry.hpp"
#include "pm/harness.hpp"
#include "pm/learner.hpp"
#include "pm/optimizer.hpp"

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

pm::SimplexVector parse_simplex(const std::string& text, pm::Side side) {
  const std::vector<double> vals = parse_csv_doubles(text);
  return pm::SimplexVector(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()), side);
}

pm::Adversary parse_adversary(const std::string& spec) {
  if (spec.rfind("iid:", 0) == 0)
    return pm::Adversary::iid(parse_simplex(spec.substr(4), pm::Side::Outcomes));
  if (spec.rfind("fixed:", 0) == 0) {
    std::ifstream in(spec.substr(6));
    if (!in) throw pm::IoError("cannot open outcome file: " + spec.substr(6));
    std::vector<int> seq;
    std::string tok;
    while (in >> tok) {
      std::stringstream ss(tok);
      std::string cell;
      while (std::getline(ss, cell, ','))
        if (!cell.empty()) seq.push_back(std::stoi(cell) - 1);
    }
    return pm::Adversary::fixed(std::move(seq));
  }
  throw pm::Error("adversary spec must be iid:<mu-csv> or fixed:<file>, got " + spec);
}

json witness_json(const pm::EdgeWitness& w) {
  json entries = json::array();
  for (const auto& [action, sid, value] : w.entries)
    entries.push_back({{"action", action + 1}, {"signal", sid}, {"value", value}});
  return {{"edge", {w.edge.first + 1, w.edge.second + 1}},
          {"feasible", w.feasible},
          {"residual", w.residual},
          {"sup_norm", w.sup_norm},
          {"entries", entries}};
}

int cmd_classify(const std::string& game_spec, bool as_json) {
  const pm::Game game = pm::load_game_spec(game_spec);
  const pm::GameClassification cls = pm::classify_game(game);
  if (as_json) {
    json j;
    j["game"] = game.name;
    j["k"] = game.k;
    j["d"] = game.d;
    j["m"] = game.m;
    j["category"] = pm::to_string(cls.category);
    j["locally_observable"] = cls.locally_observable;
    j["globally_observable"] = cls.globally_observable;
    j["degenerate"] = cls.degenerate;
    j["has_duplicates"] = cls.has_duplicates;
    j["numerically_marginal"] = cls.numerically_marginal;
    for (int a : cls.actions.pareto) j["pareto"].push_back(a + 1);
    for (int a : cls.actions.degenerate) j["degenerate_actions"].push_back(a + 1);
    for (int a : cls.actions.dominated) j["dominated"].push_back(a + 1);
    j["cell_dimensions"] = cls.actions.cell_dimension;
    for (const auto& [a, b] : cls.actions.duplicates) j["duplicates"].push_back({a + 1, b + 1});
    j["edges"] = json::array();
    for (const auto& [a, b] : cls.graph.edges) j["edges"].push_back({a + 1, b + 1});
    j["local_witnesses"] = json::array();
    for (const auto& w : cls.local.witnesses) j["local_witnesses"].push_back(witness_json(w));
    j["global_witnesses"] = json::array();
    for (const auto& w : cls.global.witnesses) j["global_witnesses"].push_back(witness_json(w));
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "game: " << game.name << "  (k=" << game.k << " d=" << game.d << " m=" << game.m
            << ")\n";
  std::cout << "category: " << pm::to_string(cls.category) << "\n";
  std::cout << "locally observable: " << (cls.locally_observable ? "yes" : "no")
            << "   globally observable: " << (cls.globally_observable ? "yes" : "no") << "\n";
  std::cout << "degenerate: " << (cls.degenerate ? "yes" : "no")
            << "   duplicates: " << (cls.has_duplicates ? "yes" : "no")
            << "   numerically marginal: " << (cls.numerically_marginal ? "yes" : "no") << "\n";
  std::cout << "pareto:";
  for (int a : cls.actions.pareto) std::cout << ' ' << a + 1;
  std::cout << "\ncell dimensions:";
  for (int dim : cls.actions.cell_dimension) std::cout << ' ' << dim;
  std::cout << "\nneighbour edges:";
  for (const auto& [a, b] : cls.graph.edges) std::cout << " (" << a + 1 << "," << b + 1 << ")";
  std::cout << "\n";
  for (const auto& w : cls.local.witnesses) {
    std::cout << "local witness (" << w.edge.first + 1 << "," << w.edge.second + 1
              << "): " << (w.feasible ? "feasible" : "infeasible") << " residual " << fmt(w.residual)
              << " sup " << fmt(w.sup_norm) << "\n";
  }
  return 0;
}

int cmd_estimators(const std::string& game_spec) {
  const pm::Game game = pm::load_game_spec(game_spec);
  const pm::GameGeometry geo = pm::GameGeometry::compute(game);
  std::cout << "game: " << game.name << "  category: " << pm::to_string(geo.cls.category) << "\n";
  for (const auto& [a, b] : geo.cls.graph.edges) {
    std::cout << "edge (" << a + 1 << "," << b + 1 << "):\n";
    try {
      const pm::EdgeEstimator est = pm::local_edge_estimator(game, {a, b});
      std::cout << "  local: sup_norm " << fmt(est.sup_norm) << " (bound m/2 = " << fmt(game.m / 2.0)
                << ") residual " << fmt(est.residual) << "\n";
      for (int c : est.support)
        for (int sid : game.action_signals[c])
          if (est.w(c, sid) != 0.0)
            std::cout << "    w(" << c + 1 << "," << game.signal_label(sid)
                      << ") = " << fmt(est.w(c, sid)) << "\n";
    } catch (const pm::Error& e) {
      std::cout << "  local: unavailable (" << e.what() << ")\n";
    }
    try {
      const pm::EdgeEstimator est = pm::global_edge_estimator(game, {a, b});
      std::cout << "  global: sup_norm " << fmt(est.sup_norm) << " residual " << fmt(est.residual)
                << "\n";
    } catch (const pm::Error& e) {
      std::cout << "  global: unavailable (" << e.what() << ")\n";
    }
  }
  if (geo.global_estimator) {
    const auto rep = pm::verify_unbiased(game, *geo.global_estimator, geo.pareto);
    std::cout << "chained global estimator: beta = " << fmt(geo.beta)
              << ", c_G = " << fmt(geo.c_g) << ", unbiasedness residual " << fmt(rep.max_violation)
              << "\n";
  }
  return 0;
}

int cmd_opt(const std::string& game_spec, double eta, const std::string& q_csv,
            const std::string& path, bool hp, double delta, bool as_json) {
  const pm::Game game = pm::load_game_spec(game_spec);
  const pm::GameGeometry geo = pm::GameGeometry::compute(game);
  pm::SimplexVector q = [&] {
    if (q_csv.empty()) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(game.k);
      for (int a : geo.pareto) v(a) = 1.0 / geo.pareto.size();
      return pm::SimplexVector(std::move(v), pm::Side::Actions);
    }
    return parse_simplex(q_csv, pm::Side::Actions);
  }();
  pm::SolverSettings settings;
  settings.path = path == "exact" ? pm::SolverSettings::Path::Exact : pm::SolverSettings::Path::Socp;

  if (hp) {
    const pm::HpSolution sol = pm::solve_hp(q, eta, game, geo, settings);
    if (as_json) {
      json j;
      j["lambda"] = sol.lambda;
      j["value"] = sol.value;
      j["delta"] = delta;
      j["witness_source"] = pm::to_string(sol.witness_source);
      for (int a = 0; a < game.k; ++a) j["p"].push_back(sol.p[a]);
      j["g_sup_norm"] = sol.G.sup_norm;
      j["bisection_points"] = sol.trace.size();
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "hp value: " << fmt(sol.value) << "  lambda: " << fmt(sol.lambda)
                << "  source: " << pm::to_string(sol.witness_source) << "\n";
      std::cout << "p:";
      for (int a = 0; a < game.k; ++a) std::cout << ' ' << fmt(sol.p[a]);
      std::cout << "\n|G|_inf: " << fmt(sol.G.sup_norm) << "  bisection points: " << sol.trace.size()
                << "\n";
    }
    return 0;
  }

  const pm::ExplorationSolution sol = pm::solve_exploration(q, eta, game, geo, settings);
  if (as_json) {
    json j;
    j["value"] = sol.value;
    j["witness_source"] = pm::to_string(sol.witness_source);
    j["solver_converged"] = sol.solver_converged;
    j["fallback_warning"] = sol.fallback_warning;
    if (std::isfinite(sol.solver_value)) j["solver_value"] = sol.solver_value;
    for (int a = 0; a < game.k; ++a) j["p"].push_back(sol.p[a]);
    j["g_sup_norm"] = sol.G.sup_norm;
    j["residuals"] = {{"eq", sol.feasibility.eq_residual},
                      {"cone_margin", sol.feasibility.cone_margin},
                      {"unbiasedness", sol.feasibility.unbiasedness}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "value: " << fmt(sol.value) << "  source: " << pm::to_string(sol.witness_source)
              << (sol.fallback_warning ? "  [warning: solver fell back to witness]" : "") << "\n";
    std::cout << "p:";
    for (int a = 0; a < game.k; ++a) std::cout << ' ' << fmt(sol.p[a]);
    std::cout << "\n|G|_inf: " << fmt(sol.G.sup_norm) << "\n";
    std::cout << "residuals: eq " << fmt(sol.feasibility.eq_residual) << ", cone margin "
              << fmt(sol.feasibility.cone_margin) << ", unbiasedness "
              << fmt(sol.feasibility.unbiasedness) << "\n";
  }
  return 0;
}

int cmd_run(const std::string& game_spec, const std::string& algo, std::optional<double> eta,
            std::optional<double> B, double delta, double gamma, const std::string& adversary_spec,
            int n, int reps, std::uint64_t seed, const std::string& out) {
  const pm::Game game = pm::load_game_spec(game_spec);
  const pm::GameGeometry geo = pm::GameGeometry::compute(game);
  pm::AlgorithmSpec spec;
  spec.name = algo;
  spec.eta = eta;
  spec.B = B;
  spec.delta = delta;
  spec.exp3_gamma = gamma;
  const pm::Adversary adversary = parse_adversary(adversary_spec);

  if (reps == 1) {
    auto policy = pm::make_policy(spec, game, geo);
    const pm::RegretTrace trace = pm::run_episode(game, *policy, adversary, n, seed, geo.pareto);
    pm::emit_trace_csv(trace, game, out);
    std::cout << "final regret: " << fmt(trace.final_regret)
              << "  best fixed action: " << trace.best_action + 1
              << (trace.aborted ? "  [aborted: " + trace.abort_reason + "]" : "") << "\n";
    return trace.aborted ? 1 : 0;
  }

  std::vector<pm::EpisodeSummary> summaries(reps);
  std::vector<std::string> errors;
  std::mutex mu;
  pm::parallel_for(reps, [&](int rep) {
    const std::uint64_t rep_seed = seed + static_cast<std::uint64_t>(rep);
    pm::EpisodeSummary s;
    s.replication = rep;
    s.seed = rep_seed;
    try {
      auto policy = pm::make_policy(spec, game, geo);
      const pm::RegretTrace tr = pm::run_episode(game, *policy, adversary, n, rep_seed, geo.pareto);
      s.final_regret = tr.final_regret;
      s.aborted = tr.aborted;
    } catch (const std::exception& e) {
      s.aborted = true;
      std::lock_guard<std::mutex> lock(mu);
      errors.push_back(e.what());
    }
    summaries[rep] = s;
  });
  pm::emit_summary_csv(summaries, out);
  double mean = 0.0;
  int ok = 0;
  for (const auto& s : summaries)
    if (!s.aborted) {
      mean += s.final_regret;
      ++ok;
    }
  std::cout << "replications: " << reps << " (" << ok << " ok), mean final regret "
            << fmt(ok ? mean / ok : 0.0) << "\n";
  for (const auto& e : errors) std::cerr << "error: " << e << "\n";
  return ok == reps ? 0 : 1;
}

int cmd_sweep(const std::string& config_path) {
  const pm::ExperimentConfig cfg = pm::load_experiment_config(config_path);
  const pm::SweepResult result = pm::sweep(cfg);
  if (!cfg.out_path.empty()) pm::emit_sweep_csv(result.rows, cfg.out_path);
  for (const auto& row : result.rows)
    std::cout << "mu=" << fmt(row.mu) << " mean_regret=" << fmt(row.mean_regret) << " (reps "
              << row.reps << ")\n";
  for (const auto& f : result.failures) std::cerr << "failure: " << f << "\n";
  return result.failures.empty() ? 0 : 1;
}

int cmd_bound(const std::string& game_spec, int n) {
  const pm::Game game = pm::load_game_spec(game_spec);
  const pm::GameGeometry geo = pm::GameGeometry::compute(game);
  std::cout << "game: " << game.name << "  category: " << pm::to_string(geo.cls.category) << "\n";
  switch (geo.cls.category) {
    case pm::GameCategory::Trivial:
      std::cout << "trivial bound: 0\n";
      break;
    case pm::GameCategory::Easy:
      std::cout << "easy bound 2 k^{3/2} m sqrt(3 n log k): "
                << fmt(pm::theoretical_bound(pm::BoundKind::Easy, game.k, game.m, n)) << "\n";
      break;
    case pm::GameCategory::Hard:
      std::cout << "hard bound 3 (c_G n / 2)^{2/3} (log k)^{1/3} with c_G = " << fmt(geo.c_g)
                << ": " << fmt(pm::theoretical_bound(pm::BoundKind::Hard, game.k, game.m, n, geo.c_g))
                << "\n";
      break;
    case pm::GameCategory::Hopeless:
      std::cout << "hopeless: no sublinear regret bound exists\n";
      return 1;
  }
  if (pm::is_self_revealing(game))
    std::cout << "bandit bound sqrt(2 n k log k): "
              << fmt(pm::theoretical_bound(pm::BoundKind::Bandit, game.k, game.m, n)) << "\n";
  if (pm::is_full_information(game))
    std::cout << "full-information bound sqrt(2 n log k): "
              << fmt(pm::theoretical_bound(pm::BoundKind::FullInfo, game.k, game.m, n)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite partial monitoring toolkit"};
  app.require_subcommand(1);

  std::string game_spec, q_csv, solver_path = "socp", adversary_spec, out = "out.csv",
              config_path, algo;
  double eta = 0.0, delta = 0.05, gamma = 0.0;
  std::optional<double> opt_eta, opt_B;
  int n = 2000, reps = 1;
  std::uint64_t seed = 1;
  bool as_json = false, hp = false;

  auto* classify = app.add_subcommand("classify", "cell decomposition and game category");
  classify->add_option("game", game_spec)->required();
  classify->add_flag("--json", as_json);

  auto* estimators = app.add_subcommand("estimators", "per-edge loss-difference estimators");
  estimators->add_option("game", game_spec)->required();

  auto* opt = app.add_subcommand("opt", "solve the per-round exploration program");
  opt->add_option("game", game_spec)->required();
  opt->add_option("--eta", eta)->required();
  opt->add_option("--q", q_csv, "proposal distribution (csv over actions)");
  opt->add_option("--path", solver_path)->check(CLI::IsMember({"socp", "exact"}));
  opt->add_flag("--hp", hp, "solve the high-probability program");
  opt->add_option("--delta", delta);
  opt->add_flag("--json", as_json);

  auto* run = app.add_subcommand("run", "run episodes and emit a trace or summary CSV");
  run->add_option("--game", game_spec)->required();
  run->add_option("--algo", algo)->required()->check(
      CLI::IsMember({"fixed", "adaptive", "hp", "hedge", "exp3"}));
  run->add_option("--eta", [&opt_eta](const std::vector<std::string>& v) {
    opt_eta = std::stod(v[0]);
    return true;
  }, "learning rate");
  run->add_option("--B", [&opt_B](const std::vector<std::string>& v) {
    opt_B = std::stod(v[0]);
    return true;
  }, "adaptive learning-rate floor parameter");
  run->add_option("--delta", delta);
  run->add_option("--gamma", gamma, "exp3 exploration mix");
  run->add_option("--adversary", adversary_spec)->required();
  run->add_option("--n", n);
  run->add_option("--reps", reps);
  run->add_option("--seed", seed);
  run->add_option("--out", out);

  auto* sweepcmd = app.add_subcommand("sweep", "replication sweep from a JSON config");
  sweepcmd->add_option("--config", config_path)->required();

  auto* bound = app.add_subcommand("bound", "theoretical regret bounds for a game");
  bound->add_option("--game", game_spec)->required();
  bound->add_option("--n", n);

  CLI11_PARSE(app, argc, argv);

  try {
    if (classify->parsed()) return cmd_classify(game_spec, as_json);
    if (estimators->parsed()) return cmd_estimators(game_spec);
    if (opt->parsed()) return cmd_opt(game_spec, eta, q_csv, solver_path, hp, delta, as_json);
    if (run->parsed())
      return cmd_run(game_spec, algo, opt_eta, opt_B, delta, gamma, adversary_spec, n, reps, seed,
                     out);
    if (sweepcmd->parsed()) return cmd_sweep(config_path);
    if (bound->parsed()) return cmd_bound(game_spec, n);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

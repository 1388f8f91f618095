#include "pm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "pm/optimizer.hpp"

namespace pm {

namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double Rng::uniform() {
  return (state_() >> 11) * 0x1.0p-53;
}

int Rng::sample(const Eigen::VectorXd& probabilities) {
  const double u = uniform() * probabilities.sum();
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < probabilities.size(); ++i) {
    if (probabilities(i) <= 0.0) continue;
    last_positive = i;
    acc += probabilities(i);
    if (u < acc) return i;
  }
  if (last_positive < 0) throw Error("cannot sample from an all-zero distribution");
  return last_positive;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream_tag) {
  return splitmix64(seed ^ splitmix64(stream_tag));
}

Adversary Adversary::iid(SimplexVector mu) {
  if (mu.side() != Side::Outcomes) throw DimensionMismatch("iid adversary needs an outcome distribution");
  Adversary a;
  a.kind = Kind::Iid;
  a.mu = std::move(mu);
  return a;
}

Adversary Adversary::fixed(std::vector<int> sequence) {
  Adversary a;
  a.kind = Kind::Fixed;
  a.sequence = std::move(sequence);
  return a;
}

std::vector<int> Adversary::realize(int n, std::uint64_t seed) const {
  std::vector<int> out;
  out.reserve(n);
  if (kind == Kind::Fixed) {
    if (static_cast<int>(sequence.size()) < n)
      throw Error("fixed adversary has " + std::to_string(sequence.size()) +
                  " outcomes, episode needs " + std::to_string(n));
    out.assign(sequence.begin(), sequence.begin() + n);
    return out;
  }
  Rng rng(seed);
  for (int t = 0; t < n; ++t) out.push_back(rng.sample(mu->entries()));
  return out;
}

RegretTrace run_episode(const Game& game, Policy& policy, const Adversary& adversary, int n,
                        std::uint64_t seed, const std::vector<int>& pareto) {
  const auto start = std::chrono::steady_clock::now();
  RegretTrace trace;
  trace.n = n;
  trace.seed = seed;
  trace.algo = policy.name();
  trace.game_name = game.name;

  const std::vector<int> outcomes = adversary.realize(n, stream_seed(seed, kAdversaryStream));
  for (int x : outcomes)
    if (x < 0 || x >= game.d)
      throw Error("adversary outcome " + std::to_string(x + 1) + " outside [1," +
                  std::to_string(game.d) + "]");

  Rng rng(stream_seed(seed, kPolicyStream));
  Eigen::VectorXd fixed_losses = Eigen::VectorXd::Zero(game.k);
  double learner_loss = 0.0;

  for (int t = 0; t < n; ++t) {
    int action = -1;
    try {
      SimplexVector p = policy.propose();
      action = rng.sample(p.entries());
      const int x = outcomes[t];
      policy.update(action, game.signals(action, x));
    } catch (const Error& e) {
      trace.aborted = true;
      trace.abort_reason = e.what();
      break;
    }
    const int x = outcomes[t];
    learner_loss += game.losses(action, x);
    fixed_losses += game.losses.col(x);

    TraceRow row;
    row.t = t + 1;
    row.action = action + 1;
    row.outcome = x + 1;
    row.signal = game.signals(action, x);
    row.loss = game.losses(action, x) * game.scale;
    if (!policy.history().empty()) {
      row.eta = policy.history().back().eta;
      row.V = policy.history().back().V;
    }
    row.regret = (learner_loss - fixed_losses.minCoeff()) * game.scale;
    trace.rows.push_back(row);
  }

  if (!trace.rows.empty()) trace.final_regret = trace.rows.back().regret;
  // Best fixed action in hindsight; ties prefer Pareto members, then the
  // lowest index.
  const double best = fixed_losses.minCoeff();
  int chosen = -1;
  for (int a = 0; a < game.k; ++a) {
    if (fixed_losses(a) > best + 1e-12) continue;
    const bool a_pareto = std::find(pareto.begin(), pareto.end(), a) != pareto.end();
    if (chosen < 0) {
      chosen = a;
      continue;
    }
    const bool c_pareto = std::find(pareto.begin(), pareto.end(), chosen) != pareto.end();
    if (a_pareto && !c_pareto) chosen = a;
  }
  trace.best_action = chosen;
  trace.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

double theoretical_bound(BoundKind kind, int k, int m, int n, double c_g) {
  if (n <= 0) return 0.0;
  const double logk = std::log(double(k));
  switch (kind) {
    case BoundKind::Trivial:
      return 0.0;
    case BoundKind::Easy:
      return 2.0 * std::pow(double(k), 1.5) * m * std::sqrt(3.0 * n * logk);
    case BoundKind::Hard:
      return 3.0 * std::pow(c_g * n / 2.0, 2.0 / 3.0) * std::pow(logk, 1.0 / 3.0);
    case BoundKind::Bandit:
      return std::sqrt(2.0 * n * k * logk);
    case BoundKind::FullInfo:
      return std::sqrt(2.0 * n * logk);
  }
  throw Error("no bound for this game category");
}

void parallel_for(int count, const std::function<void(int)>& fn) {
  const int workers =
      std::max(1, std::min<int>(count, static_cast<int>(std::thread::hardware_concurrency())));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, const Game& game,
                                    const GameGeometry& geometry) {
  if (spec.name == "fixed") {
    if (!spec.eta) throw Error("algorithm 'fixed' needs --eta");
    return make_fixed_policy(game, geometry, *spec.eta);
  }
  if (spec.name == "adaptive") return make_adaptive_policy(game, geometry, spec.B);
  if (spec.name == "hp") {
    if (!spec.eta) throw Error("algorithm 'hp' needs --eta");
    return make_hp_policy(game, geometry, *spec.eta, spec.delta);
  }
  if (spec.name == "hedge") {
    if (!spec.eta) throw Error("algorithm 'hedge' needs --eta");
    return make_hedge_policy(game, *spec.eta);
  }
  if (spec.name == "exp3") {
    if (!spec.eta) throw Error("algorithm 'exp3' needs --eta");
    return make_exp3_policy(game, *spec.eta, spec.exp3_gamma);
  }
  throw Error("unknown algorithm: " + spec.name);
}

namespace {

double quantile_type7(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - lo;
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

std::optional<double> cmp_cost_of(const std::string& spec) {
  const std::string prefix = "builtin:cmp:";
  if (spec.rfind(prefix, 0) == 0) return std::stod(spec.substr(prefix.size()));
  return std::nullopt;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("parse failure in " + path + ": " + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.game_spec = j.at("game").get<std::string>();
    const auto& ja = j.at("algo");
    cfg.algo.name = ja.at("name").get<std::string>();
    if (ja.contains("eta")) cfg.algo.eta = ja["eta"].get<double>();
    if (ja.contains("B")) cfg.algo.B = ja["B"].get<double>();
    if (ja.contains("delta")) cfg.algo.delta = ja["delta"].get<double>();
    if (ja.contains("gamma")) cfg.algo.exp3_gamma = ja["gamma"].get<double>();
    const auto& jadv = j.at("adversary");
    const std::string kind = jadv.at("kind").get<std::string>();
    if (kind == "iid") {
      if (jadv.contains("mu_values"))
        cfg.mu_values = jadv["mu_values"].get<std::vector<double>>();
      else {
        const auto muv = jadv.at("mu").get<std::vector<double>>();
        cfg.mu = SimplexVector(Eigen::Map<const Eigen::VectorXd>(muv.data(), muv.size()),
                               Side::Outcomes);
      }
    } else if (kind == "fixed") {
      for (int x : jadv.at("outcomes").get<std::vector<int>>()) cfg.fixed_outcomes.push_back(x - 1);
    } else {
      throw IoError("unknown adversary kind in " + path + ": " + kind);
    }
    cfg.n = j.at("n").get<int>();
    cfg.replications = j.value("replications", 1);
    cfg.seed_base = j.value("seed", 1ULL);
    cfg.out_path = j.value("out", "");
    if (cfg.n < 1 || cfg.replications < 1)
      throw IoError("config needs n >= 1 and replications >= 1");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed config " + path + ": " + e.what());
  }
}

SweepResult sweep(const ExperimentConfig& config) {
  const Game game = load_game_spec(config.game_spec);
  const GameGeometry geometry = GameGeometry::compute(game);
  const std::optional<double> cost = cmp_cost_of(config.game_spec);

  struct Point {
    double mu = std::numeric_limits<double>::quiet_NaN();
    Adversary adversary;
  };
  std::vector<Point> points;
  if (!config.mu_values.empty()) {
    if (game.d != 2) throw Error("mu sweeps need a two-outcome game");
    for (double mu : config.mu_values) {
      Eigen::VectorXd v(2);
      v << mu, 1.0 - mu;
      points.push_back({mu, Adversary::iid(SimplexVector(v, Side::Outcomes))});
    }
  } else if (config.mu) {
    points.push_back({config.mu->entries()(0), Adversary::iid(*config.mu)});
  } else if (!config.fixed_outcomes.empty()) {
    points.push_back({std::numeric_limits<double>::quiet_NaN(),
                      Adversary::fixed(config.fixed_outcomes)});
  } else {
    throw Error("experiment config has no adversary");
  }

  const int npoints = static_cast<int>(points.size());
  const int reps = config.replications;
  std::vector<std::vector<double>> regret(npoints);
  for (auto& v : regret) v.assign(reps, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> failures;
  std::mutex failures_mutex;

  parallel_for(npoints * reps, [&](int task) {
    const int pt = task / reps;
    const int rep = task % reps;
    const std::uint64_t seed = config.seed_base + static_cast<std::uint64_t>(rep);
    try {
      auto policy = make_policy(config.algo, game, geometry);
      RegretTrace tr =
          run_episode(game, *policy, points[pt].adversary, config.n, seed, geometry.pareto);
      if (tr.aborted) throw Error("episode aborted: " + tr.abort_reason);
      regret[pt][rep] = tr.final_regret;
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failures_mutex);
      failures.push_back("point " + std::to_string(pt) + " rep " + std::to_string(rep) + ": " +
                         e.what());
    }
  });

  SweepResult out;
  out.failures = std::move(failures);
  for (int pt = 0; pt < npoints; ++pt) {
    std::vector<double> ok;
    for (double r : regret[pt])
      if (std::isfinite(r)) ok.push_back(r);
    SweepRow row;
    row.mu = points[pt].mu;
    row.c = cost.value_or(std::numeric_limits<double>::quiet_NaN());
    row.n = config.n;
    row.algo = config.algo.name;
    row.reps = static_cast<int>(ok.size());
    if (!ok.empty()) {
      row.mean_regret = std::accumulate(ok.begin(), ok.end(), 0.0) / ok.size();
      row.q25 = quantile_type7(ok, 0.25);
      row.q75 = quantile_type7(ok, 0.75);
    } else {
      row.mean_regret = row.q25 = row.q75 = std::numeric_limits<double>::quiet_NaN();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

void emit_trace_csv(const RegretTrace& trace, const Game& game, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "# partmon trace v1\n";
  out << "# game=" << trace.game_name << " algo=" << trace.algo << " n=" << trace.n
      << " seed=" << trace.seed << " best_action=" << trace.best_action + 1
      << " final_regret=" << fmt9(trace.final_regret) << " aborted=" << (trace.aborted ? 1 : 0)
      << "\n";
  if (trace.aborted) out << "# abort_reason=" << trace.abort_reason << "\n";
  out << "# wall_time_ms=" << fmt9(trace.wall_time_ms) << "\n";
  out << "t,action,outcome,signal,loss,eta,V,regret\n";
  for (const TraceRow& r : trace.rows) {
    out << r.t << ',' << r.action << ',' << r.outcome << ',' << game.signal_label(r.signal) << ','
        << fmt9(r.loss) << ',' << fmt9(r.eta) << ',' << fmt9(r.V) << ',' << fmt9(r.regret) << "\n";
  }
  if (!out) throw IoError("write failure: " + path);
}

void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "mu,c,n,algo,reps,mean_regret,q25,q75\n";
  for (const SweepRow& r : rows) {
    out << fmt9(r.mu) << ',' << fmt9(r.c) << ',' << r.n << ',' << r.algo << ',' << r.reps << ','
        << fmt9(r.mean_regret) << ',' << fmt9(r.q25) << ',' << fmt9(r.q75) << "\n";
  }
  if (!out) throw IoError("write failure: " + path);
}

void emit_summary_csv(const std::vector<EpisodeSummary>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  out << "rep,seed,final_regret,aborted\n";
  for (const EpisodeSummary& r : rows) {
    out << r.replication << ',' << r.seed << ',' << fmt9(r.final_regret) << ','
        << (r.aborted ? 1 : 0) << "\n";
  }
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace pm

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pm/game.hpp"
#include "pm/learner.hpp"

namespace pm {

// Deterministic random stream: mt19937_64 with a documented contract that
// the same seed yields the same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  double uniform();  // [0, 1)
  int sample(const Eigen::VectorXd& probabilities);  // inverse CDF

 private:
  std::mt19937_64 state_;
};

// Derives independent sub-streams from one per-replication seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream_tag);
inline constexpr std::uint64_t kPolicyStream = 0x706f6c696379ULL;     // "policy"
inline constexpr std::uint64_t kAdversaryStream = 0x616476657273ULL;  // "advers"

struct Adversary {
  enum class Kind { Iid, Fixed };
  Kind kind = Kind::Iid;
  std::optional<SimplexVector> mu;  // iid outcome distribution
  std::vector<int> sequence;        // fixed outcomes, 0-based

  static Adversary iid(SimplexVector mu);
  static Adversary fixed(std::vector<int> sequence);
  // Materializes the oblivious outcome sequence before round one.
  std::vector<int> realize(int n, std::uint64_t seed) const;
};

struct TraceRow {
  int t = 0;  // 1-based round
  int action = 0;
  int outcome = 0;
  int signal = 0;
  double loss = 0.0;    // original units (scale applied)
  double eta = 0.0;
  double V = 0.0;
  double regret = 0.0;  // prefix regret against the best fixed action so far
};

struct RegretTrace {
  std::vector<TraceRow> rows;
  int n = 0;
  int best_action = -1;  // a* at the horizon (1-based in CSV output)
  double final_regret = 0.0;
  bool aborted = false;
  std::string abort_reason;
  std::uint64_t seed = 0;
  std::string algo;
  std::string game_name;
  double wall_time_ms = 0.0;
};

// Runs one episode.  Outcomes are materialized before round one; the policy
// sees only signals.  Policy exceptions abort the episode and are reported
// on the partial trace.  `pareto` feeds the a* tie-break (toward Pareto,
// then lowest index).
RegretTrace run_episode(const Game& game, Policy& policy, const Adversary& adversary, int n,
                        std::uint64_t seed, const std::vector<int>& pareto = {});

// Closed-form reference regret bounds.
enum class BoundKind { Trivial, Easy, Hard, Bandit, FullInfo };
double theoretical_bound(BoundKind kind, int k, int m, int n, double c_g = 1.0);

struct AlgorithmSpec {
  std::string name;  // fixed | adaptive | hp | hedge | exp3
  std::optional<double> eta;
  std::optional<double> B;
  double delta = 0.05;
  double exp3_gamma = 0.0;
};

std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec, const Game& game,
                                    const GameGeometry& geometry);

struct ExperimentConfig {
  std::string game_spec;             // path or builtin:cmp:<c>
  AlgorithmSpec algo;
  std::vector<double> mu_values;     // iid Bernoulli sweep points (d = 2 games)
  std::optional<SimplexVector> mu;   // single iid point for general d
  std::vector<int> fixed_outcomes;   // fixed adversary (exclusive with mu)
  int n = 0;
  int replications = 1;
  std::uint64_t seed_base = 1;
  std::string out_path;
};

ExperimentConfig load_experiment_config(const std::string& path);

struct SweepRow {
  double mu = 0.0;
  double c = 0.0;  // cmp cost when applicable, NaN otherwise
  int n = 0;
  std::string algo;
  int reps = 0;
  double mean_regret = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

// Runs (point, replication) episodes concurrently; per-point failures are
// recorded and the sweep continues.  Rows come back sorted by mu.
struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> failures;
};
SweepResult sweep(const ExperimentConfig& config);

void emit_trace_csv(const RegretTrace& trace, const Game& game, const std::string& path);
void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

// Replication summary for `pm run` with more than one replication.
struct EpisodeSummary {
  int replication = 0;
  std::uint64_t seed = 0;
  double final_regret = 0.0;
  bool aborted = false;
};
void emit_summary_csv(const std::vector<EpisodeSummary>& rows, const std::string& path);

// Maps thread-parallel work over [0, count); order-independent.
void parallel_for(int count, const std::function<void(int)>& fn);

}  // namespace pm

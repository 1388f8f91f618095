#include "pm/learner.hpp"

#include <cmath>

namespace pm {

SimplexVector exp_weights_distribution(const Eigen::VectorXd& cumulative, double eta,
                                       const std::vector<int>& support) {
  if (!(eta > 0.0)) throw Error("exp_weights_distribution needs eta > 0");
  if (support.empty()) throw Error("exp_weights_distribution needs a non-empty support");
  double best = -std::numeric_limits<double>::infinity();
  for (int a : support) best = std::max(best, -eta * cumulative(a));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(cumulative.size());
  double total = 0.0;
  for (int a : support) {
    w(a) = std::exp(-eta * cumulative(a) - best);
    total += w(a);
  }
  return SimplexVector(w / total, Side::Actions);
}

namespace {

class ExpPmPolicy : public Policy {
 public:
  enum class Mode { Fixed, Adaptive, Hp };

  ExpPmPolicy(const Game& game, const GameGeometry& geometry, Mode mode, double eta_or_b,
              double delta, SolverSettings settings)
      : game_(game), geometry_(geometry), mode_(mode), delta_(delta), settings_(std::move(settings)),
        cumulative_(Eigen::VectorXd::Zero(game.k)) {
    if (geometry_.pareto.empty()) throw Error("game has no Pareto actions");
    if (mode_ == Mode::Adaptive) {
      B_ = eta_or_b;
      if (!(B_ > 0.0)) throw Error("adaptive policy needs B > 0");
    } else {
      eta_ = eta_or_b;
      if (!(eta_ > 0.0)) throw Error("policy needs eta > 0");
      if (mode_ == Mode::Hp && !(eta_ < 0.5)) throw Error("hp policy needs eta in (0, 1/2)");
    }
  }

  SimplexVector propose() override {
    const double eta = current_eta();
    SimplexVector q = exp_weights_distribution(cumulative_, eta, geometry_.pareto);
    StepRecord rec;
    rec.Q = q.entries();
    rec.eta = eta;
    if (mode_ == Mode::Hp) {
      HpSolution sol = solve_hp(q, eta, game_, geometry_, settings_, lambda_hint_);
      lambda_hint_ = sol.lambda;
      rec.lambda = sol.lambda;
      rec.V = std::max(0.0, sol.value);
      rec.source = sol.witness_source;
      rec.P = sol.p.entries();
      pending_G_ = std::move(sol.G);
      pending_ = std::move(rec);
      return sol.p;
    }
    ExplorationSolution sol = solve_exploration(q, eta, game_, geometry_, settings_);
    rec.V = std::max(0.0, sol.value);
    rec.source = sol.witness_source;
    rec.P = sol.p.entries();
    pending_G_ = std::move(sol.G);
    pending_ = std::move(rec);
    return sol.p;
  }

  void update(int action, int signal_id) override {
    if (!pending_) throw Error("update() called before propose()");
    StepRecord rec = std::move(*pending_);
    pending_.reset();
    const double p_a = rec.P(action);
    if (!(p_a > 0.0)) throw Error("sampled action has zero probability");
    rec.yhat = pending_G_.value(action, signal_id) / p_a;
    cumulative_ += rec.yhat;
    v_sum_ += rec.V;
    history_.push_back(std::move(rec));
  }

  std::string name() const override {
    switch (mode_) {
      case Mode::Fixed: return "fixed";
      case Mode::Adaptive: return "adaptive";
      case Mode::Hp: return "hp";
    }
    return "?";
  }

  const std::vector<StepRecord>& history() const override { return history_; }

 private:
  double current_eta() const {
    if (mode_ != Mode::Adaptive) return eta_;
    return std::min(1.0 / B_, std::sqrt(std::log(double(game_.k)) / (1.0 + v_sum_)));
  }

  const Game& game_;
  const GameGeometry& geometry_;
  Mode mode_;
  double eta_ = 0.0;
  double B_ = 0.0;
  double delta_ = 0.0;
  SolverSettings settings_;
  Eigen::VectorXd cumulative_;
  double v_sum_ = 0.0;
  std::optional<double> lambda_hint_;
  std::optional<StepRecord> pending_;
  EstimationFunction pending_G_;
  std::vector<StepRecord> history_;
};

class HedgePolicy : public Policy {
 public:
  HedgePolicy(const Game& game, double eta)
      : game_(game), eta_(eta), cumulative_(Eigen::VectorXd::Zero(game.k)) {
    if (!(eta > 0.0)) throw Error("hedge needs eta > 0");
    if (!is_full_information(game))
      throw Error("hedge baseline needs a full-information game");
    for (int a = 0; a < game.k; ++a) support_.push_back(a);
  }

  SimplexVector propose() override {
    SimplexVector q = exp_weights_distribution(cumulative_, eta_, support_);
    StepRecord rec;
    rec.Q = q.entries();
    rec.P = q.entries();
    rec.eta = eta_;
    pending_ = std::move(rec);
    return q;
  }

  void update(int action, int signal_id) override {
    StepRecord rec = std::move(*pending_);
    pending_.reset();
    rec.yhat = column_for_signal(game_, action, signal_id);
    cumulative_ += rec.yhat;
    history_.push_back(std::move(rec));
  }

  std::string name() const override { return "hedge"; }
  const std::vector<StepRecord>& history() const override { return history_; }

 private:
  const Game& game_;
  double eta_;
  Eigen::VectorXd cumulative_;
  std::vector<int> support_;
  std::optional<StepRecord> pending_;
  std::vector<StepRecord> history_;
};

class Exp3Policy : public Policy {
 public:
  Exp3Policy(const Game& game, double eta, double gamma)
      : game_(game), eta_(eta), gamma_(gamma), cumulative_(Eigen::VectorXd::Zero(game.k)) {
    if (!(eta > 0.0)) throw Error("exp3 needs eta > 0");
    if (gamma < 0.0 || gamma >= 1.0) throw Error("exp3 needs gamma in [0,1)");
    if (!is_self_revealing(game))
      throw Error("exp3 baseline needs a bandit-style game (signal reveals own loss)");
    for (int a = 0; a < game.k; ++a) support_.push_back(a);
  }

  SimplexVector propose() override {
    SimplexVector q = exp_weights_distribution(cumulative_, eta_, support_);
    Eigen::VectorXd p = (1.0 - gamma_) * q.entries() +
                        Eigen::VectorXd::Constant(game_.k, gamma_ / game_.k);
    StepRecord rec;
    rec.Q = q.entries();
    rec.P = p;
    rec.eta = eta_;
    pending_ = std::move(rec);
    return SimplexVector(std::move(p), Side::Actions);
  }

  void update(int action, int signal_id) override {
    StepRecord rec = std::move(*pending_);
    pending_.reset();
    const double loss = loss_for_signal(game_, action, signal_id);
    rec.yhat = Eigen::VectorXd::Zero(game_.k);
    rec.yhat(action) = loss / rec.P(action);
    cumulative_ += rec.yhat;
    history_.push_back(std::move(rec));
  }

  std::string name() const override { return "exp3"; }
  const std::vector<StepRecord>& history() const override { return history_; }

 private:
  const Game& game_;
  double eta_;
  double gamma_;
  Eigen::VectorXd cumulative_;
  std::vector<int> support_;
  std::optional<StepRecord> pending_;
  std::vector<StepRecord> history_;
};

}  // namespace

double default_adaptive_B(const Game& game, const GameGeometry& geometry) {
  if (geometry.cls.locally_observable)
    return 2.0 * game.m * game.k * game.k;  // keeps eta_t within the water-transfer condition
  return geometry.c_g * geometry.c_g;
}

std::unique_ptr<Policy> make_fixed_policy(const Game& game, const GameGeometry& geometry,
                                          double eta, SolverSettings settings) {
  return std::make_unique<ExpPmPolicy>(game, geometry, ExpPmPolicy::Mode::Fixed, eta, 0.0,
                                       std::move(settings));
}

std::unique_ptr<Policy> make_adaptive_policy(const Game& game, const GameGeometry& geometry,
                                             std::optional<double> B, SolverSettings settings) {
  const double b = B.value_or(default_adaptive_B(game, geometry));
  return std::make_unique<ExpPmPolicy>(game, geometry, ExpPmPolicy::Mode::Adaptive, b, 0.0,
                                       std::move(settings));
}

std::unique_ptr<Policy> make_hp_policy(const Game& game, const GameGeometry& geometry, double eta,
                                       double delta, SolverSettings settings) {
  return std::make_unique<ExpPmPolicy>(game, geometry, ExpPmPolicy::Mode::Hp, eta, delta,
                                       std::move(settings));
}

std::unique_ptr<Policy> make_hedge_policy(const Game& game, double eta) {
  return std::make_unique<HedgePolicy>(game, eta);
}

std::unique_ptr<Policy> make_exp3_policy(const Game& game, double eta, double gamma) {
  return std::make_unique<Exp3Policy>(game, eta, gamma);
}

}  // namespace pm

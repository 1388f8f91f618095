#include "pm/game.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace pm {

namespace {

constexpr double kSimplexTol = 1e-12;

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SimplexVector::SimplexVector(Eigen::VectorXd entries, Side side) : v_(std::move(entries)), side_(side) {
  if (v_.size() == 0) throw DimensionMismatch("simplex vector must be non-empty");
  for (Eigen::Index i = 0; i < v_.size(); ++i) {
    if (!(v_(i) >= 0.0)) throw Error("simplex entry " + std::to_string(i) + " is negative or NaN");
  }
  const double sum = v_.sum();
  if (std::abs(sum - 1.0) > kSimplexTol)
    throw Error("simplex entries sum to " + format_value(sum) + ", outside 1e-12 tolerance");
  v_ /= sum;
}

SimplexVector SimplexVector::renormalized(Eigen::VectorXd entries, Side side) {
  if (entries.size() == 0) throw DimensionMismatch("simplex vector must be non-empty");
  for (Eigen::Index i = 0; i < entries.size(); ++i) {
    if (std::isnan(entries(i)) || entries(i) < -1e-9)
      throw Error("cannot renormalize: entry " + std::to_string(i) + " = " + format_value(entries(i)));
    if (entries(i) < 0.0) entries(i) = 0.0;
  }
  const double sum = entries.sum();
  if (!(sum > 0.0)) throw Error("cannot renormalize: entries sum to zero");
  SimplexVector out;
  out.v_ = entries / sum;
  out.side_ = side;
  return out;
}

SimplexVector SimplexVector::uniform(int n, Side side) {
  return SimplexVector(Eigen::VectorXd::Constant(n, 1.0 / n), side);
}

SimplexVector SimplexVector::unit(int n, int index, Side side) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(index) = 1.0;
  return SimplexVector(std::move(v), side);
}

Game validate_game(const Eigen::MatrixXd& losses,
                   const std::vector<std::vector<std::string>>& signal_labels,
                   std::string name, double scale) {
  const int k = static_cast<int>(losses.rows());
  const int d = static_cast<int>(losses.cols());
  if (k == 0 || d == 0) throw InvalidGame("loss matrix is empty");
  if (static_cast<int>(signal_labels.size()) != k)
    throw InvalidGame("signal matrix has " + std::to_string(signal_labels.size()) +
                      " rows, losses have " + std::to_string(k));
  for (int a = 0; a < k; ++a) {
    if (static_cast<int>(signal_labels[a].size()) != d)
      throw InvalidGame("signal row " + std::to_string(a + 1) + " has " +
                        std::to_string(signal_labels[a].size()) + " entries, expected " +
                        std::to_string(d));
  }
  for (int a = 0; a < k; ++a)
    for (int x = 0; x < d; ++x) {
      const double v = losses(a, x);
      if (!(v >= 0.0 && v <= 1.0))
        throw InvalidGame("loss(" + std::to_string(a + 1) + "," + std::to_string(x + 1) + ") = " +
                          format_value(v) + " outside [0,1]");
    }

  Game g;
  g.name = std::move(name);
  g.losses = losses;
  g.scale = scale;
  g.k = k;
  g.d = d;
  g.signals.resize(k, d);

  // Intern labels by first appearance, row-major.
  std::map<std::string, int> ids;
  for (int a = 0; a < k; ++a)
    for (int x = 0; x < d; ++x) {
      const std::string& label = signal_labels[a][x];
      auto it = ids.find(label);
      if (it == ids.end()) {
        it = ids.emplace(label, static_cast<int>(g.alphabet.size())).first;
        g.alphabet.push_back(label);
      }
      g.signals(a, x) = it->second;
    }

  g.action_signals.resize(k);
  g.m = 1;
  for (int a = 0; a < k; ++a) {
    std::vector<int>& row = g.action_signals[a];
    for (int x = 0; x < d; ++x) {
      const int id = g.signals(a, x);
      if (std::find(row.begin(), row.end(), id) == row.end()) row.push_back(id);
    }
    std::sort(row.begin(), row.end());
    g.m = std::max(g.m, static_cast<int>(row.size()));
  }
  return g;
}

Game validate_game(const Eigen::MatrixXd& losses, const Eigen::MatrixXi& signal_ids,
                   std::string name, double scale) {
  std::vector<std::vector<std::string>> labels(signal_ids.rows());
  for (Eigen::Index a = 0; a < signal_ids.rows(); ++a)
    for (Eigen::Index x = 0; x < signal_ids.cols(); ++x)
      labels[a].push_back(std::to_string(signal_ids(a, x)));
  return validate_game(losses, labels, std::move(name), scale);
}

Game make_bandit(const Eigen::MatrixXd& losses, std::string name) {
  std::vector<std::vector<std::string>> labels(losses.rows());
  for (Eigen::Index a = 0; a < losses.rows(); ++a)
    for (Eigen::Index x = 0; x < losses.cols(); ++x)
      labels[a].push_back(format_value(losses(a, x)));
  return validate_game(losses, labels, std::move(name));
}

Game make_full_info(const Eigen::MatrixXd& losses, std::string name) {
  const int d = static_cast<int>(losses.cols());
  // One label per distinct loss column, in order of first appearance.
  std::vector<int> column_id(d, -1);
  std::vector<int> representatives;
  for (int x = 0; x < d; ++x) {
    for (int r : representatives) {
      if ((losses.col(x) - losses.col(r)).cwiseAbs().maxCoeff() == 0.0) {
        column_id[x] = column_id[r];
        break;
      }
    }
    if (column_id[x] < 0) {
      column_id[x] = static_cast<int>(representatives.size());
      representatives.push_back(x);
    }
  }
  std::vector<std::vector<std::string>> labels(losses.rows());
  for (Eigen::Index a = 0; a < losses.rows(); ++a)
    for (int x = 0; x < d; ++x)
      labels[a].push_back("s" + std::to_string(column_id[x]));
  return validate_game(losses, labels, std::move(name));
}

Game make_costly_matching_pennies(double c) {
  if (c < 0.0) throw InvalidGame("costly matching pennies needs c >= 0, got " + format_value(c));
  const double scale = std::max(1.0, c);
  Eigen::MatrixXd losses(3, 2);
  losses << 0.0, 1.0 / scale, 1.0 / scale, 0.0, c / scale, c / scale;
  std::vector<std::vector<std::string>> labels = {
      {"⊥", "⊥"}, {"⊥", "⊥"}, {"H", "T"}};
  std::ostringstream name;
  name << "costly-matching-pennies-c" << c;
  return validate_game(losses, labels, name.str(), scale);
}

double expected_loss(const SimplexVector& p, const Game& game, const SimplexVector& nu) {
  if (p.side() != Side::Actions || nu.side() != Side::Outcomes)
    throw DimensionMismatch("expected_loss needs an action distribution and an outcome distribution");
  if (p.size() != game.k || nu.size() != game.d)
    throw DimensionMismatch("expected_loss dimension mismatch");
  return p.entries().dot(game.losses * nu.entries());
}

bool is_self_revealing(const Game& game) {
  for (int a = 0; a < game.k; ++a)
    for (int x = 0; x < game.d; ++x)
      for (int y = x + 1; y < game.d; ++y)
        if (game.signals(a, x) == game.signals(a, y) && game.losses(a, x) != game.losses(a, y))
          return false;
  return true;
}

bool is_full_information(const Game& game) {
  for (int a = 0; a < game.k; ++a)
    for (int x = 0; x < game.d; ++x)
      for (int y = x + 1; y < game.d; ++y)
        if (game.signals(a, x) == game.signals(a, y) &&
            (game.losses.col(x) - game.losses.col(y)).cwiseAbs().maxCoeff() != 0.0)
          return false;
  return true;
}

double loss_for_signal(const Game& game, int action, int signal_id) {
  for (int x = 0; x < game.d; ++x)
    if (game.signals(action, x) == signal_id) return game.losses(action, x);
  throw Error("signal id " + std::to_string(signal_id) + " not realizable for action " +
              std::to_string(action + 1));
}

Eigen::VectorXd column_for_signal(const Game& game, int action, int signal_id) {
  for (int x = 0; x < game.d; ++x)
    if (game.signals(action, x) == signal_id) return game.losses.col(x);
  throw Error("signal id " + std::to_string(signal_id) + " not realizable for action " +
              std::to_string(action + 1));
}

Game load_game(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open game file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("parse failure in " + path + ": " + e.what());
  }
  try {
    std::string name = j.value("name", "");
    double scale = j.value("scale", 1.0);
    const auto& jl = j.at("losses");
    const auto& js = j.at("signals");
    const int k = static_cast<int>(jl.size());
    if (k == 0) throw IoError("field 'losses' in " + path + " is empty");
    const int d = static_cast<int>(jl.at(0).size());
    Eigen::MatrixXd losses(k, d);
    for (int a = 0; a < k; ++a) {
      if (static_cast<int>(jl.at(a).size()) != d)
        throw IoError("field 'losses' row " + std::to_string(a + 1) + " in " + path +
                      " has inconsistent length");
      for (int x = 0; x < d; ++x) losses(a, x) = jl.at(a).at(x).get<double>();
    }
    std::vector<std::vector<std::string>> labels(k);
    if (static_cast<int>(js.size()) != k)
      throw IoError("field 'signals' in " + path + " has wrong row count");
    for (int a = 0; a < k; ++a) {
      for (const auto& cell : js.at(a)) {
        if (cell.is_string())
          labels[a].push_back(cell.get<std::string>());
        else if (cell.is_number_integer())
          labels[a].push_back(std::to_string(cell.get<long long>()));
        else
          throw IoError("field 'signals' in " + path + " holds a non string/integer entry");
      }
    }
    return validate_game(losses, labels, std::move(name), scale);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed game file " + path + ": " + e.what());
  }
}

void save_game(const Game& game, const std::string& path) {
  nlohmann::json j;
  j["name"] = game.name;
  j["scale"] = game.scale;
  j["losses"] = nlohmann::json::array();
  for (int a = 0; a < game.k; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int x = 0; x < game.d; ++x) row.push_back(game.losses(a, x));
    j["losses"].push_back(std::move(row));
  }
  j["signals"] = nlohmann::json::array();
  for (int a = 0; a < game.k; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int x = 0; x < game.d; ++x) row.push_back(game.signal_label(game.signals(a, x)));
    j["signals"].push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write game file: " + path);
  out << j.dump(2) << "\n";
}

Game load_game_spec(const std::string& spec) {
  const std::string prefix = "builtin:cmp:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string arg = spec.substr(prefix.size());
    try {
      size_t pos = 0;
      const double c = std::stod(arg, &pos);
      if (pos != arg.size()) throw std::invalid_argument(arg);
      return make_costly_matching_pennies(c);
    } catch (const std::invalid_argument&) {
      throw IoError("bad builtin game spec: " + spec);
    }
  }
  return load_game(spec);
}

}  // namespace pm

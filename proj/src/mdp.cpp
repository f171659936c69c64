#include "bisimkit/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "bisimkit/random.hpp"

namespace bisimkit {

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> dirichlet_ones(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  double total = 0.0;
  for (auto& x : out) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    x = -std::log(u);
    total += x;
  }
  for (auto& x : out) x /= total;
  return out;
}

namespace {

constexpr double kRowTolerance = 1e-9;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

FiniteMdp::FiniteMdp(int n_states, int n_actions, std::vector<double> transition,
                     std::vector<double> reward, double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      discount_(discount) {
  if (n_states <= 0) fail("n_states must be positive");
  if (n_actions <= 0) fail("n_actions must be positive");
  if (!(discount >= 0.0 && discount < 1.0)) fail("gamma must lie in [0, 1)");
  const auto n = static_cast<std::size_t>(n_states);
  if (transition_.size() != static_cast<std::size_t>(n_actions) * n * n)
    fail("transition tensor has wrong size");
  if (reward_.size() != n * static_cast<std::size_t>(n_actions)) fail("reward table has wrong size");
  for (int a = 0; a < n_actions; ++a) {
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (int t = 0; t < n_states; ++t) {
        const double x = p(a, s, t);
        if (!std::isfinite(x) || x < 0.0) {
          std::ostringstream os;
          os << "transition[" << a << "][" << s << "][" << t << "] = " << x << " is not a probability";
          fail(os.str());
        }
        sum += x;
      }
      if (std::abs(sum - 1.0) > kRowTolerance) {
        std::ostringstream os;
        os << "transition[" << a << "][" << s << "] sums to " << sum;
        fail(os.str());
      }
    }
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const double x = r(s, a);
      if (!std::isfinite(x)) {
        std::ostringstream os;
        os << "reward[" << s << "][" << a << "] is not finite";
        fail(os.str());
      }
      r_max_ = std::max(r_max_, std::abs(x));
    }
  }
}

DiscretePolicy DiscretePolicy::uniform(int n_states, int n_actions) {
  DiscretePolicy pi{n_states, n_actions,
                    std::vector<double>(static_cast<std::size_t>(n_states) * n_actions,
                                        1.0 / n_actions)};
  return pi;
}

DiscretePolicy DiscretePolicy::deterministic(std::span<const int> actions, int n_actions) {
  DiscretePolicy pi{static_cast<int>(actions.size()), n_actions,
                    std::vector<double>(actions.size() * n_actions, 0.0)};
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions) fail("action index out of range");
    pi.probs[s * n_actions + actions[s]] = 1.0;
  }
  return pi;
}

void DiscretePolicy::validate() const {
  if (n_states <= 0 || n_actions <= 0) fail("policy dimensions must be positive");
  if (probs.size() != static_cast<std::size_t>(n_states) * n_actions) fail("policy table has wrong size");
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      const double x = prob(s, a);
      if (!std::isfinite(x) || x < 0.0) fail("policy entry is not a probability");
      sum += x;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) {
      std::ostringstream os;
      os << "policy row " << s << " sums to " << sum;
      fail(os.str());
    }
  }
}

int DiscretePolicy::action_of(int state) const {
  for (int a = 0; a < n_actions; ++a)
    if (prob(state, a) == 1.0) return a;
  return -1;
}

namespace {

void check_policy(const FiniteMdp& mdp, const DiscretePolicy& policy) {
  if (policy.n_states != mdp.n_states() || policy.n_actions != mdp.n_actions())
    fail("policy dimensions do not match the MDP");
  policy.validate();
}

void check_tolerance(double tol) {
  if (!(tol > 0.0)) fail("tolerance must be positive");
}

double stop_threshold(double tol, double gamma) {
  return gamma > 0.0 ? tol * (1.0 - gamma) / gamma : tol;
}

double expected_next(const FiniteMdp& mdp, int a, int s, const std::vector<double>& v) {
  const auto row = mdp.row(a, s);
  double acc = 0.0;
  for (int t = 0; t < mdp.n_states(); ++t) acc += row[t] * v[t];
  return acc;
}

}  // namespace

std::vector<double> action_values(const FiniteMdp& mdp, const ValueFunction& v) {
  if (v.size() != static_cast<std::size_t>(mdp.n_states())) fail("value function has wrong size");
  std::vector<double> q(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      q[static_cast<std::size_t>(s) * mdp.n_actions() + a] =
          mdp.r(s, a) + mdp.discount() * expected_next(mdp, a, s, v.values);
  return q;
}

namespace {

std::vector<double> optimality_backup(const FiniteMdp& mdp, const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (int s = 0; s < mdp.n_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions(); ++a)
      best = std::max(best, mdp.r(s, a) + mdp.discount() * expected_next(mdp, a, s, v));
    out[s] = best;
  }
  return out;
}

std::vector<double> policy_backup(const FiniteMdp& mdp, const DiscretePolicy& pi,
                                  const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (int s = 0; s < mdp.n_states(); ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double w = pi.prob(s, a);
      if (w == 0.0) continue;
      acc += w * (mdp.r(s, a) + mdp.discount() * expected_next(mdp, a, s, v));
    }
    out[s] = acc;
  }
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename Backup>
ValueFunction iterate_to_tolerance(const FiniteMdp& mdp, double tol, Backup backup) {
  std::vector<double> v(mdp.n_states(), 0.0);
  const double threshold = stop_threshold(tol, mdp.discount());
  for (;;) {
    auto next = backup(v);
    const double delta = max_abs_diff(next, v);
    v = std::move(next);
    if (delta <= threshold) break;
  }
  return ValueFunction{std::move(v)};
}

}  // namespace

ValueFunction value_iteration(const FiniteMdp& mdp, double tol) {
  check_tolerance(tol);
  if (mdp.n_states() == 0) fail("empty MDP");
  return iterate_to_tolerance(mdp, tol,
                              [&](const std::vector<double>& v) { return optimality_backup(mdp, v); });
}

ValueFunction policy_evaluation(const FiniteMdp& mdp, const DiscretePolicy& policy, double tol) {
  check_tolerance(tol);
  check_policy(mdp, policy);
  return iterate_to_tolerance(
      mdp, tol, [&](const std::vector<double>& v) { return policy_backup(mdp, policy, v); });
}

DiscretePolicy greedy_policy(const FiniteMdp& mdp, const ValueFunction& v) {
  const auto q = action_values(mdp, v);
  std::vector<int> actions(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s) {
    int best = 0;
    for (int a = 1; a < mdp.n_actions(); ++a)
      if (q[static_cast<std::size_t>(s) * mdp.n_actions() + a] >
          q[static_cast<std::size_t>(s) * mdp.n_actions() + best])
        best = a;
    actions[s] = best;
  }
  return DiscretePolicy::deterministic(actions, mdp.n_actions());
}

double bellman_optimality_residual(const FiniteMdp& mdp, const ValueFunction& v) {
  return max_abs_diff(optimality_backup(mdp, v.values), v.values);
}

double bellman_policy_residual(const FiniteMdp& mdp, const DiscretePolicy& policy,
                               const ValueFunction& v) {
  check_policy(mdp, policy);
  return max_abs_diff(policy_backup(mdp, policy, v.values), v.values);
}

FiniteMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1) fail("random_mdp needs at least one state and action");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(n_states);
  std::vector<double> transition;
  transition.reserve(static_cast<std::size_t>(n_actions) * n * n);
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n_states; ++s) {
      auto row = dirichlet_ones(rng, n);
      transition.insert(transition.end(), row.begin(), row.end());
    }
  std::vector<double> reward(n * n_actions);
  for (auto& x : reward) x = uniform01(rng);
  return FiniteMdp(n_states, n_actions, std::move(transition), std::move(reward), gamma);
}

std::vector<double> policy_reward(const FiniteMdp& mdp, const DiscretePolicy& policy) {
  check_policy(mdp, policy);
  std::vector<double> out(mdp.n_states(), 0.0);
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) out[s] += policy.prob(s, a) * mdp.r(s, a);
  return out;
}

std::vector<double> policy_transition(const FiniteMdp& mdp, const DiscretePolicy& policy) {
  check_policy(mdp, policy);
  const auto n = static_cast<std::size_t>(mdp.n_states());
  std::vector<double> out(n * n, 0.0);
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double w = policy.prob(s, a);
      if (w == 0.0) continue;
      const auto row = mdp.row(a, s);
      for (std::size_t t = 0; t < n; ++t) out[s * n + t] += w * row[t];
    }
  return out;
}

nlohmann::json mdp_to_json(const FiniteMdp& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states();
  j["n_actions"] = mdp.n_actions();
  j["gamma"] = mdp.discount();
  auto transition = nlohmann::json::array();
  for (int a = 0; a < mdp.n_actions(); ++a) {
    auto block = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
      const auto row = mdp.row(a, s);
      block.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transition.push_back(std::move(block));
  }
  j["transition"] = std::move(transition);
  auto reward = nlohmann::json::array();
  for (int s = 0; s < mdp.n_states(); ++s) {
    std::vector<double> row(mdp.n_actions());
    for (int a = 0; a < mdp.n_actions(); ++a) row[a] = mdp.r(s, a);
    reward.push_back(std::move(row));
  }
  j["reward"] = std::move(reward);
  return j;
}

FiniteMdp mdp_from_json(const nlohmann::json& j) {
  for (const char* key : {"n_states", "n_actions", "gamma", "transition", "reward"})
    if (!j.contains(key)) fail(std::string("MDP file is missing key '") + key + "'");
  const int n = j.at("n_states").get<int>();
  const int m = j.at("n_actions").get<int>();
  const double gamma = j.at("gamma").get<double>();
  const auto& tj = j.at("transition");
  const auto& rj = j.at("reward");
  if (n <= 0 || m <= 0) fail("n_states and n_actions must be positive");
  if (!tj.is_array() || tj.size() != static_cast<std::size_t>(m))
    fail("transition must have n_actions blocks");
  std::vector<double> transition;
  transition.reserve(static_cast<std::size_t>(m) * n * n);
  for (int a = 0; a < m; ++a) {
    if (!tj[a].is_array() || tj[a].size() != static_cast<std::size_t>(n)) {
      std::ostringstream os;
      os << "transition[" << a << "] must have n_states rows";
      fail(os.str());
    }
    for (int s = 0; s < n; ++s) {
      const auto& row = tj[a][s];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(n)) {
        std::ostringstream os;
        os << "transition[" << a << "][" << s << "] must have n_states entries";
        fail(os.str());
      }
      for (const auto& x : row) transition.push_back(x.get<double>());
    }
  }
  if (!rj.is_array() || rj.size() != static_cast<std::size_t>(n)) fail("reward must have n_states rows");
  std::vector<double> reward;
  reward.reserve(static_cast<std::size_t>(n) * m);
  for (int s = 0; s < n; ++s) {
    if (!rj[s].is_array() || rj[s].size() != static_cast<std::size_t>(m)) {
      std::ostringstream os;
      os << "reward[" << s << "] must have n_actions entries";
      fail(os.str());
    }
    for (const auto& x : rj[s]) reward.push_back(x.get<double>());
  }
  return FiniteMdp(n, m, std::move(transition), std::move(reward), gamma);
}

FiniteMdp load_mdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open MDP file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail("malformed MDP file " + path.string() + ": " + e.what());
  }
  return mdp_from_json(j);
}

void save_mdp(const FiniteMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << mdp_to_json(mdp).dump(2) << '\n';
}

}  // namespace bisimkit

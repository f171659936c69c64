#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bisimkit {

// Tabular MDP with transition tensor indexed (action, state, next_state) and
// reward table indexed (state, action). Rewards follow the R(s, a)
// convention; next-state rewards are folded in by expectation by the caller.
class FiniteMdp {
 public:
  FiniteMdp() = default;

  // Throws std::invalid_argument naming the first violating index.
  FiniteMdp(int n_states, int n_actions, std::vector<double> transition,
            std::vector<double> reward, double discount);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double discount() const { return discount_; }
  // Largest |R(s, a)|.
  double r_max() const { return r_max_; }

  double p(int action, int state, int next_state) const {
    return transition_[(static_cast<std::size_t>(action) * n_states_ + state) * n_states_ +
                       next_state];
  }
  double r(int state, int action) const {
    return reward_[static_cast<std::size_t>(state) * n_actions_ + action];
  }
  std::span<const double> row(int action, int state) const {
    return {transition_.data() + (static_cast<std::size_t>(action) * n_states_ + state) * n_states_,
            static_cast<std::size_t>(n_states_)};
  }

  const std::vector<double>& transition() const { return transition_; }
  const std::vector<double>& reward() const { return reward_; }

  bool operator==(const FiniteMdp&) const = default;

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> transition_;
  std::vector<double> reward_;
  double discount_ = 0.0;
  double r_max_ = 0.0;
};

// Stochastic policy table probs[s * n_actions + a].
struct DiscretePolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;

  double prob(int state, int action) const {
    return probs[static_cast<std::size_t>(state) * n_actions + action];
  }

  static DiscretePolicy uniform(int n_states, int n_actions);
  static DiscretePolicy deterministic(std::span<const int> actions, int n_actions);

  // Throws std::invalid_argument when rows are not distributions.
  void validate() const;
  // Index of the action with probability one, or -1 when the row is stochastic.
  int action_of(int state) const;
};

struct ValueFunction {
  std::vector<double> values;

  double operator[](std::size_t s) const { return values[s]; }
  std::size_t size() const { return values.size(); }
};

inline constexpr double kDefaultTolerance = 1e-8;

// Bellman optimality iteration. The returned V has residual
// ||V - T*V||_inf <= tol (1 - gamma), hence ||V - V*||_inf <= tol.
ValueFunction value_iteration(const FiniteMdp& mdp, double tol = kDefaultTolerance);

ValueFunction policy_evaluation(const FiniteMdp& mdp, const DiscretePolicy& policy,
                                double tol = kDefaultTolerance);

// One-hot argmax_a [R(s,a) + gamma sum_s' P(s'|s,a) V(s')], lowest index on ties.
DiscretePolicy greedy_policy(const FiniteMdp& mdp, const ValueFunction& v);

// Q(s, a) for the given V.
std::vector<double> action_values(const FiniteMdp& mdp, const ValueFunction& v);

double bellman_optimality_residual(const FiniteMdp& mdp, const ValueFunction& v);
double bellman_policy_residual(const FiniteMdp& mdp, const DiscretePolicy& policy,
                               const ValueFunction& v);

// Dirichlet(1) transition rows, rewards uniform in [0, 1].
FiniteMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed);

// Policy-averaged reward R^pi(s) and transition P^pi(s'|s) (row-major n x n).
std::vector<double> policy_reward(const FiniteMdp& mdp, const DiscretePolicy& policy);
std::vector<double> policy_transition(const FiniteMdp& mdp, const DiscretePolicy& policy);

// JSON keys: n_states, n_actions, gamma, transition[a][s][s'], reward[s][a].
nlohmann::json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const nlohmann::json& j);
FiniteMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const FiniteMdp& mdp, const std::filesystem::path& path);

}  // namespace bisimkit

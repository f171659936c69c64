#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bisimkit/mdp.hpp"
#include "bisimkit/random.hpp"

namespace bisimkit {

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool terminal = false;  // absorbing state reached; bootstrapping stops
  bool timeout = false;   // episode cap reached; not a terminal state
  bool done() const { return terminal || timeout; }
};

// Observation pairs that differ in exactly one kind of factor, stored as
// matching columns of `a` and `b`.
struct ObservationPairs {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
};

struct FactorPairs {
  ObservationPairs distractor_only;
  ObservationPairs task_only;
};

// Reward variants of a family; the first is the default. Throws ConfigError
// for an unknown family.
std::vector<std::string> family_variants(const std::string& family);

struct EnvSpec {
  std::string family = "grid";  // grid | point_mass | factored
  std::string variant;          // empty selects the family's original reward
  int episode_cap = 0;          // 0 selects the family default

  // grid
  int grid_size = 4;
  int chain_states = 5;
  std::uint64_t chain_seed = 1;
  bool absorbing_goal = false;

  // point mass
  int distractor_dims = 8;
  double dt = 0.05;
  double action_cost = 0.01;
  double distractor_rho = 0.9;
  double distractor_sigma = 0.3;
  double distractor_mean = 0.0;
  std::uint64_t mixing_seed = 7;
  // factored
  int s1_size = 3;
  int s2_size = 2;
  int s3_size = 3;
  int factored_actions = 2;
  std::uint64_t factored_seed = 3;

  void validate() const;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual int obs_dim() const = 0;
  // Width of the continuous action vector the agent emits, entries in [-1, 1].
  virtual int action_dim() const = 0;
  virtual int episode_cap() const = 0;

  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  // Throws std::invalid_argument for non-finite or out-of-range actions.
  virtual StepResult step(std::span<const double> action) = 0;

  virtual const std::string& variant() const = 0;
  // Same dynamics and observations, different reward.
  virtual std::unique_ptr<Environment> with_reward_variant(const std::string& variant) const = 0;
  // Whether the variant's reward depends only on causal ancestors of the
  // original reward.
  virtual bool variant_preserves_ancestors(const std::string& variant) const = 0;
  virtual std::vector<std::string> variants() const = 0;

  virtual FactorPairs factor_pairs(int max_pairs, Rng& rng) const = 0;

  virtual bool is_tabular() const { return false; }
};

// Finite environments that can be exported as a FiniteMdp.
class TabularEnvironment : public Environment {
 public:
  bool is_tabular() const override { return true; }

  virtual int n_states() const = 0;
  virtual int n_discrete_actions() const = 0;
  // Projection of a continuous action onto a discrete action index.
  virtual int discrete_action(std::span<const double> action) const = 0;
  // Continuous action that projects onto the given discrete index.
  virtual std::vector<double> continuous_action(int discrete) const = 0;
  virtual std::vector<double> observation_of_state(int state) const = 0;
  virtual int current_state() const = 0;
  // Product-MDP over all states with R(s, a) = E[reward | s, a].
  virtual FiniteMdp to_finite_mdp(double gamma) const = 0;
  // Factor tuple of a state, in the family's documented order.
  virtual std::vector<int> factors_of(int state) const = 0;
};

// Grid cells x independent distractor chain. State index = cell * m + chain;
// cells are row-major, y * n + x. Moves: 0 right, 1 left, 2 down, 3 up; moves
// into walls leave the cell unchanged. Reward 1 when the new cell is the goal
// (bottom-right corner) under "reach_goal", the top-left corner under
// "alt_goal", or when the new chain state is 0 under "distractor_reward".
class TabularDistractorGrid : public TabularEnvironment {
 public:
  explicit TabularDistractorGrid(const EnvSpec& spec);

  int obs_dim() const override { return n_ * n_ + m_; }
  int action_dim() const override { return 2; }
  int episode_cap() const override { return cap_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  StepResult step_discrete(int action);

  const std::string& variant() const override { return variant_; }
  std::unique_ptr<Environment> with_reward_variant(const std::string& variant) const override;
  bool variant_preserves_ancestors(const std::string& variant) const override;
  std::vector<std::string> variants() const override { return family_variants("grid"); }
  FactorPairs factor_pairs(int max_pairs, Rng& rng) const override;

  int n_states() const override { return n_ * n_ * m_; }
  int n_discrete_actions() const override { return 4; }
  int discrete_action(std::span<const double> action) const override;
  std::vector<double> continuous_action(int discrete) const override;
  std::vector<double> observation_of_state(int state) const override;
  int current_state() const override { return cell_ * m_ + chain_; }
  FiniteMdp to_finite_mdp(double gamma) const override;
  std::vector<int> factors_of(int state) const override { return {state / m_, state % m_}; }

  int grid_size() const { return n_; }
  int chain_states() const { return m_; }
  int goal_cell() const { return n_ * n_ - 1; }
  int move(int cell, int action) const;
  double chain_prob(int from, int to) const { return chain_p_[static_cast<std::size_t>(from) * m_ + to]; }
  void set_state(int cell, int chain);

 private:
  double reward_of(int cell, int chain) const;
  bool is_terminal_cell(int cell) const;

  int n_, m_, cap_;
  bool absorbing_;
  std::string variant_;
  std::vector<double> chain_p_;  // m x m row-stochastic
  int cell_ = 0, chain_ = 0, t_ = 0;
  Rng rng_;
};

// Point mass in [-3, 3]^2 with velocity, plus k distractor coordinates
// following x' = mean + rho (x - mean) + sigma * noise. The observation is
// M [pos; vel; distractors] for a fixed random orthogonal M.
class ContinuousPointMass : public Environment {
 public:
  explicit ContinuousPointMass(const EnvSpec& spec);

  int obs_dim() const override { return 4 + k_; }
  int action_dim() const override { return 2; }
  int episode_cap() const override { return cap_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

  const std::string& variant() const override { return variant_; }
  std::unique_ptr<Environment> with_reward_variant(const std::string& variant) const override;
  bool variant_preserves_ancestors(const std::string& variant) const override;
  std::vector<std::string> variants() const override { return family_variants("point_mass"); }
  FactorPairs factor_pairs(int max_pairs, Rng& rng) const override;

  const Eigen::MatrixXd& mixing() const { return mixing_; }
  // Raw (unmixed) state: pos(2), vel(2), distractors(k).
  const Eigen::VectorXd& raw_state() const { return state_; }
  void set_raw_state(const Eigen::VectorXd& s);
  std::vector<double> observe(const Eigen::VectorXd& raw) const;
  double reward_of(const Eigen::VectorXd& next, std::span<const double> action) const;

  // Distractor process parameters can be changed between episodes.
  void set_distractor_process(double mean, double rho, double sigma);

  static constexpr double kBox = 3.0;
  static constexpr double kThrust = 2.0;
  static constexpr double kDamping = 0.5;

 private:
  int k_, cap_;
  double dt_, action_cost_;
  double d_mean_, d_rho_, d_sigma_;
  std::string variant_;
  Eigen::MatrixXd mixing_;
  Eigen::VectorXd state_;
  int t_ = 0;
  Rng rng_;
};

// Three finite factors with causal edges s2 -> s1 -> R and s3 isolated.
// s1' ~ P1(. | s1, s2, a), s2' ~ P2(. | s2), s3' ~ P3(. | s3); each factor
// draws from its own random stream. State index ((s1 * |s2|) + s2) * |s3| + s3;
// observation = one-hot(s1) + one-hot(s2) + one-hot(s3) concatenated.
// Reward under "r_s1" is w1[s1'], "r_s2" is w2[s2'], "r_s3" is w3[s3'].
class FactoredCausalMdp : public TabularEnvironment {
 public:
  explicit FactoredCausalMdp(const EnvSpec& spec);

  int obs_dim() const override { return n1_ + n2_ + n3_; }
  int action_dim() const override { return 1; }
  int episode_cap() const override { return cap_; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  StepResult step_discrete(int action);

  const std::string& variant() const override { return variant_; }
  std::unique_ptr<Environment> with_reward_variant(const std::string& variant) const override;
  bool variant_preserves_ancestors(const std::string& variant) const override;
  std::vector<std::string> variants() const override { return family_variants("factored"); }
  FactorPairs factor_pairs(int max_pairs, Rng& rng) const override;

  int n_states() const override { return n1_ * n2_ * n3_; }
  int n_discrete_actions() const override { return n_actions_; }
  int discrete_action(std::span<const double> action) const override;
  std::vector<double> continuous_action(int discrete) const override;
  std::vector<double> observation_of_state(int state) const override;
  int current_state() const override { return index(s1_, s2_, s3_); }
  FiniteMdp to_finite_mdp(double gamma) const override;
  std::vector<int> factors_of(int state) const override;

  // factor is 1, 2 or 3.
  void intervene(int factor, int value);
  int index(int s1, int s2, int s3) const { return (s1 * n2_ + s2) * n3_ + s3; }

 private:
  double reward_of(int s1, int s2, int s3) const;
  static int draw(std::span<const double> row, Rng& rng);

  int n1_, n2_, n3_, n_actions_, cap_;
  std::string variant_;
  std::vector<double> p1_, p2_, p3_;  // p1[((a * n1 + s1) * n2 + s2) * n1 + s1']
  std::vector<double> w1_, w2_, w3_;
  int s1_ = 0, s2_ = 0, s3_ = 0, t_ = 0;
  Rng rng1_, rng2_, rng3_;
};

std::unique_ptr<Environment> make_env(const EnvSpec& spec);

}  // namespace bisimkit

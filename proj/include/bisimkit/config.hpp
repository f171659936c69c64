#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bisimkit/agent.hpp"
#include "bisimkit/envs.hpp"

namespace bisimkit {

struct RunConfig {
  std::uint64_t seed = 1;
  long steps = 100000;             // environment steps
  long init_steps = 1000;          // uniform random actions before updates start
  std::size_t buffer_capacity = 1000000;
  long eval_every = 0;             // 0: evaluate only at the end
  int eval_episodes = 5;
};

struct ExactConfig {
  double c = -1.0;                 // negative selects the discount
  std::vector<double> epsilons{0.01, 0.05, 0.1};
  double tol = 1e-10;              // metric fixed-point tolerance
  double bound_tol = 1e-6;         // slack of the value and Lipschitz checks
  double learning_error = 0.0;     // extra term of the aggregation bound
  std::filesystem::path mdp;       // explicit MDP file instead of the environment
};

struct EvalConfig {
  std::filesystem::path checkpoint;
  double c = -1.0;                 // metric weight for correlation; negative selects the discount
  int pairs = 1000;                // observation pairs per group for invariance
  std::string variant;             // transfer target reward
  long transfer_steps = 0;         // 0 selects run.steps
  double swap_mean = 1.5;          // distractor process at swap evaluation (point mass)
  double swap_rho = 0.7;
  double swap_sigma = 0.5;
  std::uint64_t swap_chain_seed = 101;  // distractor chain at swap evaluation (grid)
};

struct ExperimentConfig {
  EnvSpec env;
  AgentConfig agent;               // obs_dim / action_dim are taken from the environment
  RunConfig run;
  ExactConfig exact;
  EvalConfig eval;

  double metric_c() const { return exact.c >= 0.0 ? exact.c : agent.sac.gamma; }
  double eval_c() const { return eval.c >= 0.0 ? eval.c : agent.sac.gamma; }
  void validate() const;
};

// Builds a config from defaults plus the given document. Unknown sections or
// keys, wrong types and invalid values throw ConfigError. Relative paths are
// resolved against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

nlohmann::json to_json(const EnvSpec& spec);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace bisimkit

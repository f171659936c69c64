#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bisimkit/agent.hpp"
#include "bisimkit/bisim.hpp"
#include "bisimkit/config.hpp"
#include "bisimkit/envs.hpp"

namespace bisimkit {

inline constexpr const char* kSummarySchema = "bisimkit-summary/1";

struct EvalPoint {
  long step = 0;
  long episode = 0;
  double mean_return = 0.0;
};

struct TrainOptions {
  std::ostream* train_csv = nullptr;    // one row per finished episode
  std::ostream* eval_csv = nullptr;     // one row per evaluation
  std::ostream* latents_csv = nullptr;  // probe latents at every evaluation
  // Called after each evaluation with the number of environment steps taken.
  std::function<void(long step, Agent& agent)> on_eval;
};

struct TrainingLog {
  std::vector<EvalPoint> evals;
  long episodes = 0;
};

// Interaction/update loop: uniform random actions for run.init_steps steps,
// then the stochastic policy with one update per environment step.
// Evaluation runs every run.eval_every steps (and once at the end when
// steps > 0) with the deterministic policy on a copy of the environment.
TrainingLog train_agent(Agent& agent, const Environment& env, const RunConfig& run, std::uint64_t seed,
                        const TrainOptions& options = {});

// Mean undiscounted return of the deterministic policy over the episodes.
double evaluate_policy(Agent& agent, const Environment& env, int episodes, std::uint64_t seed);
// Mean return of uniformly random actions.
double random_policy_return(const Environment& env, int episodes, std::uint64_t seed);

// Deterministic tabular policy from the actor's mean action in every state.
DiscretePolicy greedy_projection(const Agent& agent, const TabularEnvironment& env);

struct CorrelationReport {
  double pearson = 0.0;          // against the on-policy metric of the greedy projection
  double spearman = 0.0;
  double pearson_max = 0.0;      // against the max-over-actions metric
  double spearman_max = 0.0;
  double learning_error = 0.0;   // sup |scaled learned distance - metric|
  double distance_scale = 1.0;   // factor applied to learned distances before the error
  int n_states = 0;
};

// Compares learned pair distances over every state with the exact metrics at
// weight c. Learned distances are rescaled by (1 - c) / reward_weight, which
// maps the fixed point of the training target onto the metric's scale when
// transition_weight / reward_weight = c / (1 - c).
CorrelationReport correlation_report(const Agent& agent, const TabularEnvironment& env, double c,
                                     const MetricSolveOptions& options = {});

struct InvarianceReport {
  double distractor_dist_mean = 0.0;
  double task_dist_mean = 0.0;
  double ratio = 0.0;
  int pairs = 0;
};

// Mean latent l1 distance over pairs differing only in distractor factors
// versus only in task factors.
InvarianceReport invariance_report(const Agent& agent, const Environment& env, int pairs, std::uint64_t seed);

// Copy of env whose distractor process is swapped for the evaluation one.
// Returns nullptr when the family has no distractor process to swap.
std::unique_ptr<Environment> swapped_distractor_env(const ExperimentConfig& config);

struct SwapReport {
  double default_return = 0.0;
  double swapped_return = 0.0;
  double return_drop = 0.0;  // default minus swapped
};

// Deterministic-policy return on the configured environment and on its copy
// with the evaluation distractor process, over run.eval_episodes episodes.
// Empty when the family has no distractor process to swap.
std::optional<SwapReport> distractor_swap_report(Agent& agent, const ExperimentConfig& config);

// Subcommands. Each writes its files plus summary.json into out and returns
// the summary.
nlohmann::json cmd_exact(const ExperimentConfig& config, const std::filesystem::path& out);
nlohmann::json cmd_train(const ExperimentConfig& config, const std::filesystem::path& out);
nlohmann::json cmd_eval_correlation(const ExperimentConfig& config, const std::filesystem::path& out);
nlohmann::json cmd_eval_invariance(const ExperimentConfig& config, const std::filesystem::path& out);
nlohmann::json cmd_eval_transfer(const ExperimentConfig& config, const std::filesystem::path& out);

nlohmann::json run_command(const std::string& name, const ExperimentConfig& config, const std::filesystem::path& out);

// Agent configuration with observation/action widths taken from the environment.
AgentConfig agent_config_for(const ExperimentConfig& config, const Environment& env);

}  // namespace bisimkit

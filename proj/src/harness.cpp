#include "bisimkit/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "bisimkit/errors.hpp"
#include "bisimkit/mdp.hpp"
#include "bisimkit/stats.hpp"

namespace bisimkit {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Matrix;

namespace {

// Seed streams for the harness; the agent uses streams 0..2 of the run seed.
constexpr std::uint64_t kEpisodeStream = 3;
constexpr std::uint64_t kExploreStream = 4;
constexpr std::uint64_t kEvalStream = 5;
constexpr std::uint64_t kProbeStream = 6;
constexpr std::uint64_t kPairStream = 7;
constexpr std::uint64_t kRandomPolicyStream = 8;

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

void write_json(const json& j, const fs::path& path) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

json summary_header(const std::string& command, const ExperimentConfig& config) {
  return {{"schema", kSummarySchema}, {"command", command}, {"seed", config.run.seed}, {"config", to_json(config)}};
}

const TabularEnvironment& require_tabular(const Environment& env, const std::string& what) {
  if (!env.is_tabular())
    throw ConfigError(what + " needs a tabular environment; '" + env.variant() + "' has no finite state enumeration");
  return static_cast<const TabularEnvironment&>(env);
}

std::unique_ptr<Environment> clone(const Environment& env) { return env.with_reward_variant(env.variant()); }

Matrix columns(const std::vector<std::vector<double>>& obs, int dim) {
  Matrix m(dim, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k)
    m.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(obs[k].data(), dim);
  return m;
}

// Observations whose latents are logged: every state for tabular
// environments, a fixed sample otherwise.
Matrix probe_observations(const Environment& env, std::uint64_t seed) {
  if (env.is_tabular()) {
    const auto& tab = static_cast<const TabularEnvironment&>(env);
    std::vector<std::vector<double>> obs;
    for (int s = 0; s < tab.n_states(); ++s) obs.push_back(tab.observation_of_state(s));
    return columns(obs, env.obs_dim());
  }
  Rng rng(derive_seed(seed, kProbeStream));
  return env.factor_pairs(32, rng).distractor_only.a;
}

struct MetricAccumulator {
  double sum = 0.0;
  long n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / n : std::numeric_limits<double>::quiet_NaN(); }
};

void write_latents(std::ostream& out, const Agent& agent, const Matrix& probes, long episode, long step) {
  const Matrix z = agent.encode(probes);
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    out << episode << ',' << step << ',' << k;
    for (Eigen::Index d = 0; d < z.rows(); ++d) out << ',' << num(z(d, k));
    out << '\n';
  }
}

std::vector<double> upper_triangle(const std::vector<double>& full, int n) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.push_back(full[static_cast<std::size_t>(i) * n + j]);
  return out;
}

void write_curve(const std::vector<EvalPoint>& curve, const fs::path& path) {
  auto f = open_out(path);
  f << "step,episode,mean_return\n";
  for (const auto& p : curve) f << p.step << ',' << p.episode << ',' << num(p.mean_return) << '\n';
}

// Mean of the last three evaluations, which smooths single-evaluation noise.
double final_return(const std::vector<EvalPoint>& curve) {
  if (curve.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t k = std::min<std::size_t>(3, curve.size());
  double s = 0.0;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) s += curve[i].mean_return;
  return s / static_cast<double>(k);
}

json curve_json(const std::vector<EvalPoint>& curve) {
  json out = json::array();
  for (const auto& p : curve) out.push_back({{"step", p.step}, {"mean_return", p.mean_return}});
  return out;
}

Agent load_checkpoint(const ExperimentConfig& config, const Environment& env) {
  if (config.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint is required for this command");
  std::ifstream in(config.eval.checkpoint);
  if (!in) throw ConfigError("cannot open checkpoint '" + config.eval.checkpoint.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Agent agent = Agent::from_checkpoint(j);
  if (agent.config().obs_dim != env.obs_dim() || agent.config().action_dim != env.action_dim())
    throw ConfigError("checkpoint shapes do not match the configured environment");
  return agent;
}

}  // namespace

AgentConfig agent_config_for(const ExperimentConfig& config, const Environment& env) {
  AgentConfig a = config.agent;
  a.obs_dim = env.obs_dim();
  a.action_dim = env.action_dim();
  a.validate();
  return a;
}

double evaluate_policy(Agent& agent, const Environment& env, int episodes, std::uint64_t seed) {
  auto e = clone(env);
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    auto obs = e->reset(derive_seed(seed, static_cast<std::uint64_t>(k)));
    while (true) {
      const auto r = e->step(agent.act(obs, true));
      total += r.reward;
      if (r.done()) break;
      obs = r.obs;
    }
  }
  return total / episodes;
}

double random_policy_return(const Environment& env, int episodes, std::uint64_t seed) {
  auto e = clone(env);
  Rng rng(derive_seed(seed, kRandomPolicyStream));
  std::vector<double> a(static_cast<std::size_t>(env.action_dim()));
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    e->reset(derive_seed(derive_seed(seed, kEvalStream), static_cast<std::uint64_t>(k)));
    while (true) {
      for (auto& x : a) x = uniform(rng, -1.0, 1.0);
      const auto r = e->step(a);
      total += r.reward;
      if (r.done()) break;
    }
  }
  return total / episodes;
}

TrainingLog train_agent(Agent& agent, const Environment& env_proto, const RunConfig& run, std::uint64_t seed,
                        const TrainOptions& options) {
  auto env = clone(env_proto);
  const int A = env->action_dim();
  ReplayBuffer replay(run.buffer_capacity, env->obs_dim(), A);
  Rng explore(derive_seed(seed, kExploreStream));
  const std::uint64_t episode_seeds = derive_seed(seed, kEpisodeStream);
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);
  const Matrix probes = options.latents_csv ? probe_observations(*env, seed) : Matrix();

  TrainingLog log;
  if (options.train_csv)
    *options.train_csv << "step,episode,return,critic_loss,actor_loss,alpha,encoder_loss,dyn_loss,rew_loss\n";
  if (options.eval_csv) *options.eval_csv << "step,episode,mean_return\n";
  if (options.latents_csv) {
    *options.latents_csv << "episode,step,obs_id";
    for (int d = 0; d < agent.config().latent_dim; ++d) *options.latents_csv << ",z_" << d;
    *options.latents_csv << '\n';
  }

  auto evaluate = [&](long step) {
    const double ret = evaluate_policy(agent, *env, run.eval_episodes, eval_seed);
    log.evals.push_back({step, log.episodes, ret});
    if (options.eval_csv) *options.eval_csv << step << ',' << log.episodes << ',' << num(ret) << '\n';
    if (options.latents_csv) write_latents(*options.latents_csv, agent, probes, log.episodes, step);
    if (options.on_eval) options.on_eval(step, agent);
  };

  std::vector<double> obs = env->reset(derive_seed(episode_seeds, 0));
  std::vector<double> action(static_cast<std::size_t>(A));
  double episode_return = 0.0;
  MetricAccumulator critic, actor_l, alpha, encoder_l, dyn, rew;
  for (long step = 0; step < run.steps; ++step) {
    if (step < run.init_steps) {
      for (auto& x : action) x = uniform(explore, -1.0, 1.0);
    } else {
      action = agent.act(obs, false);
    }
    const StepResult r = env->step(action);
    replay.push(obs, action, r.reward, r.obs, r.terminal);
    episode_return += r.reward;

    if (step >= run.init_steps && replay.size() >= static_cast<std::size_t>(agent.config().batch_size)) {
      UpdateMetrics m;
      try {
        m = agent.update(replay, step);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step));
      }
      critic.add(m.critic_loss);
      actor_l.add(m.actor_loss);
      alpha.add(m.alpha);
      encoder_l.add(m.encoder_loss);
      dyn.add(m.dynamics_loss);
      rew.add(m.reward_loss);
    }

    if (r.done()) {
      if (options.train_csv)
        *options.train_csv << step + 1 << ',' << log.episodes << ',' << num(episode_return) << ','
                           << num(critic.mean()) << ',' << num(actor_l.mean()) << ',' << num(alpha.mean()) << ','
                           << num(encoder_l.mean()) << ',' << num(dyn.mean()) << ',' << num(rew.mean()) << '\n';
      ++log.episodes;
      critic = actor_l = alpha = encoder_l = dyn = rew = MetricAccumulator{};
      episode_return = 0.0;
      obs = env->reset(derive_seed(episode_seeds, static_cast<std::uint64_t>(log.episodes)));
    } else {
      obs = r.obs;
    }

    const long done_steps = step + 1;
    if ((run.eval_every > 0 && done_steps % run.eval_every == 0) || done_steps == run.steps) evaluate(done_steps);
  }
  return log;
}

DiscretePolicy greedy_projection(const Agent& agent, const TabularEnvironment& env) {
  std::vector<std::vector<double>> obs;
  for (int s = 0; s < env.n_states(); ++s) obs.push_back(env.observation_of_state(s));
  const Matrix a = agent.actor.mean_action(agent.encode(columns(obs, env.obs_dim())));
  std::vector<int> actions(static_cast<std::size_t>(env.n_states()));
  for (int s = 0; s < env.n_states(); ++s)
    actions[static_cast<std::size_t>(s)] =
        env.discrete_action(std::span<const double>(a.col(s).data(), static_cast<std::size_t>(a.rows())));
  return DiscretePolicy::deterministic(actions, env.n_discrete_actions());
}

CorrelationReport correlation_report(const Agent& agent, const TabularEnvironment& env, double c,
                                     const MetricSolveOptions& options) {
  const FiniteMdp mdp = env.to_finite_mdp(agent.config().sac.gamma);
  const int n = mdp.n_states();
  if (n < 3) throw ConfigError("correlation needs at least three states");
  const PseudoMetric on_policy = bisim_metric_onpolicy(mdp, greedy_projection(agent, env), c, options);
  const PseudoMetric max_metric = bisim_metric_max(mdp, c, options);

  std::vector<std::vector<double>> obs;
  for (int s = 0; s < n; ++s) obs.push_back(env.observation_of_state(s));
  std::vector<double> learned = agent.pairwise_distances(columns(obs, env.obs_dim()));

  CorrelationReport rep;
  rep.n_states = n;
  const auto x = upper_triangle(learned, n);
  const auto y = upper_triangle(on_policy.data(), n);
  const auto y_max = upper_triangle(max_metric.data(), n);
  auto safe = [](auto f) {
    try {
      return f();
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::quiet_NaN();  // constant input
    }
  };
  rep.pearson = safe([&] { return pearson(x, y); });
  rep.spearman = safe([&] { return spearman(x, y); });
  rep.pearson_max = safe([&] { return pearson(x, y_max); });
  rep.spearman_max = safe([&] { return spearman(x, y_max); });
  const double w = agent.config().bisim.reward_weight;
  rep.distance_scale = w > 0.0 ? (1.0 - c) / w : 1.0;
  for (auto& v : learned) v *= rep.distance_scale;
  rep.learning_error = learning_error(PseudoMetric(n, learned), on_policy);
  return rep;
}

InvarianceReport invariance_report(const Agent& agent, const Environment& env, int pairs, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kPairStream));
  const FactorPairs fp = env.factor_pairs(pairs, rng);
  auto mean_l1 = [&](const ObservationPairs& p) {
    if (p.a.cols() == 0) throw ConfigError("environment provides no observation pairs for this factor group");
    const Matrix d = agent.encode(p.a) - agent.encode(p.b);
    return d.cwiseAbs().colwise().sum().mean();
  };
  InvarianceReport rep;
  rep.distractor_dist_mean = mean_l1(fp.distractor_only);
  rep.task_dist_mean = mean_l1(fp.task_only);
  rep.ratio = rep.distractor_dist_mean / rep.task_dist_mean;
  rep.pairs = static_cast<int>(fp.distractor_only.a.cols());
  return rep;
}

std::unique_ptr<Environment> swapped_distractor_env(const ExperimentConfig& config) {
  EnvSpec spec = config.env;
  if (spec.family == "point_mass") {
    auto env = make_env(spec);
    static_cast<ContinuousPointMass&>(*env).set_distractor_process(config.eval.swap_mean, config.eval.swap_rho,
                                                                    config.eval.swap_sigma);
    return env;
  }
  if (spec.family == "grid") {
    spec.chain_seed = config.eval.swap_chain_seed;
    return make_env(spec);
  }
  return nullptr;
}

json cmd_exact(const ExperimentConfig& config, const fs::path& out) {
  FiniteMdp mdp;
  if (!config.exact.mdp.empty()) {
    try {
      mdp = load_mdp(config.exact.mdp);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("exact.mdp: ") + e.what());
    }
  } else {
    auto env = make_env(config.env);
    mdp = require_tabular(*env, "exact").to_finite_mdp(config.agent.sac.gamma);
  }
  const double c = config.metric_c();
  if (c < mdp.discount())
    std::cerr << "warning: c = " << c << " is below the discount " << mdp.discount()
              << "; the value bounds are not guaranteed\n";
  MetricSolveOptions opts{config.exact.tol, default_thread_count()};
  MetricSolveStats stats;
  const PseudoMetric metric = bisim_metric_max(mdp, c, opts, &stats);
  const ValueFunction v = value_iteration(mdp);
  const DiscretePolicy pi = greedy_policy(mdp, v);
  const PseudoMetric on_policy = bisim_metric_onpolicy(mdp, pi, c, opts);
  const StatePartition partition = bisimulation_partition(mdp);

  fs::create_directories(out);
  write_metric_csv(metric, out / "metric.csv");
  write_metric_csv(on_policy, out / "metric_onpolicy.csv");
  write_partition_csv(partition, out / "partition.csv");

  json eps_reports = json::array();
  bool all_hold = true;
  for (double eps : config.exact.epsilons) {
    const AggregatedMdp agg = epsilon_aggregate(mdp, metric, eps);
    const auto rep = check_value_bound(mdp, agg, eps, c, config.exact.bound_tol, config.exact.learning_error);
    all_hold = all_hold && rep.holds;
    eps_reports.push_back({{"epsilon", eps},
                           {"clusters", agg.mdp.n_states()},
                           {"max_gap", rep.max_gap},
                           {"bound", rep.bound},
                           {"holds", rep.holds}});
  }
  const auto lip = check_lipschitz(mdp, metric, c, config.exact.bound_tol);
  all_hold = all_hold && lip.holds;

  json bounds = {{"schema", kSummarySchema},
                 {"n_states", mdp.n_states()},
                 {"n_actions", mdp.n_actions()},
                 {"gamma", mdp.discount()},
                 {"c", c},
                 {"learning_error", config.exact.learning_error},
                 {"value_bound", eps_reports},
                 {"lipschitz",
                  {{"max_ratio", lip.max_ratio},
                   {"max_excess", lip.max_excess},
                   {"violations", lip.violations},
                   {"holds", lip.holds}}},
                 {"all_hold", all_hold}};
  write_json(bounds, out / "bounds.json");

  json summary = summary_header("exact", config);
  summary["metric"] = {{"iterations", stats.iterations},
                       {"final_delta", stats.final_delta},
                       {"diameter", metric.diameter()},
                       {"onpolicy_diameter", on_policy.diameter()}};
  summary["partition_blocks"] = partition.n_blocks();
  summary["bounds"] = bounds;
  write_json(summary, out / "summary.json");
  return summary;
}

json cmd_train(const ExperimentConfig& config, const fs::path& out) {
  auto env = make_env(config.env);
  Agent agent(agent_config_for(config, *env), config.run.seed);
  fs::create_directories(out);
  auto train_csv = open_out(out / "train.csv");
  auto eval_csv = open_out(out / "eval.csv");
  auto latents_csv = open_out(out / "latents.csv");
  TrainOptions opts;
  opts.train_csv = &train_csv;
  opts.eval_csv = &eval_csv;
  opts.latents_csv = &latents_csv;
  const TrainingLog log = train_agent(agent, *env, config.run, config.run.seed, opts);

  json ckpt = agent.checkpoint();
  ckpt["env"] = to_json(config.env);
  write_json(ckpt, out / "checkpoint.json");

  json summary = summary_header("train", config);
  summary["steps"] = config.run.steps;
  summary["episodes"] = log.episodes;
  summary["evaluations"] = curve_json(log.evals);
  summary["final_return"] = log.evals.empty() ? json(nullptr) : json(log.evals.back().mean_return);
  write_json(summary, out / "summary.json");
  return summary;
}

json cmd_eval_correlation(const ExperimentConfig& config, const fs::path& out) {
  auto env = make_env(config.env);
  const auto& tab = require_tabular(*env, "eval-corr");
  const Agent agent = load_checkpoint(config, *env);
  const auto rep = correlation_report(agent, tab, config.eval_c(), {config.exact.tol, default_thread_count()});
  json summary = summary_header("eval-corr", config);
  summary["c"] = config.eval_c();
  summary["n_states"] = rep.n_states;
  summary["pearson"] = rep.pearson;
  summary["spearman"] = rep.spearman;
  summary["pearson_max_metric"] = rep.pearson_max;
  summary["spearman_max_metric"] = rep.spearman_max;
  summary["learning_error"] = rep.learning_error;
  summary["distance_scale"] = rep.distance_scale;
  fs::create_directories(out);
  write_json(summary, out / "summary.json");
  return summary;
}

json cmd_eval_invariance(const ExperimentConfig& config, const fs::path& out) {
  auto env = make_env(config.env);
  const Agent agent = load_checkpoint(config, *env);
  const auto rep = invariance_report(agent, *env, config.eval.pairs, config.run.seed);
  json summary = summary_header("eval-inv", config);
  summary["pairs"] = rep.pairs;
  summary["distractor_dist_mean"] = rep.distractor_dist_mean;
  summary["task_dist_mean"] = rep.task_dist_mean;
  summary["ratio"] = rep.ratio;
  fs::create_directories(out);
  write_json(summary, out / "summary.json");
  return summary;
}

std::optional<SwapReport> distractor_swap_report(Agent& agent, const ExperimentConfig& config) {
  auto swapped = swapped_distractor_env(config);
  if (!swapped) return std::nullopt;
  auto env = make_env(config.env);
  const std::uint64_t eval_seed = derive_seed(config.run.seed, kEvalStream);
  SwapReport report;
  report.default_return = evaluate_policy(agent, *env, config.run.eval_episodes, eval_seed);
  report.swapped_return = evaluate_policy(agent, *swapped, config.run.eval_episodes, eval_seed);
  report.return_drop = report.default_return - report.swapped_return;
  return report;
}

json cmd_eval_transfer(const ExperimentConfig& config, const fs::path& out) {
  auto env = make_env(config.env);
  Agent source = load_checkpoint(config, *env);
  if (config.eval.variant.empty()) throw ConfigError("eval.variant is required for eval-transfer");
  auto target = env->with_reward_variant(config.eval.variant);
  const bool premise = env->variant_preserves_ancestors(config.eval.variant);
  if (!premise)
    std::cerr << "warning: reward variant '" << config.eval.variant << "' depends on factors outside the causal "
              << "ancestors of '" << env->variant() << "'; the frozen encoder is not guaranteed to retain them\n";

  RunConfig run = config.run;
  if (config.eval.transfer_steps > 0) run.steps = config.eval.transfer_steps;

  AgentConfig frozen_cfg = source.config();
  frozen_cfg.freeze_encoder = true;
  Agent frozen(frozen_cfg, config.run.seed);
  frozen.load_encoder(source);
  AgentConfig scratch_cfg = source.config();
  scratch_cfg.freeze_encoder = false;
  Agent scratch(scratch_cfg, config.run.seed);

  const TrainingLog frozen_log = train_agent(frozen, *target, run, config.run.seed);
  const TrainingLog scratch_log = train_agent(scratch, *target, run, config.run.seed);
  const double random_return = random_policy_return(*target, run.eval_episodes, config.run.seed);

  fs::create_directories(out);
  write_curve(frozen_log.evals, out / "frozen_curve.csv");
  write_curve(scratch_log.evals, out / "scratch_curve.csv");

  const double f = final_return(frozen_log.evals);
  const double s = final_return(scratch_log.evals);
  json summary = summary_header("eval-transfer", config);
  summary["source_variant"] = env->variant();
  summary["target_variant"] = config.eval.variant;
  summary["ancestor_premise_holds"] = premise;
  summary["steps"] = run.steps;
  summary["frozen_final_return"] = f;
  summary["scratch_final_return"] = s;
  summary["random_return"] = random_return;
  summary["normalized_return"] = (s - random_return) != 0.0 ? (f - random_return) / (s - random_return)
                                                            : std::numeric_limits<double>::quiet_NaN();

  if (auto swap = distractor_swap_report(source, config)) {
    summary["swap"] = {{"default_return", swap->default_return},
                       {"swapped_return", swap->swapped_return},
                       {"return_drop", swap->return_drop}};
  } else {
    summary["swap"] = nullptr;
  }
  write_json(summary, out / "summary.json");
  return summary;
}

json run_command(const std::string& name, const ExperimentConfig& config, const fs::path& out) {
  if (name == "exact") return cmd_exact(config, out);
  if (name == "train") return cmd_train(config, out);
  if (name == "eval-corr") return cmd_eval_correlation(config, out);
  if (name == "eval-inv") return cmd_eval_invariance(config, out);
  if (name == "eval-transfer") return cmd_eval_transfer(config, out);
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace bisimkit

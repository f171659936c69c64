#include "bisimkit/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bisimkit/errors.hpp"
#include "bisimkit/toml_lite.hpp"

namespace bisimkit {

namespace {

using nlohmann::json;

// Reads keys from one table and rejects whatever is left over.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      table_ = doc.at(name_);
      if (!table_.is_object()) throw ConfigError("config section [" + name_ + "] must be a table");
    } else {
      table_ = json::object();
    }
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!table_.contains(key)) return;
    seen_.insert(key);
    const json& v = table_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(key, "expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        out = integral<T>(key, v);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(key, "expected a number");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key, "expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_same_v<T, std::vector<int>>) {
        if (!v.is_array()) fail(key, "expected an array of integers");
        out.clear();
        for (const auto& e : v) out.push_back(integral<int>(key, e));
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array()) fail(key, "expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
          if (!e.is_number()) fail(key, "expected an array of numbers");
          out.push_back(e.get<double>());
        }
      } else {
        static_assert(sizeof(T) == 0, "unsupported config field type");
      }
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  bool has(const std::string& key) const { return table_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : table_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
  }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError("[" + name_ + "] " + key + ": " + why);
  }

  template <class T>
  T integral(const std::string& key, const json& v) const {
    if (v.is_number_integer()) {
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
          fail(key, "must be nonnegative");
      return v.get<T>();
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) {
        if (std::is_unsigned_v<T> && d < 0) fail(key, "must be nonnegative");
        return static_cast<T>(d);
      }
    }
    fail(key, "expected an integer");
  }

  std::string name_;
  json table_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  if (run.steps < 0) throw ConfigError("run.steps must be nonnegative");
  if (run.init_steps < 0) throw ConfigError("run.init_steps must be nonnegative");
  if (run.buffer_capacity == 0) throw ConfigError("run.buffer_capacity must be positive");
  if (run.eval_every < 0) throw ConfigError("run.eval_every must be nonnegative");
  if (run.eval_episodes <= 0) throw ConfigError("run.eval_episodes must be positive");
  const double c = metric_c();
  if (!(c >= 0.0 && c < 1.0)) throw ConfigError("exact.c must lie in [0, 1)");
  for (double e : exact.epsilons)
    if (!(e >= 0.0)) throw ConfigError("exact.epsilons must be nonnegative");
  if (!(exact.tol > 0.0)) throw ConfigError("exact.tol must be positive");
  if (!(exact.bound_tol >= 0.0)) throw ConfigError("exact.bound_tol must be nonnegative");
  if (!(exact.learning_error >= 0.0)) throw ConfigError("exact.learning_error must be nonnegative");
  const double ec = eval_c();
  if (!(ec >= 0.0 && ec < 1.0)) throw ConfigError("eval.c must lie in [0, 1)");
  if (!eval.variant.empty()) {
    const auto allowed = family_variants(env.family);
    if (std::find(allowed.begin(), allowed.end(), eval.variant) == allowed.end())
      throw ConfigError("eval.variant '" + eval.variant + "' is not a " + env.family + " variant");
  }
  if (eval.pairs <= 0) throw ConfigError("eval.pairs must be positive");
  if (eval.transfer_steps < 0) throw ConfigError("eval.transfer_steps must be nonnegative");
  if (!(eval.swap_rho > -1.0 && eval.swap_rho < 1.0)) throw ConfigError("eval.swap_rho must lie in (-1, 1)");
  if (!(eval.swap_sigma >= 0.0)) throw ConfigError("eval.swap_sigma must be nonnegative");
}

ExperimentConfig experiment_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config document must be a table");
  for (const auto& [key, value] : doc.items())
    if (key != "env" && key != "agent" && key != "run" && key != "exact" && key != "eval")
      throw ConfigError("unknown config section '" + key + "'");

  ExperimentConfig c;

  Section env(doc, "env");
  env.read("family", c.env.family);
  env.read("variant", c.env.variant);
  env.read("episode_cap", c.env.episode_cap);
  env.read("grid_size", c.env.grid_size);
  env.read("chain_states", c.env.chain_states);
  env.read("chain_seed", c.env.chain_seed);
  env.read("absorbing_goal", c.env.absorbing_goal);
  env.read("distractor_dims", c.env.distractor_dims);
  env.read("dt", c.env.dt);
  env.read("action_cost", c.env.action_cost);
  env.read("distractor_rho", c.env.distractor_rho);
  env.read("distractor_sigma", c.env.distractor_sigma);
  env.read("distractor_mean", c.env.distractor_mean);
  env.read("mixing_seed", c.env.mixing_seed);
  env.read("s1_size", c.env.s1_size);
  env.read("s2_size", c.env.s2_size);
  env.read("s3_size", c.env.s3_size);
  env.read("factored_actions", c.env.factored_actions);
  env.read("factored_seed", c.env.factored_seed);
  env.finish();

  Section ag(doc, "agent");
  std::string algorithm = to_string(c.agent.algorithm);
  ag.read("algorithm", algorithm);
  c.agent.algorithm = algorithm_from_string(algorithm);
  ag.read("latent_dim", c.agent.latent_dim);
  ag.read("encoder_hidden", c.agent.encoder_hidden);
  std::string encoder_output = nn::to_string(c.agent.encoder_output);
  ag.read("encoder_output", encoder_output);
  try {
    c.agent.encoder_output = nn::activation_from_string(encoder_output);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[agent] encoder_output: ") + e.what());
  }
  ag.read("actor_hidden", c.agent.actor_hidden);
  ag.read("critic_hidden", c.agent.critic_hidden);
  ag.read("model_hidden", c.agent.model_hidden);
  ag.read("distance_hidden", c.agent.distance_hidden);
  ag.read("decoder_hidden", c.agent.decoder_hidden);
  ag.read("batch_size", c.agent.batch_size);
  ag.read("critic_lr", c.agent.critic_lr);
  ag.read("actor_lr", c.agent.actor_lr);
  ag.read("encoder_lr", c.agent.encoder_lr);
  ag.read("model_lr", c.agent.model_lr);
  ag.read("alpha_lr", c.agent.alpha_lr);
  ag.read("alpha_beta1", c.agent.alpha_beta1);
  ag.read("gamma", c.agent.sac.gamma);
  ag.read("tau_critic", c.agent.sac.tau_critic);
  ag.read("tau_encoder", c.agent.sac.tau_encoder);
  ag.read("actor_update_freq", c.agent.sac.actor_update_freq);
  ag.read("critic_target_update_freq", c.agent.sac.critic_target_update_freq);
  ag.read("log_std_min", c.agent.sac.log_std_min);
  ag.read("log_std_max", c.agent.sac.log_std_max);
  ag.read("init_temperature", c.agent.sac.init_temperature);
  // The transition weight follows the discount unless set explicitly.
  c.agent.bisim.transition_weight = c.agent.sac.gamma;
  ag.read("bisim_reward_weight", c.agent.bisim.reward_weight);
  ag.read("bisim_transition_weight", c.agent.bisim.transition_weight);
  if (ag.has("bisim_c")) {
    if (ag.has("bisim_reward_weight") || ag.has("bisim_transition_weight"))
      throw ConfigError("[agent] bisim_c cannot be combined with explicit bisim weights");
    double bc = 0.0;
    ag.read("bisim_c", bc);
    if (!(bc >= 0.0 && bc < 1.0)) throw ConfigError("[agent] bisim_c must lie in [0, 1)");
    c.agent.bisim = BisimWeights::from_c(bc);
  }
  ag.read("sigma_min", c.agent.sigma_min);
  ag.read("sigma_max", c.agent.sigma_max);
  ag.read("dynamics_nll", c.agent.dynamics_nll);
  ag.read("bisim_reward_from_prediction", c.agent.bisim_reward_from_prediction);
  ag.read("freeze_encoder", c.agent.freeze_encoder);
  ag.finish();

  Section run(doc, "run");
  run.read("seed", c.run.seed);
  run.read("steps", c.run.steps);
  run.read("init_steps", c.run.init_steps);
  run.read("buffer_capacity", c.run.buffer_capacity);
  run.read("eval_every", c.run.eval_every);
  run.read("eval_episodes", c.run.eval_episodes);
  run.finish();

  Section ex(doc, "exact");
  ex.read("c", c.exact.c);
  ex.read("epsilons", c.exact.epsilons);
  ex.read("tol", c.exact.tol);
  ex.read("bound_tol", c.exact.bound_tol);
  ex.read("learning_error", c.exact.learning_error);
  std::string mdp;
  ex.read("mdp", mdp);
  c.exact.mdp = resolve(base_dir, mdp);
  ex.finish();

  Section ev(doc, "eval");
  std::string checkpoint;
  ev.read("checkpoint", checkpoint);
  c.eval.checkpoint = resolve(base_dir, checkpoint);
  ev.read("c", c.eval.c);
  ev.read("pairs", c.eval.pairs);
  ev.read("variant", c.eval.variant);
  ev.read("transfer_steps", c.eval.transfer_steps);
  ev.read("swap_mean", c.eval.swap_mean);
  ev.read("swap_rho", c.eval.swap_rho);
  ev.read("swap_sigma", c.eval.swap_sigma);
  ev.read("swap_chain_seed", c.eval.swap_chain_seed);
  ev.finish();

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(load_config_document(path), path.parent_path());
}

json to_json(const EnvSpec& s) {
  return {{"family", s.family},
          {"variant", s.variant},
          {"episode_cap", s.episode_cap},
          {"grid_size", s.grid_size},
          {"chain_states", s.chain_states},
          {"chain_seed", s.chain_seed},
          {"absorbing_goal", s.absorbing_goal},
          {"distractor_dims", s.distractor_dims},
          {"dt", s.dt},
          {"action_cost", s.action_cost},
          {"distractor_rho", s.distractor_rho},
          {"distractor_sigma", s.distractor_sigma},
          {"distractor_mean", s.distractor_mean},
          {"mixing_seed", s.mixing_seed},
          {"s1_size", s.s1_size},
          {"s2_size", s.s2_size},
          {"s3_size", s.s3_size},
          {"factored_actions", s.factored_actions},
          {"factored_seed", s.factored_seed}};
}

json to_json(const ExperimentConfig& c) {
  json agent = to_json(c.agent);
  agent.erase("obs_dim");
  agent.erase("action_dim");
  return {{"env", to_json(c.env)},
          {"agent", agent},
          {"run",
           {{"seed", c.run.seed},
            {"steps", c.run.steps},
            {"init_steps", c.run.init_steps},
            {"buffer_capacity", c.run.buffer_capacity},
            {"eval_every", c.run.eval_every},
            {"eval_episodes", c.run.eval_episodes}}},
          {"exact",
           {{"c", c.metric_c()},
            {"epsilons", c.exact.epsilons},
            {"tol", c.exact.tol},
            {"bound_tol", c.exact.bound_tol},
            {"learning_error", c.exact.learning_error},
            {"mdp", c.exact.mdp.string()}}},
          {"eval",
           {{"checkpoint", c.eval.checkpoint.string()},
            {"c", c.eval_c()},
            {"pairs", c.eval.pairs},
            {"variant", c.eval.variant},
            {"transfer_steps", c.eval.transfer_steps},
            {"swap_mean", c.eval.swap_mean},
            {"swap_rho", c.eval.swap_rho},
            {"swap_sigma", c.eval.swap_sigma},
            {"swap_chain_seed", c.eval.swap_chain_seed}}}};
}

}  // namespace bisimkit

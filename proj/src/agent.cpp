#include "bisimkit/agent.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bisimkit/errors.hpp"

namespace bisimkit {

using nn::Matrix;
using nn::Vector;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

Matrix gather_cols(const Matrix& m, std::span<const int> perm) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(perm.size()));
  for (std::size_t b = 0; b < perm.size(); ++b) out.col(static_cast<Eigen::Index>(b)) = m.col(perm[b]);
  return out;
}

Vector gather(const Vector& v, std::span<const int> perm) {
  Vector out(static_cast<Eigen::Index>(perm.size()));
  for (std::size_t b = 0; b < perm.size(); ++b) out(static_cast<Eigen::Index>(b)) = v(perm[b]);
  return out;
}

// grad_i belongs to column b, grad_j to column perm[b].
Matrix scatter_pair_grads(const Matrix& grad_i, const Matrix& grad_j, std::span<const int> perm) {
  Matrix out = grad_i;
  for (std::size_t b = 0; b < perm.size(); ++b) out.col(perm[b]) += grad_j.col(static_cast<Eigen::Index>(b));
  return out;
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
}
void check_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be a finite value >= 0");
}
void check_widths(const std::vector<int>& w, const char* name) {
  for (int x : w)
    if (x <= 0) throw ConfigError(std::string(name) + " widths must be positive");
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kDbc: return "dbc";
    case Algorithm::kCastro: return "castro";
    case Algorithm::kReconstruction: return "reconstruction";
    case Algorithm::kSacRaw: return "sac_raw";
  }
  return "dbc";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "dbc") return Algorithm::kDbc;
  if (s == "castro") return Algorithm::kCastro;
  if (s == "reconstruction") return Algorithm::kReconstruction;
  if (s == "sac_raw") return Algorithm::kSacRaw;
  throw ConfigError("unknown algorithm '" + s + "'");
}

void AgentConfig::validate() const {
  if (obs_dim <= 0 || action_dim <= 0 || latent_dim <= 0) throw ConfigError("agent dimensions must be positive");
  check_widths(encoder_hidden, "encoder_hidden");
  check_widths(actor_hidden, "actor_hidden");
  check_widths(critic_hidden, "critic_hidden");
  check_widths(model_hidden, "model_hidden");
  check_widths(decoder_hidden, "decoder_hidden");
  if (distance_hidden <= 0) throw ConfigError("distance_hidden must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  check_nonnegative(critic_lr, "critic_lr");
  check_nonnegative(actor_lr, "actor_lr");
  check_nonnegative(encoder_lr, "encoder_lr");
  check_nonnegative(model_lr, "model_lr");
  check_nonnegative(alpha_lr, "alpha_lr");
  if (!(alpha_beta1 >= 0.0 && alpha_beta1 < 1.0)) throw ConfigError("alpha_beta1 must lie in [0, 1)");
  if (!(sac.gamma >= 0.0 && sac.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(sac.tau_critic >= 0.0 && sac.tau_critic <= 1.0)) throw ConfigError("tau_critic must lie in [0, 1]");
  if (!(sac.tau_encoder >= 0.0 && sac.tau_encoder <= 1.0)) throw ConfigError("tau_encoder must lie in [0, 1]");
  if (sac.actor_update_freq <= 0 || sac.critic_target_update_freq <= 0)
    throw ConfigError("update frequencies must be positive");
  if (!(sac.log_std_min < sac.log_std_max)) throw ConfigError("log_std_min must be below log_std_max");
  check_positive(sac.init_temperature, "init_temperature");
  check_nonnegative(bisim.reward_weight, "bisim reward weight");
  check_nonnegative(bisim.transition_weight, "bisim transition weight");
  if (!(sigma_min > 0.0 && sigma_min < sigma_max)) throw ConfigError("need 0 < sigma_min < sigma_max");
}

nlohmann::json to_json(const AgentConfig& c) {
  return {{"algorithm", to_string(c.algorithm)},
          {"obs_dim", c.obs_dim},
          {"action_dim", c.action_dim},
          {"latent_dim", c.latent_dim},
          {"encoder_hidden", c.encoder_hidden},
          {"encoder_output", nn::to_string(c.encoder_output)},
          {"actor_hidden", c.actor_hidden},
          {"critic_hidden", c.critic_hidden},
          {"model_hidden", c.model_hidden},
          {"distance_hidden", c.distance_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"batch_size", c.batch_size},
          {"critic_lr", c.critic_lr},
          {"actor_lr", c.actor_lr},
          {"encoder_lr", c.encoder_lr},
          {"model_lr", c.model_lr},
          {"alpha_lr", c.alpha_lr},
          {"alpha_beta1", c.alpha_beta1},
          {"gamma", c.sac.gamma},
          {"tau_critic", c.sac.tau_critic},
          {"tau_encoder", c.sac.tau_encoder},
          {"actor_update_freq", c.sac.actor_update_freq},
          {"critic_target_update_freq", c.sac.critic_target_update_freq},
          {"log_std_min", c.sac.log_std_min},
          {"log_std_max", c.sac.log_std_max},
          {"init_temperature", c.sac.init_temperature},
          {"bisim_reward_weight", c.bisim.reward_weight},
          {"bisim_transition_weight", c.bisim.transition_weight},
          {"sigma_min", c.sigma_min},
          {"sigma_max", c.sigma_max},
          {"dynamics_nll", c.dynamics_nll},
          {"bisim_reward_from_prediction", c.bisim_reward_from_prediction},
          {"freeze_encoder", c.freeze_encoder}};
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig c;
  c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  c.obs_dim = j.at("obs_dim").get<int>();
  c.action_dim = j.at("action_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
  c.encoder_output = nn::activation_from_string(j.at("encoder_output").get<std::string>());
  c.actor_hidden = j.at("actor_hidden").get<std::vector<int>>();
  c.critic_hidden = j.at("critic_hidden").get<std::vector<int>>();
  c.model_hidden = j.at("model_hidden").get<std::vector<int>>();
  c.distance_hidden = j.at("distance_hidden").get<int>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
  c.batch_size = j.at("batch_size").get<int>();
  c.critic_lr = j.at("critic_lr").get<double>();
  c.actor_lr = j.at("actor_lr").get<double>();
  c.encoder_lr = j.at("encoder_lr").get<double>();
  c.model_lr = j.at("model_lr").get<double>();
  c.alpha_lr = j.at("alpha_lr").get<double>();
  c.alpha_beta1 = j.at("alpha_beta1").get<double>();
  c.sac.gamma = j.at("gamma").get<double>();
  c.sac.tau_critic = j.at("tau_critic").get<double>();
  c.sac.tau_encoder = j.at("tau_encoder").get<double>();
  c.sac.actor_update_freq = j.at("actor_update_freq").get<int>();
  c.sac.critic_target_update_freq = j.at("critic_target_update_freq").get<int>();
  c.sac.log_std_min = j.at("log_std_min").get<double>();
  c.sac.log_std_max = j.at("log_std_max").get<double>();
  c.sac.init_temperature = j.at("init_temperature").get<double>();
  c.bisim.reward_weight = j.at("bisim_reward_weight").get<double>();
  c.bisim.transition_weight = j.at("bisim_transition_weight").get<double>();
  c.sigma_min = j.at("sigma_min").get<double>();
  c.sigma_max = j.at("sigma_max").get<double>();
  c.dynamics_nll = j.at("dynamics_nll").get<bool>();
  c.bisim_reward_from_prediction = j.at("bisim_reward_from_prediction").get<bool>();
  c.freeze_encoder = j.at("freeze_encoder").get<bool>();
  return c;
}

Agent::Agent(const AgentConfig& config, std::uint64_t seed)
    : config_(config), update_rng_(derive_seed(seed, 1)), act_rng_(derive_seed(seed, 2)) {
  config_.validate();
  Rng init(derive_seed(seed, 0));
  const int L = config_.latent_dim;
  const int A = config_.action_dim;
  encoder = nn::Mlp(
      nn::MlpSpec{widths(config_.obs_dim, config_.encoder_hidden, L), nn::Activation::kRelu, config_.encoder_output},
      init);
  encoder_target = encoder;
  actor = Actor(L, A, config_.actor_hidden, config_.sac.log_std_min, config_.sac.log_std_max, init);
  critics = CriticPair(L, A, config_.critic_hidden, init);
  temperature.log_alpha = std::log(config_.sac.init_temperature);
  temperature.target_entropy = -static_cast<double>(A);
  dynamics = DynamicsModel(L, A, config_.model_hidden, config_.sigma_min, config_.sigma_max, init);
  reward_model = nn::Mlp(nn::MlpSpec{widths(L, config_.model_hidden, 1)}, init);
  distance = nn::Mlp(nn::MlpSpec{{2 * L, config_.distance_hidden, 1}, nn::Activation::kRelu, nn::Activation::kSoftplus},
                     init);
  distance_target = distance;
  decoder = nn::Mlp(nn::MlpSpec{widths(L, config_.decoder_hidden, config_.obs_dim)}, init);

  critic_opt_ = nn::Adam({config_.critic_lr});
  actor_opt_ = nn::Adam({config_.actor_lr});
  alpha_opt_ = nn::Adam({config_.alpha_lr, config_.alpha_beta1});
  encoder_opt_ = nn::Adam({config_.encoder_lr});
  model_opt_ = nn::Adam({config_.model_lr});
  aux_opt_ = nn::Adam({config_.encoder_lr});
}

Matrix Agent::normal_noise(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = standard_normal(rng);
  return m;
}

std::vector<double> Agent::act(std::span<const double> obs, bool deterministic) {
  if (static_cast<int>(obs.size()) != config_.obs_dim) throw std::invalid_argument("Agent::act: observation size");
  Matrix o = Eigen::Map<const Matrix>(obs.data(), config_.obs_dim, 1);
  const Matrix z = encoder.forward(o);
  Matrix a;
  if (deterministic) {
    a = actor.mean_action(z);
  } else {
    a = actor.sample(z, normal_noise(config_.action_dim, 1, act_rng_)).action;
  }
  if (!a.allFinite()) throw NumericalError("non-finite action");
  return {a.data(), a.data() + a.size()};
}

Matrix Agent::encode(const Matrix& obs) const { return encoder.forward(obs); }

std::vector<double> Agent::pairwise_distances(const Matrix& obs) const {
  const Matrix z = encode(obs);
  const int n = static_cast<int>(z.cols());
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  if (config_.algorithm == Algorithm::kCastro) {
    std::vector<int> ii, jj;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        ii.push_back(i);
        jj.push_back(j);
      }
    if (ii.empty()) return d;
    const Matrix zi = gather_cols(z, ii), zj = gather_cols(z, jj);
    const Vector a = pair_distance(distance, zi, zj);
    const Vector b = pair_distance(distance, zj, zi);
    for (std::size_t k = 0; k < ii.size(); ++k) {
      const double v = 0.5 * (a(static_cast<Eigen::Index>(k)) + b(static_cast<Eigen::Index>(k)));
      d[static_cast<std::size_t>(ii[k]) * n + jj[k]] = v;
      d[static_cast<std::size_t>(jj[k]) * n + ii[k]] = v;
    }
    return d;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = (z.col(i) - z.col(j)).lpNorm<1>();
      d[static_cast<std::size_t>(i) * n + j] = v;
      d[static_cast<std::size_t>(j) * n + i] = v;
    }
  return d;
}

void Agent::critic_phase(const Batch& batch, UpdateMetrics& m) {
  const bool train_encoder = !config_.freeze_encoder;
  critics.zero_grad();
  encoder.zero_grad();
  nn::Mlp::Cache enc_cache;
  const Matrix& z = encoder.forward(batch.obs, enc_cache);
  const Matrix next_z = encoder_target.forward(batch.next_obs);
  const double alpha = temperature.alpha();
  const Vector next_v =
      soft_value(actor, critics, next_z, normal_noise(config_.action_dim, batch.size(), update_rng_), alpha);
  const Vector target = bellman_target(batch.reward, batch.not_done, next_v, config_.sac.gamma);
  Matrix grad_z;
  m.critic_loss = critic_loss(critics, z, batch.action, target, train_encoder ? &grad_z : nullptr);
  m.mean_target_value = next_v.mean();
  require_finite(m.critic_loss, "critic loss");
  if (train_encoder) {
    encoder.backward(enc_cache, grad_z);
    critic_opt_.step(nn::join({critics.online_params(), encoder.params()}));
  } else {
    critic_opt_.step(critics.online_params());
  }
}

void Agent::actor_phase(const Batch& batch, UpdateMetrics& m) {
  const Matrix z = encoder.forward(batch.obs);  // detached
  actor.net.zero_grad();
  Vector log_prob;
  const double alpha = temperature.alpha();
  m.actor_loss =
      actor_loss(actor, critics, z, normal_noise(config_.action_dim, batch.size(), update_rng_), alpha, &log_prob);
  require_finite(m.actor_loss, "actor loss");
  actor_opt_.step(actor.net.params());
  temperature.grad = 0.0;
  m.alpha_loss = alpha_loss(temperature, log_prob);
  require_finite(m.alpha_loss, "temperature loss");
  alpha_opt_.step(temperature.params());
}

void Agent::target_phase() {
  nn::polyak_update(critics.q1_target, critics.q1, config_.sac.tau_critic);
  nn::polyak_update(critics.q2_target, critics.q2, config_.sac.tau_critic);
  nn::polyak_update(encoder_target, encoder, config_.sac.tau_encoder);
  if (config_.algorithm == Algorithm::kCastro) nn::polyak_update(distance_target, distance, config_.sac.tau_encoder);
}

void Agent::bisim_phase(const Batch& batch, std::span<const int> perm, UpdateMetrics& m) {
  encoder.zero_grad();
  nn::Mlp::Cache cache;
  const Matrix& z = encoder.forward(batch.obs, cache);
  // stop-gradient branch: model outputs at the mean policy action
  const Matrix z_bar = z;
  const Matrix a_bar = actor.mean_action(z_bar);
  Matrix mu, sigma;
  dynamics.predict(z_bar, a_bar, mu, sigma);
  const Vector r_hat =
      reward_model.forward(config_.bisim_reward_from_prediction ? mu : z_bar).row(0).transpose();
  if (!config_.dynamics_nll) sigma.setOnes();
  Matrix gi, gj;
  m.encoder_loss = bisim_loss(z, gather_cols(z, perm), r_hat, gather(r_hat, perm), mu, sigma, gather_cols(mu, perm),
                              gather_cols(sigma, perm), config_.bisim, &gi, &gj);
  require_finite(m.encoder_loss, "encoder loss");
  encoder.backward(cache, scatter_pair_grads(gi, gj, perm));
  encoder_opt_.step(encoder.params());
}

void Agent::model_phase(const Batch& batch, UpdateMetrics& m) {
  const bool train_encoder = !config_.freeze_encoder;
  encoder.zero_grad();
  dynamics.net.zero_grad();
  reward_model.zero_grad();
  nn::Mlp::Cache cache;
  const Matrix& z = encoder.forward(batch.obs, cache);
  const Matrix next_bar = encoder.forward(batch.next_obs);
  Matrix grad_z;
  const auto losses = model_losses(dynamics, reward_model, z, batch.action, next_bar, batch.reward,
                                   config_.dynamics_nll, &grad_z);
  m.dynamics_loss = losses.dynamics;
  m.reward_loss = losses.reward;
  if (train_encoder) {
    encoder.backward(cache, grad_z);
    model_opt_.step(nn::join({dynamics.net.params(), reward_model.params(), encoder.params()}));
  } else {
    model_opt_.step(nn::join({dynamics.net.params(), reward_model.params()}));
  }
}

void Agent::castro_phase(const Batch& batch, std::span<const int> perm, UpdateMetrics& m) {
  encoder.zero_grad();
  distance.zero_grad();
  nn::Mlp::Cache cache;
  const Matrix& z = encoder.forward(batch.obs, cache);
  const Matrix next_t = encoder_target.forward(batch.next_obs);
  const Vector next_d = pair_distance(distance_target, next_t, gather_cols(next_t, perm));
  Matrix gi, gj;
  m.encoder_loss = castro_loss(distance, z, gather_cols(z, perm), batch.reward, gather(batch.reward, perm), next_d,
                               config_.sac.gamma, &gi, &gj);
  encoder.backward(cache, scatter_pair_grads(gi, gj, perm));
  aux_opt_.step(nn::join({distance.params(), encoder.params()}));
}

void Agent::reconstruction_phase(const Batch& batch, UpdateMetrics& m) {
  encoder.zero_grad();
  decoder.zero_grad();
  nn::Mlp::Cache cache;
  const Matrix& z = encoder.forward(batch.obs, cache);
  Matrix grad_z;
  m.encoder_loss = reconstruction_loss(decoder, z, batch.obs, &grad_z);
  encoder.backward(cache, grad_z);
  aux_opt_.step(nn::join({decoder.params(), encoder.params()}));
}

UpdateMetrics Agent::update(const ReplayBuffer& replay, long step) {
  return update_on(replay.sample(static_cast<std::size_t>(config_.batch_size), update_rng_), step);
}

UpdateMetrics Agent::update_on(const Batch& batch, long step) {
  UpdateMetrics m;
  m.actor_loss = m.alpha_loss = kNaN;
  m.encoder_loss = m.dynamics_loss = m.reward_loss = kNaN;
  const bool paired = config_.algorithm == Algorithm::kDbc || config_.algorithm == Algorithm::kCastro;
  std::vector<int> perm;
  if (paired) perm = random_permutation(batch.size(), update_rng_);

  critic_phase(batch, m);
  if (step % config_.sac.actor_update_freq == 0) actor_phase(batch, m);
  if (step % config_.sac.critic_target_update_freq == 0) target_phase();

  if (!config_.freeze_encoder) {
    switch (config_.algorithm) {
      case Algorithm::kDbc:
        bisim_phase(batch, perm, m);
        model_phase(batch, m);
        break;
      case Algorithm::kCastro: castro_phase(batch, perm, m); break;
      case Algorithm::kReconstruction: reconstruction_phase(batch, m); break;
      case Algorithm::kSacRaw: break;
    }
  }
  m.alpha = temperature.alpha();
  return m;
}

void Agent::load_encoder(const Agent& other) {
  if (!(encoder.spec() == other.encoder.spec())) throw ConfigError("encoder shapes differ between agents");
  encoder = other.encoder;
  encoder_target = other.encoder_target;
}

nlohmann::json Agent::checkpoint() const {
  return {{"format", "bisimkit-agent/1"},
          {"config", to_json(config_)},
          {"log_alpha", temperature.log_alpha},
          {"encoder", nn::to_json(encoder)},
          {"encoder_target", nn::to_json(encoder_target)},
          {"actor", nn::to_json(actor.net)},
          {"q1", nn::to_json(critics.q1)},
          {"q2", nn::to_json(critics.q2)},
          {"q1_target", nn::to_json(critics.q1_target)},
          {"q2_target", nn::to_json(critics.q2_target)},
          {"dynamics", nn::to_json(dynamics.net)},
          {"reward", nn::to_json(reward_model)},
          {"distance", nn::to_json(distance)},
          {"distance_target", nn::to_json(distance_target)},
          {"decoder", nn::to_json(decoder)}};
}

Agent Agent::from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "bisimkit-agent/1") throw ConfigError("not an agent checkpoint");
  Agent agent(agent_config_from_json(j.at("config")), 0);
  auto load = [&](nn::Mlp& net, const char* key) {
    nn::Mlp loaded = nn::mlp_from_json(j.at(key));
    if (!(loaded.spec() == net.spec())) throw ConfigError(std::string("checkpoint network '") + key + "' has wrong shape");
    net = std::move(loaded);
  };
  agent.temperature.log_alpha = j.at("log_alpha").get<double>();
  load(agent.encoder, "encoder");
  load(agent.encoder_target, "encoder_target");
  load(agent.actor.net, "actor");
  load(agent.critics.q1, "q1");
  load(agent.critics.q2, "q2");
  load(agent.critics.q1_target, "q1_target");
  load(agent.critics.q2_target, "q2_target");
  load(agent.dynamics.net, "dynamics");
  load(agent.reward_model, "reward");
  load(agent.distance, "distance");
  load(agent.distance_target, "distance_target");
  load(agent.decoder, "decoder");
  return agent;
}

}  // namespace bisimkit

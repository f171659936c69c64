#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bisimkit/dbc.hpp"
#include "bisimkit/nn.hpp"
#include "bisimkit/replay.hpp"
#include "bisimkit/sac.hpp"

namespace bisimkit {

enum class Algorithm { kDbc, kCastro, kReconstruction, kSacRaw };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct AgentConfig {
  Algorithm algorithm = Algorithm::kDbc;
  int obs_dim = 1;
  int action_dim = 1;
  int latent_dim = 50;
  std::vector<int> encoder_hidden{};
  nn::Activation encoder_output = nn::Activation::kIdentity;
  std::vector<int> actor_hidden{200, 200};
  std::vector<int> critic_hidden{200, 200};
  std::vector<int> model_hidden{200, 200};
  int distance_hidden = 729;
  std::vector<int> decoder_hidden{200};

  int batch_size = 128;
  double critic_lr = 1e-5;
  double actor_lr = 1e-5;
  double encoder_lr = 1e-5;
  double model_lr = 1e-5;
  double alpha_lr = 1e-4;
  double alpha_beta1 = 0.9;

  SacConfig sac;
  BisimWeights bisim;
  double sigma_min = 1e-3;
  double sigma_max = 10.0;
  bool dynamics_nll = true;
  // Reward term of the bisimulation target: the reward model applied to the
  // predicted next-latent mean at the mean policy action (the same
  // composition it is trained on), or applied directly to the latent.
  bool bisim_reward_from_prediction = true;
  // Encoder parameters are never updated (transfer runs).
  bool freeze_encoder = false;

  void validate() const;
};

nlohmann::json to_json(const AgentConfig& c);
AgentConfig agent_config_from_json(const nlohmann::json& j);

// Scalars from one update; actor/alpha entries are NaN on steps without an
// actor update, representation entries NaN when the algorithm has none.
struct UpdateMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double encoder_loss = 0.0;
  double dynamics_loss = 0.0;
  double reward_loss = 0.0;
  double mean_target_value = 0.0;
};

class Agent {
 public:
  Agent(const AgentConfig& config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }

  std::vector<double> act(std::span<const double> obs, bool deterministic);

  // Samples a batch from the buffer and applies one update.
  UpdateMetrics update(const ReplayBuffer& replay, long step);
  // One update on the given batch: pair the batch, policy update, then the
  // representation update (bisimulation, then dynamics and reward for DBC).
  UpdateMetrics update_on(const Batch& batch, long step);

  nn::Matrix encode(const nn::Matrix& obs) const;
  // Learned pair distances: ||z_i - z_j||_1, or the symmetrised distance
  // network output for the Castro-style agent.
  std::vector<double> pairwise_distances(const nn::Matrix& obs) const;

  // Copies another agent's encoder (online and target).
  void load_encoder(const Agent& other);

  nlohmann::json checkpoint() const;
  static Agent from_checkpoint(const nlohmann::json& j);

  nn::Mlp encoder, encoder_target;
  Actor actor;
  CriticPair critics;
  Temperature temperature;
  DynamicsModel dynamics;
  nn::Mlp reward_model;
  nn::Mlp distance, distance_target;
  nn::Mlp decoder;

  // Exposed for tests of the individual update phases.
  void critic_phase(const Batch& batch, UpdateMetrics& m);
  void actor_phase(const Batch& batch, UpdateMetrics& m);
  void target_phase();
  void bisim_phase(const Batch& batch, std::span<const int> perm, UpdateMetrics& m);
  void model_phase(const Batch& batch, UpdateMetrics& m);
  void castro_phase(const Batch& batch, std::span<const int> perm, UpdateMetrics& m);
  void reconstruction_phase(const Batch& batch, UpdateMetrics& m);

 private:
  nn::Matrix normal_noise(int rows, int cols, Rng& rng);

  AgentConfig config_;
  Rng update_rng_, act_rng_;
  nn::Adam critic_opt_, actor_opt_, alpha_opt_, encoder_opt_, model_opt_, aux_opt_;
};

}  // namespace bisimkit

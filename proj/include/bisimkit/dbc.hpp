#pragma once

#include <vector>

#include "bisimkit/nn.hpp"

namespace bisimkit {

// Weights of the bisimulation target |dR| * reward_weight + W2 * transition_weight.
// The defaults follow the deep-learning form (reward weight 1, transition
// weight gamma); from_c gives the (1 - c, c) weighting of the exact metric.
struct BisimWeights {
  double reward_weight = 1.0;
  double transition_weight = 0.99;

  static BisimWeights from_c(double c) { return {1.0 - c, c}; }
};

// [latent; action] -> diagonal Gaussian over the next latent.
// sigma = sigma_min + (sigma_max - sigma_min) * sigmoid(raw).
class DynamicsModel {
 public:
  struct Output {
    nn::Mlp::Cache cache;
    nn::Matrix mean;
    nn::Matrix sigma;
    nn::Matrix raw;
  };

  DynamicsModel() = default;
  DynamicsModel(int latent_dim, int action_dim, const std::vector<int>& hidden, double sigma_min,
                double sigma_max, Rng& rng);

  int latent_dim() const { return latent_dim_; }
  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }

  Output forward(const nn::Matrix& z, const nn::Matrix& action) const;
  // Forward without a cache.
  void predict(const nn::Matrix& z, const nn::Matrix& action, nn::Matrix& mean, nn::Matrix& sigma) const;
  // Accumulates parameter gradients; returns dL/d[latent; action].
  nn::Matrix backward(const Output& out, const nn::Matrix& grad_mean, const nn::Matrix& grad_sigma);

  nn::Mlp net;

 private:
  int latent_dim_ = 0;
  double sigma_min_ = 1e-3;
  double sigma_max_ = 10.0;
};

std::vector<int> random_permutation(int n, Rng& rng);

// Mean over columns of (||z_i - z_j||_1 - target)^2 with
//   target = reward_weight |r_i - r_j| + transition_weight W2(N(mu_i, sigma_i), N(mu_j, sigma_j)).
// Everything except z is a constant: gradients are returned only for z_i and z_j.
double bisim_loss(const nn::Matrix& z_i, const nn::Matrix& z_j, const nn::Vector& r_i, const nn::Vector& r_j,
                  const nn::Matrix& mu_i, const nn::Matrix& sigma_i, const nn::Matrix& mu_j,
                  const nn::Matrix& sigma_j, const BisimWeights& weights, nn::Matrix* grad_zi,
                  nn::Matrix* grad_zj);

struct ModelLosses {
  double dynamics = 0.0;
  double reward = 0.0;
};

// Dynamics: mean over columns of the Gaussian negative log-likelihood of
// next_latent under P(z, a); with nll false the stddev is pinned to 1 and the
// loss is 0.5 ||mu - next_latent||^2. Reward: mean of (R(mu) - r)^2, using the
// predicted mean latent. Gradients accumulate in both nets; dL/dz (sum of both
// losses) is written to grad_z when non-null.
ModelLosses model_losses(DynamicsModel& dynamics, nn::Mlp& reward_model, const nn::Matrix& z,
                         const nn::Matrix& action, const nn::Matrix& next_latent, const nn::Vector& reward,
                         bool nll, nn::Matrix* grad_z);

// psi([z_i; z_j]) for every column.
nn::Vector pair_distance(const nn::Mlp& psi, const nn::Matrix& z_i, const nn::Matrix& z_j);

// Mean over columns of (psi(z_i, z_j) - |r_i - r_j| - gamma * next_distance)^2;
// next_distance comes from the target copies and is constant. Accumulates
// psi gradients and returns dL/dz_i, dL/dz_j.
double castro_loss(nn::Mlp& psi, const nn::Matrix& z_i, const nn::Matrix& z_j, const nn::Vector& r_i,
                   const nn::Vector& r_j, const nn::Vector& next_distance, double gamma, nn::Matrix* grad_zi,
                   nn::Matrix* grad_zj);

// Mean over all elements of (decoder(z) - obs)^2. Accumulates decoder gradients.
double reconstruction_loss(nn::Mlp& decoder, const nn::Matrix& z, const nn::Matrix& obs, nn::Matrix* grad_z);

}  // namespace bisimkit

#pragma once

#include <vector>

#include "bisimkit/nn.hpp"

namespace bisimkit {

struct SacConfig {
  double gamma = 0.99;
  double tau_critic = 0.005;
  double tau_encoder = 0.005;
  int actor_update_freq = 2;
  int critic_target_update_freq = 2;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  double init_temperature = 0.1;
};

// Reparameterized sample from the squashed Gaussian policy, with everything
// the backward pass needs.
struct PolicySample {
  nn::Mlp::Cache cache;
  nn::Matrix raw_log_std;
  nn::Matrix log_std;
  nn::Matrix std;
  nn::Matrix noise;
  nn::Matrix pre_tanh;
  nn::Matrix action;
  nn::Vector log_prob;
};

// Latent -> (mean, log_std) head. log_std = min + (max - min)(tanh(raw) + 1) / 2
// keeps it inside [min, max] with a smooth gradient; actions are tanh(u).
class Actor {
 public:
  Actor() = default;
  Actor(int latent_dim, int action_dim, const std::vector<int>& hidden, double log_std_min,
        double log_std_max, Rng& rng);

  int action_dim() const { return action_dim_; }

  // noise is action_dim x batch standard normal; zero noise gives the mean action.
  PolicySample sample(const nn::Matrix& z, const nn::Matrix& noise) const;
  // tanh(mean), no sampling.
  nn::Matrix mean_action(const nn::Matrix& z) const;

  // Accumulates parameter gradients for upstream dL/d(action) and
  // dL/d(log_prob); returns dL/dz.
  nn::Matrix backward(const PolicySample& s, const nn::Matrix& grad_action, const nn::Vector& grad_log_prob);

  nn::Mlp net;

 private:
  int action_dim_ = 0;
  double log_std_min_ = -5.0;
  double log_std_max_ = 2.0;
};

// Twin Q heads over [latent; action] with target copies.
struct CriticPair {
  CriticPair() = default;
  CriticPair(int latent_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);

  nn::Mlp q1, q2, q1_target, q2_target;

  std::vector<nn::ParamView> online_params();
  void zero_grad();
};

// log alpha parameter with its gradient.
struct Temperature {
  double log_alpha = 0.0;
  double grad = 0.0;
  double target_entropy = 0.0;

  double alpha() const;
  std::vector<nn::ParamView> params() { return {{&log_alpha, &grad, 1}}; }
};

nn::Matrix concat_rows(const nn::Matrix& top, const nn::Matrix& bottom);

// min(q1, q2) - alpha * log_prob.
inline double soft_value_of(double q1, double q2, double alpha, double log_prob) {
  return (q1 < q2 ? q1 : q2) - alpha * log_prob;
}

// Soft value of next states, min_i Qhat_i(z', a') - alpha log pi(a'|z'), with
// a' drawn from the actor using the given noise.
nn::Vector soft_value(const Actor& actor, const CriticPair& critics, const nn::Matrix& next_z,
                      const nn::Matrix& noise, double alpha);

// r + gamma * not_done * V(s').
nn::Vector bellman_target(const nn::Vector& reward, const nn::Vector& not_done, const nn::Vector& next_value,
                          double gamma);

// mean_b (Q1 - y)^2 + mean_b (Q2 - y)^2. Accumulates critic gradients and
// returns dL/dz through grad_z when non-null.
double critic_loss(CriticPair& critics, const nn::Matrix& z, const nn::Matrix& action, const nn::Vector& target,
                   nn::Matrix* grad_z);

// mean_b alpha log pi(a|z) - min_i Q_i(z, a). Accumulates actor gradients
// only; the latent is treated as a constant. Returns log pi via log_prob.
double actor_loss(Actor& actor, CriticPair& critics, const nn::Matrix& z, const nn::Matrix& noise, double alpha,
                  nn::Vector* log_prob);

// mean_b -alpha (log pi + H), differentiated with respect to log alpha.
double alpha_loss(Temperature& temperature, const nn::Vector& log_prob);

}  // namespace bisimkit

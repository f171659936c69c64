#include "bisimkit/sac.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bisimkit {

using nn::Matrix;
using nn::Vector;

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw std::invalid_argument("concat_rows: batch size mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Actor::Actor(int latent_dim, int action_dim, const std::vector<int>& hidden, double log_std_min,
             double log_std_max, Rng& rng)
    : net(nn::MlpSpec{widths(latent_dim, hidden, 2 * action_dim)}, rng),
      action_dim_(action_dim),
      log_std_min_(log_std_min),
      log_std_max_(log_std_max) {
  if (!(log_std_min < log_std_max)) throw std::invalid_argument("Actor: log_std bounds out of order");
}

PolicySample Actor::sample(const Matrix& z, const Matrix& noise) const {
  PolicySample s;
  const Matrix& out = net.forward(z, s.cache);
  if (noise.rows() != action_dim_ || noise.cols() != z.cols())
    throw std::invalid_argument("Actor::sample: noise shape mismatch");
  const Matrix mean = out.topRows(action_dim_);
  s.raw_log_std = out.bottomRows(action_dim_);
  s.log_std = (log_std_min_ + 0.5 * (log_std_max_ - log_std_min_) * (s.raw_log_std.array().tanh() + 1.0)).matrix();
  s.std = s.log_std.array().exp().matrix();
  s.noise = noise;
  s.pre_tanh = mean + s.std.cwiseProduct(noise);
  s.action = s.pre_tanh.array().tanh().matrix();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  s.log_prob.resize(z.cols());
  for (int b = 0; b < z.cols(); ++b) {
    double lp = 0.0;
    for (int k = 0; k < action_dim_; ++k) {
      const double u = s.pre_tanh(k, b);
      // log(1 - tanh(u)^2) in a form that stays finite for large |u|
      const double log_jac = 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
      lp += -0.5 * noise(k, b) * noise(k, b) - s.log_std(k, b) - half_log_2pi - log_jac;
    }
    s.log_prob(b) = lp;
  }
  return s;
}

Matrix Actor::mean_action(const Matrix& z) const {
  return net.forward(z).topRows(action_dim_).array().tanh().matrix();
}

Matrix Actor::backward(const PolicySample& s, const Matrix& grad_action, const Vector& grad_log_prob) {
  const int batch = static_cast<int>(s.action.cols());
  Matrix grad_out(2 * action_dim_, batch);
  for (int b = 0; b < batch; ++b) {
    for (int k = 0; k < action_dim_; ++k) {
      const double a = s.action(k, b);
      const double du = grad_action(k, b) * (1.0 - a * a) + grad_log_prob(b) * 2.0 * std::tanh(s.pre_tanh(k, b));
      const double dlog_std = -grad_log_prob(b) + du * s.std(k, b) * s.noise(k, b);
      const double t = std::tanh(s.raw_log_std(k, b));
      grad_out(k, b) = du;
      grad_out(action_dim_ + k, b) = dlog_std * 0.5 * (log_std_max_ - log_std_min_) * (1.0 - t * t);
    }
  }
  return net.backward(s.cache, grad_out);
}

CriticPair::CriticPair(int latent_dim, int action_dim, const std::vector<int>& hidden, Rng& rng)
    : q1(nn::MlpSpec{widths(latent_dim + action_dim, hidden, 1)}, rng),
      q2(nn::MlpSpec{widths(latent_dim + action_dim, hidden, 1)}, rng),
      q1_target(q1),
      q2_target(q2) {}

std::vector<nn::ParamView> CriticPair::online_params() { return nn::join({q1.params(), q2.params()}); }

void CriticPair::zero_grad() {
  q1.zero_grad();
  q2.zero_grad();
}

double Temperature::alpha() const { return std::exp(log_alpha); }

Vector soft_value(const Actor& actor, const CriticPair& critics, const Matrix& next_z, const Matrix& noise,
                  double alpha) {
  const PolicySample s = actor.sample(next_z, noise);
  const Matrix x = concat_rows(next_z, s.action);
  const Matrix q1 = critics.q1_target.forward(x);
  const Matrix q2 = critics.q2_target.forward(x);
  Vector v(next_z.cols());
  for (int b = 0; b < v.size(); ++b) v(b) = soft_value_of(q1(0, b), q2(0, b), alpha, s.log_prob(b));
  return v;
}

Vector bellman_target(const Vector& reward, const Vector& not_done, const Vector& next_value, double gamma) {
  return (reward.array() + gamma * not_done.array() * next_value.array()).matrix();
}

double critic_loss(CriticPair& critics, const Matrix& z, const Matrix& action, const Vector& target,
                   Matrix* grad_z) {
  const int batch = static_cast<int>(z.cols());
  const Matrix x = concat_rows(z, action);
  nn::Mlp::Cache c1, c2;
  const Matrix& q1 = critics.q1.forward(x, c1);
  const Matrix& q2 = critics.q2.forward(x, c2);
  const Matrix e1 = q1 - target.transpose();
  const Matrix e2 = q2 - target.transpose();
  const double loss = (e1.squaredNorm() + e2.squaredNorm()) / batch;
  const Matrix dx1 = critics.q1.backward(c1, (2.0 / batch) * e1);
  const Matrix dx2 = critics.q2.backward(c2, (2.0 / batch) * e2);
  if (grad_z) *grad_z = (dx1 + dx2).topRows(z.rows());
  return loss;
}

double actor_loss(Actor& actor, CriticPair& critics, const Matrix& z, const Matrix& noise, double alpha,
                  Vector* log_prob) {
  const int batch = static_cast<int>(z.cols());
  const PolicySample s = actor.sample(z, noise);
  const Matrix x = concat_rows(z, s.action);
  nn::Mlp::Cache c1, c2;
  const Matrix& q1 = critics.q1.forward(x, c1);
  const Matrix& q2 = critics.q2.forward(x, c2);
  double loss = 0.0;
  Matrix dq1 = Matrix::Zero(1, batch);
  Matrix dq2 = Matrix::Zero(1, batch);
  for (int b = 0; b < batch; ++b) {
    const bool first = q1(0, b) <= q2(0, b);
    loss += alpha * s.log_prob(b) - (first ? q1(0, b) : q2(0, b));
    (first ? dq1 : dq2)(0, b) = -1.0 / batch;
  }
  loss /= batch;
  // critic parameters are read, not trained, here
  const Matrix dx = critics.q1.backward(c1, dq1, false) + critics.q2.backward(c2, dq2, false);
  const Matrix grad_action = dx.bottomRows(actor.action_dim());
  const Vector grad_lp = Vector::Constant(batch, alpha / batch);
  actor.backward(s, grad_action, grad_lp);
  if (log_prob) *log_prob = s.log_prob;
  return loss;
}

double alpha_loss(Temperature& temperature, const Vector& log_prob) {
  const double alpha = temperature.alpha();
  const double mean_term = (log_prob.array() + temperature.target_entropy).mean();
  temperature.grad += -alpha * mean_term;
  return -alpha * mean_term;
}

}  // namespace bisimkit

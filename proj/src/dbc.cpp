#include "bisimkit/dbc.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "bisimkit/errors.hpp"
#include "bisimkit/sac.hpp"

namespace bisimkit {

using nn::Matrix;
using nn::Vector;

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<int> widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite ") + what);
}

}  // namespace

DynamicsModel::DynamicsModel(int latent_dim, int action_dim, const std::vector<int>& hidden, double sigma_min,
                             double sigma_max, Rng& rng)
    : net(nn::MlpSpec{widths(latent_dim + action_dim, hidden, 2 * latent_dim)}, rng),
      latent_dim_(latent_dim),
      sigma_min_(sigma_min),
      sigma_max_(sigma_max) {
  if (!(sigma_min > 0.0 && sigma_min < sigma_max)) throw std::invalid_argument("DynamicsModel: bad sigma bounds");
}

DynamicsModel::Output DynamicsModel::forward(const Matrix& z, const Matrix& action) const {
  Output out;
  const Matrix& y = net.forward(concat_rows(z, action), out.cache);
  out.mean = y.topRows(latent_dim_);
  out.raw = y.bottomRows(latent_dim_);
  out.sigma = out.raw.unaryExpr([&](double r) { return sigma_min_ + (sigma_max_ - sigma_min_) * sigmoid(r); });
  return out;
}

void DynamicsModel::predict(const Matrix& z, const Matrix& action, Matrix& mean, Matrix& sigma) const {
  const Matrix y = net.forward(concat_rows(z, action));
  mean = y.topRows(latent_dim_);
  sigma = y.bottomRows(latent_dim_).unaryExpr(
      [&](double r) { return sigma_min_ + (sigma_max_ - sigma_min_) * sigmoid(r); });
}

Matrix DynamicsModel::backward(const Output& out, const Matrix& grad_mean, const Matrix& grad_sigma) {
  Matrix grad(2 * latent_dim_, out.mean.cols());
  grad.topRows(latent_dim_) = grad_mean;
  grad.bottomRows(latent_dim_) = grad_sigma.binaryExpr(out.raw, [&](double g, double r) {
    const double s = sigmoid(r);
    return g * (sigma_max_ - sigma_min_) * s * (1.0 - s);
  });
  return net.backward(out.cache, grad);
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, static_cast<std::size_t>(i) + 1)]);
  return perm;
}

double bisim_loss(const Matrix& z_i, const Matrix& z_j, const Vector& r_i, const Vector& r_j, const Matrix& mu_i,
                  const Matrix& sigma_i, const Matrix& mu_j, const Matrix& sigma_j, const BisimWeights& weights,
                  Matrix* grad_zi, Matrix* grad_zj) {
  require_same_shape(z_i, z_j, "bisim_loss latents");
  require_same_shape(mu_i, mu_j, "bisim_loss means");
  require_same_shape(mu_i, sigma_i, "bisim_loss stddevs");
  require_same_shape(mu_j, sigma_j, "bisim_loss stddevs");
  const int batch = static_cast<int>(z_i.cols());
  if (mu_i.cols() != batch || r_i.size() != batch || r_j.size() != batch)
    throw std::invalid_argument("bisim_loss: batch size mismatch");
  require_finite(z_i, "latent");
  require_finite(z_j, "latent");
  require_finite(mu_i, "predicted mean");
  require_finite(mu_j, "predicted mean");
  require_finite(sigma_i, "predicted stddev");
  require_finite(sigma_j, "predicted stddev");
  if (!r_i.allFinite() || !r_j.allFinite()) throw NumericalError("non-finite predicted reward");

  const Matrix diff = z_i - z_j;
  if (grad_zi) *grad_zi = Matrix::Zero(z_i.rows(), batch);
  if (grad_zj) *grad_zj = Matrix::Zero(z_i.rows(), batch);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double dist = diff.col(b).lpNorm<1>();
    const double w2 =
        std::sqrt((mu_i.col(b) - mu_j.col(b)).squaredNorm() + (sigma_i.col(b) - sigma_j.col(b)).squaredNorm());
    const double target = weights.reward_weight * std::abs(r_i(b) - r_j(b)) + weights.transition_weight * w2;
    const double e = dist - target;
    loss += e * e;
    const double scale = 2.0 * e / batch;
    for (int k = 0; k < diff.rows(); ++k) {
      const double sgn = diff(k, b) > 0.0 ? 1.0 : (diff(k, b) < 0.0 ? -1.0 : 0.0);
      if (grad_zi) (*grad_zi)(k, b) = scale * sgn;
      if (grad_zj) (*grad_zj)(k, b) = -scale * sgn;
    }
  }
  return loss / batch;
}

ModelLosses model_losses(DynamicsModel& dynamics, nn::Mlp& reward_model, const Matrix& z, const Matrix& action,
                         const Matrix& next_latent, const Vector& reward, bool nll, Matrix* grad_z) {
  const int batch = static_cast<int>(z.cols());
  const int k = dynamics.latent_dim();
  if (next_latent.rows() != k || next_latent.cols() != batch || reward.size() != batch)
    throw std::invalid_argument("model_losses: shape mismatch");
  const auto out = dynamics.forward(z, action);
  ModelLosses losses;
  Matrix grad_mean(k, batch), grad_sigma = Matrix::Zero(k, batch);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Matrix err = out.mean - next_latent;
  if (nll) {
    for (int b = 0; b < batch; ++b)
      for (int d = 0; d < k; ++d) {
        const double s = out.sigma(d, b);
        const double u = err(d, b) / s;
        losses.dynamics += 0.5 * u * u + std::log(s) + half_log_2pi;
        grad_mean(d, b) = u / s / batch;
        grad_sigma(d, b) = (1.0 / s - u * u / s) / batch;
      }
  } else {
    losses.dynamics = 0.5 * err.squaredNorm();
    grad_mean = err / batch;
  }
  losses.dynamics /= batch;

  nn::Mlp::Cache rc;
  const Matrix& r_hat = reward_model.forward(out.mean, rc);
  const Matrix r_err = r_hat - reward.transpose();
  losses.reward = r_err.squaredNorm() / batch;
  require_finite(losses.dynamics, "dynamics loss");
  require_finite(losses.reward, "reward loss");

  grad_mean += reward_model.backward(rc, (2.0 / batch) * r_err);
  const Matrix dx = dynamics.backward(out, grad_mean, grad_sigma);
  if (grad_z) *grad_z = dx.topRows(z.rows());
  return losses;
}

Vector pair_distance(const nn::Mlp& psi, const Matrix& z_i, const Matrix& z_j) {
  return psi.forward(concat_rows(z_i, z_j)).row(0).transpose();
}

double castro_loss(nn::Mlp& psi, const Matrix& z_i, const Matrix& z_j, const Vector& r_i, const Vector& r_j,
                   const Vector& next_distance, double gamma, Matrix* grad_zi, Matrix* grad_zj) {
  require_same_shape(z_i, z_j, "castro_loss latents");
  const int batch = static_cast<int>(z_i.cols());
  if (r_i.size() != batch || r_j.size() != batch || next_distance.size() != batch)
    throw std::invalid_argument("castro_loss: batch size mismatch");
  nn::Mlp::Cache cache;
  const Matrix& d = psi.forward(concat_rows(z_i, z_j), cache);
  Matrix err(1, batch);
  for (int b = 0; b < batch; ++b) err(0, b) = d(0, b) - std::abs(r_i(b) - r_j(b)) - gamma * next_distance(b);
  const double loss = err.squaredNorm() / batch;
  require_finite(loss, "distance-network loss");
  const Matrix dx = psi.backward(cache, (2.0 / batch) * err);
  if (grad_zi) *grad_zi = dx.topRows(z_i.rows());
  if (grad_zj) *grad_zj = dx.bottomRows(z_j.rows());
  return loss;
}

double reconstruction_loss(nn::Mlp& decoder, const Matrix& z, const Matrix& obs, Matrix* grad_z) {
  nn::Mlp::Cache cache;
  const Matrix& rec = decoder.forward(z, cache);
  require_same_shape(rec, obs, "reconstruction_loss");
  const Matrix err = rec - obs;
  const double n = static_cast<double>(err.size());
  const double loss = err.squaredNorm() / n;
  require_finite(loss, "reconstruction loss");
  const Matrix dz = decoder.backward(cache, (2.0 / n) * err);
  if (grad_z) *grad_z = dz;
  return loss;
}

}  // namespace bisimkit

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "acceptance.hpp"
#include "bisimkit/agent.hpp"
#include "bisimkit/dbc.hpp"
#include "bisimkit/gradcheck.hpp"
#include "bisimkit/ot.hpp"
#include "bisimkit/sac.hpp"
#include "test_helpers.hpp"

namespace acceptance {

using namespace bisimkit;
using namespace bisimkit::nn;
using testing::MatrixParam;
using testing::normal_matrix;
using testing::random_matrix;

namespace {

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

// Each check returns the max relative error for one seed.
using SeedCheck = std::function<double(std::uint64_t seed)>;

double bisim_check(std::uint64_t seed) {
  Rng rng(derive_seed(9100, seed));
  MatrixParam zi(random_matrix(rng, 4, 6)), zj(random_matrix(rng, 4, 6));
  Matrix mi = random_matrix(rng, 4, 6), mj = random_matrix(rng, 4, 6);
  Matrix si = random_matrix(rng, 4, 6, 0.1, 2), sj = random_matrix(rng, 4, 6, 0.1, 2);
  Vector ri = random_matrix(rng, 6, 1), rj = random_matrix(rng, 6, 1);
  const BisimWeights w{uniform(rng, 0.1, 1.0), uniform(rng, 0.1, 0.99)};
  Matrix gi, gj;
  bisim_loss(zi.value, zj.value, ri, rj, mi, si, mj, sj, w, &gi, &gj);
  zi.grad = gi;
  zj.grad = gj;
  std::vector<ParamView> params{zi.view(), zj.view()};
  // Reference built from the scalar W2 rather than the batched form.
  auto loss = [&] {
    double total = 0;
    for (int b = 0; b < 6; ++b) {
      auto col = [](const Matrix& m, int c) { return std::vector<double>(m.col(c).data(), m.col(c).data() + m.rows()); };
      const double w2 = w2_diag_gaussian({col(mi, b), col(si, b)}, {col(mj, b), col(sj, b)});
      const double d = (zi.value.col(b) - zj.value.col(b)).lpNorm<1>() - w.reward_weight * std::abs(ri(b) - rj(b)) -
                       w.transition_weight * w2;
      total += d * d;
    }
    return total / 6;
  };
  return gradient_check(params, collect_gradients(params), loss).max_rel_error;
}

double castro_check(std::uint64_t seed) {
  Rng rng(derive_seed(9200, seed));
  Mlp psi(MlpSpec{{6, 11, 1}, Activation::kRelu, Activation::kSoftplus}, rng);
  MatrixParam zi(random_matrix(rng, 3, 5)), zj(random_matrix(rng, 3, 5));
  Vector ri = random_matrix(rng, 5, 1), rj = random_matrix(rng, 5, 1);
  Vector nd = random_matrix(rng, 5, 1, 0, 2);
  const double gamma = uniform(rng, 0.5, 0.99);
  psi.zero_grad();
  Matrix gi, gj;
  castro_loss(psi, zi.value, zj.value, ri, rj, nd, gamma, &gi, &gj);
  zi.grad = gi;
  zj.grad = gj;
  auto params = join({psi.params(), {zi.view(), zj.view()}});
  return gradient_check(params, collect_gradients(params), [&] {
           Vector d = pair_distance(psi, zi.value, zj.value);
           double l = 0;
           for (int b = 0; b < 5; ++b) l += std::pow(d(b) - std::abs(ri(b) - rj(b)) - gamma * nd(b), 2);
           return l / 5;
         }).max_rel_error;
}

double reconstruction_check(std::uint64_t seed) {
  Rng rng(derive_seed(9300, seed));
  Mlp dec(MlpSpec{{3, 6, 5}}, rng);
  MatrixParam z(random_matrix(rng, 3, 4));
  Matrix o = random_matrix(rng, 5, 4);
  dec.zero_grad();
  Matrix gz;
  reconstruction_loss(dec, z.value, o, &gz);
  z.grad = gz;
  auto params = join({dec.params(), {z.view()}});
  return gradient_check(params, collect_gradients(params),
                        [&] { return (dec.forward(z.value) - o).squaredNorm() / 20.0; })
      .max_rel_error;
}

struct ModelFixture {
  DynamicsModel dyn;
  Mlp reward;
  MatrixParam z;
  Matrix a, next;
  Vector r;

  ModelFixture(std::uint64_t seed, bool nll)
      : z(Matrix::Zero(3, 5)) {
    Rng rng(derive_seed(nll ? 9400 : 9450, seed));
    dyn = DynamicsModel(3, 2, {7}, 1e-3, 10.0, rng);
    reward = Mlp(MlpSpec{{3, 5, 1}}, rng);
    z = MatrixParam(random_matrix(rng, 3, 5));
    a = random_matrix(rng, 2, 5);
    next = random_matrix(rng, 3, 5);
    r = random_matrix(rng, 5, 1);
    dyn.net.zero_grad();
    reward.zero_grad();
    Matrix gz;
    model_losses(dyn, reward, z.value, a, next, r, nll, &gz);
    z.grad = gz;
  }

  double dynamics_term(bool nll) const {
    Matrix m, s;
    dyn.predict(z.value, a, m, s);
    double l = 0;
    for (int b = 0; b < 5; ++b)
      for (int d = 0; d < 3; ++d) {
        const double u = (m(d, b) - next(d, b)) / s(d, b);
        l += nll ? 0.5 * u * u + std::log(s(d, b)) + 0.5 * std::log(2.0 * M_PI)
                 : 0.5 * (m(d, b) - next(d, b)) * (m(d, b) - next(d, b));
      }
    return l / 5;
  }

  double reward_term() const {
    Matrix m, s;
    dyn.predict(z.value, a, m, s);
    return (reward.forward(m) - r.transpose()).squaredNorm() / 5;
  }
};

// The reward term reaches the dynamics net through the predicted mean.
double dynamics_nll_check(std::uint64_t seed) {
  ModelFixture f(seed, true);
  auto params = f.dyn.net.params();
  return gradient_check(params, collect_gradients(params), [&] {
           return f.dynamics_term(true) + f.reward_term();
         }).max_rel_error;
}

// Reward-model parameters only see the reward term; the latent sees both.
double reward_mse_check(std::uint64_t seed) {
  ModelFixture f(seed, seed % 2 == 0);
  const bool nll = seed % 2 == 0;
  auto rp = f.reward.params();
  const double e1 =
      gradient_check(rp, collect_gradients(rp), [&] { return f.reward_term(); }).max_rel_error;
  std::vector<ParamView> zp{f.z.view()};
  const double e2 = gradient_check(zp, collect_gradients(zp), [&] {
                      return f.dynamics_term(nll) + f.reward_term();
                    }).max_rel_error;
  return std::max(e1, e2);
}

double critic_check(std::uint64_t seed) {
  Rng rng(derive_seed(9500, seed));
  CriticPair critics(3, 2, {6, 5}, rng);
  MatrixParam z(random_matrix(rng, 3, 5));
  Matrix a = random_matrix(rng, 2, 5);
  Vector y = random_matrix(rng, 5, 1);
  critics.zero_grad();
  Matrix gz;
  critic_loss(critics, z.value, a, y, &gz);
  z.grad = gz;
  auto params = join({critics.online_params(), {z.view()}});
  return gradient_check(params, collect_gradients(params), [&] {
           Matrix x = concat_rows(z.value, a);
           return ((critics.q1.forward(x) - y.transpose()).squaredNorm() +
                   (critics.q2.forward(x) - y.transpose()).squaredNorm()) /
                  5.0;
         }).max_rel_error;
}

double actor_check(std::uint64_t seed) {
  Rng rng(derive_seed(9600, seed));
  Actor actor(3, 2, {6, 5}, -5, 2, rng);
  CriticPair critics(3, 2, {6}, rng);
  Matrix z = random_matrix(rng, 3, 4);
  Matrix eps = normal_matrix(rng, 2, 4);
  const double alpha = uniform(rng, 0.01, 1.0);
  actor.net.zero_grad();
  critics.zero_grad();
  actor_loss(actor, critics, z, eps, alpha, nullptr);
  auto params = actor.net.params();
  return gradient_check(params, collect_gradients(params), [&] {
           auto s = actor.sample(z, eps);
           Matrix x = concat_rows(z, s.action);
           Matrix q1 = critics.q1.forward(x), q2 = critics.q2.forward(x);
           double l = 0;
           for (int b = 0; b < 4; ++b) l += alpha * s.log_prob(b) - std::min(q1(0, b), q2(0, b));
           return l / 4;
         }).max_rel_error;
}

double temperature_check(std::uint64_t seed) {
  Rng rng(derive_seed(9700, seed));
  Temperature t;
  t.log_alpha = uniform(rng, -3, 1);
  t.target_entropy = -uniform(rng, 0.5, 3.0);
  Vector lp = random_matrix(rng, 6, 1, -3, 3);
  t.grad = 0;
  alpha_loss(t, lp);
  auto params = t.params();
  return gradient_check(params, collect_gradients(params), [&] {
           return -std::exp(t.log_alpha) * (lp.array() + t.target_entropy).mean();
         }).max_rel_error;
}

Outcome gradient_integrity() {
  const std::vector<std::pair<std::string, SeedCheck>> checks{
      {"bisimulation loss", bisim_check},     {"distance-network loss", castro_check},
      {"reconstruction", reconstruction_check}, {"dynamics NLL", dynamics_nll_check},
      {"reward MSE", reward_mse_check},       {"SAC critic", critic_check},
      {"SAC actor", actor_check},             {"SAC temperature", temperature_check},
  };
  Outcome o;
  o.passed = true;
  double worst = 0.0;
  for (const auto& [name, check] : checks) {
    double loss_worst = 0.0;
    int failed = 0;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
      const double e = check(s);
      loss_worst = std::max(loss_worst, e);
      failed += !(e < kTol);
    }
    worst = std::max(worst, loss_worst);
    o.passed = o.passed && failed == 0;
    o.notes.push_back(name + ": " + std::to_string(kSeeds - failed) + "/" + std::to_string(kSeeds) +
                      " seeds pass, max rel error " + fmt(loss_worst, 3));
  }
  o.detail = std::to_string(checks.size()) + " losses x " + std::to_string(kSeeds) +
             " seeds, max relative error " + fmt(worst, 3) + " (must be < 1e-4)";
  return o;
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// Encoder gradient of one bisimulation update against a manual reverse pass
// through the online latents only, with every model output held constant.
Outcome stop_gradient() {
  Outcome o;
  int cases = 0, mismatches = 0;
  for (bool from_prediction : {true, false}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(9800, seed));
      AgentConfig cfg;
      cfg.algorithm = Algorithm::kDbc;
      cfg.obs_dim = 6;
      cfg.action_dim = 2;
      cfg.latent_dim = 4;
      cfg.encoder_hidden = seed % 2 ? std::vector<int>{} : std::vector<int>{9};
      cfg.actor_hidden = cfg.critic_hidden = cfg.model_hidden = {8};
      cfg.batch_size = 12;
      cfg.dynamics_nll = seed % 3 != 0;
      cfg.bisim_reward_from_prediction = from_prediction;
      Agent agent(cfg, seed + 1);
      const int n = cfg.batch_size;
      Batch b;
      b.obs = random_matrix(rng, 6, n);
      b.next_obs = random_matrix(rng, 6, n);
      b.action = random_matrix(rng, 2, n);
      b.reward = random_matrix(rng, n, 1);
      b.not_done = Vector::Ones(n);
      const auto perm = random_permutation(n, rng);

      // The phase also takes an optimizer step, so keep the pre-update encoder.
      Mlp enc = agent.encoder;
      agent.encoder.zero_grad();
      agent.encoder_target.zero_grad();
      agent.dynamics.net.zero_grad();
      agent.reward_model.zero_grad();
      agent.actor.net.zero_grad();
      agent.critics.zero_grad();
      UpdateMetrics m;
      agent.bisim_phase(b, perm, m);

      enc.zero_grad();
      Mlp::Cache cache;
      const Matrix z = enc.forward(b.obs, cache);
      Matrix mu, sigma;
      agent.dynamics.predict(z, agent.actor.mean_action(z), mu, sigma);
      if (!cfg.dynamics_nll) sigma.setOnes();
      const Vector r = agent.reward_model.forward(from_prediction ? mu : z).row(0).transpose();
      const int k = cfg.latent_dim;
      Matrix zj(k, n), muj(k, n), sj(k, n);
      Vector rj(n);
      for (int c = 0; c < n; ++c) {
        zj.col(c) = z.col(perm[c]);
        muj.col(c) = mu.col(perm[c]);
        sj.col(c) = sigma.col(perm[c]);
        rj(c) = r(perm[c]);
      }
      Matrix gi, gj;
      const double loss = bisim_loss(z, zj, r, rj, mu, sigma, muj, sj, cfg.bisim, &gi, &gj);
      Matrix gz = gi;
      for (int c = 0; c < n; ++c) gz.col(perm[c]) += gj.col(c);
      enc.backward(cache, gz);

      const bool ok = loss == m.encoder_loss && enc.flat_gradients() == agent.encoder.flat_gradients() &&
                      !all_zero(agent.encoder.flat_gradients()) && all_zero(agent.encoder_target.flat_gradients()) &&
                      all_zero(agent.dynamics.net.flat_gradients()) && all_zero(agent.reward_model.flat_gradients()) &&
                      all_zero(agent.actor.net.flat_gradients()) && all_zero(agent.critics.q1.flat_gradients()) &&
                      all_zero(agent.critics.q2.flat_gradients());
      ++cases;
      mismatches += !ok;
    }
  }
  o.passed = mismatches == 0;
  o.detail = std::to_string(cases) + " random batches: " + std::to_string(mismatches) +
             " with encoder gradients differing bitwise from the online-branch-only reverse pass";
  return o;
}

}  // namespace

std::vector<Criterion> gradient_criteria() {
  return {
      {"gradient integrity of every loss", 120.0, gradient_integrity},
      {"stop-gradient through the target branch", 0.0, stop_gradient},
  };
}

}  // namespace acceptance

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bisimkit/bisim.hpp"
#include "bisimkit/envs.hpp"
#include "bisimkit/errors.hpp"

using namespace bisimkit;

namespace {

EnvSpec grid_spec(int n, int m) {
  EnvSpec s;
  s.family = "grid";
  s.grid_size = n;
  s.chain_states = m;
  return s;
}

EnvSpec point_spec() {
  EnvSpec s;
  s.family = "point_mass";
  return s;
}

EnvSpec factored_spec() {
  EnvSpec s;
  s.family = "factored";
  return s;
}

}  // namespace

TEST_SUITE("envs") {

TEST_CASE("grid state count and wall moves") {
  TabularDistractorGrid g(grid_spec(2, 1));
  CHECK(g.n_states() == 4);
  CHECK(g.obs_dim() == 5);
  CHECK(g.move(0, 1) == 0);  // left wall
  CHECK(g.move(0, 3) == 0);  // top wall
  CHECK(g.move(0, 0) == 1);
  CHECK(g.move(0, 2) == 2);
  CHECK(g.move(3, 0) == 3);
  CHECK(g.move(3, 2) == 3);
  for (int a = 0; a < 4; ++a) CHECK(g.discrete_action(g.continuous_action(a)) == a);
}

TEST_CASE("grid product MDP factorises into cell moves and the chain") {
  TabularDistractorGrid g(grid_spec(3, 4));
  const auto mdp = g.to_finite_mdp(0.9);
  const int m = g.chain_states();
  for (int s = 0; s < g.n_states(); ++s)
    for (int a = 0; a < 4; ++a) {
      const int cell = s / m, chain = s % m;
      double reward = 0;
      for (int t = 0; t < g.n_states(); ++t) {
        const double expected = (t / m == g.move(cell, a) ? 1.0 : 0.0) * g.chain_prob(chain, t % m);
        CHECK(mdp.p(a, s, t) == doctest::Approx(expected).epsilon(1e-15));
        reward += expected * (t / m == g.goal_cell() ? 1.0 : 0.0);
      }
      CHECK(mdp.r(s, a) == doctest::Approx(reward).epsilon(1e-15));
      // marginal over the chain is the deterministic grid move
      for (int c2 = 0; c2 < 9; ++c2) {
        double marg = 0;
        for (int k = 0; k < m; ++k) marg += mdp.p(a, s, c2 * m + k);
        CHECK(marg == doctest::Approx(c2 == g.move(cell, a) ? 1.0 : 0.0));
      }
    }
}

TEST_CASE("grid states differing only in the distractor chain are bisimilar") {
  TabularDistractorGrid g(grid_spec(3, 3));
  const auto d = bisim_metric_max(g.to_finite_mdp(0.9), 0.9, MetricSolveOptions{1e-10, 1});
  const int m = g.chain_states();
  double worst = 0, task_min = 1e9;
  for (int s = 0; s < g.n_states(); ++s)
    for (int t = 0; t < g.n_states(); ++t) {
      if (s / m == t / m) worst = std::max(worst, d(s, t));
      if (s % m == t % m && s / m != t / m) task_min = std::min(task_min, d(s, t));
    }
  CHECK(worst < 1e-6);
  CHECK(task_min > 0.0);

  // under the distractor reward the roles swap
  TabularDistractorGrid dr(*dynamic_cast<TabularDistractorGrid*>(g.with_reward_variant("distractor_reward").get()));
  const auto dd = bisim_metric_max(dr.to_finite_mdp(0.9), 0.9, MetricSolveOptions{1e-10, 1});
  double worst_cells = 0;
  for (int s = 0; s < g.n_states(); ++s)
    for (int t = 0; t < g.n_states(); ++t)
      if (s % m == t % m) worst_cells = std::max(worst_cells, dd(s, t));
  CHECK(worst_cells < 1e-6);
}

TEST_CASE("grid trajectories are seeded and rewards arrive at the goal") {
  TabularDistractorGrid a(grid_spec(3, 5)), b(grid_spec(3, 5));
  CHECK(a.reset(42) == b.reset(42));
  for (int t = 0; t < 15; ++t) {
    const std::vector<double> act{t % 3 == 0 ? 1.0 : 0.1, t % 2 == 0 ? 0.5 : -0.9};
    auto ra = a.step(act), rb = b.step(act);
    CHECK(ra.obs == rb.obs);
    CHECK(ra.reward == rb.reward);
    CHECK(ra.timeout == (t + 1 == a.episode_cap()));
    if (ra.done()) break;
  }
  TabularDistractorGrid g(grid_spec(3, 2));
  g.reset(1);
  g.set_state(g.goal_cell() - 1, 0);
  auto r = g.step_discrete(0);
  CHECK(r.reward == 1.0);
  CHECK(g.current_state() / 2 == g.goal_cell());
  CHECK_FALSE(r.terminal);
  CHECK_THROWS_AS(g.step(std::vector<double>{std::nan(""), 0.0}), std::invalid_argument);
}

TEST_CASE("absorbing goal terminates") {
  auto spec = grid_spec(2, 2);
  spec.absorbing_goal = true;
  TabularDistractorGrid g(spec);
  g.reset(3);
  g.set_state(2, 1);
  CHECK(g.step_discrete(0).terminal);
  const auto mdp = g.to_finite_mdp(0.9);
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 2; ++k) CHECK(mdp.r(3 * 2 + k, a) == 0.0);
}

TEST_CASE("point mass: mixing is orthogonal and the goal is free of cost") {
  ContinuousPointMass env(point_spec());
  const auto& M = env.mixing();
  CHECK((M.transpose() * M - Eigen::MatrixXd::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff() < 1e-10);
  env.reset(5);
  Eigen::VectorXd raw = env.raw_state();
  const auto obs = env.observe(raw);
  Eigen::Map<const Eigen::VectorXd> o(obs.data(), static_cast<int>(obs.size()));
  CHECK(o.norm() == doctest::Approx(raw.norm()).epsilon(1e-12));

  raw.head(4).setZero();
  env.set_raw_state(raw);
  auto r = env.step(std::vector<double>{0.0, 0.0});
  CHECK(r.reward == 0.0);
  CHECK(env.raw_state().head(4).isZero(0.0));
}

TEST_CASE("point mass: rewards depend on their declared factors") {
  ContinuousPointMass env(point_spec());
  auto hv = env.with_reward_variant("hold_velocity");
  auto* hold = dynamic_cast<ContinuousPointMass*>(hv.get());
  REQUIRE(hold != nullptr);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(env.obs_dim());
  s(2) = 0.4;
  Eigen::VectorXd t = s;
  t(0) = 2.0;
  t(1) = -1.0;
  t(5) = 3.0;
  const std::vector<double> a{0.2, -0.1};
  CHECK(hold->reward_of(s, a) == hold->reward_of(t, a));
  CHECK(env.reward_of(s, a) != env.reward_of(t, a));
  Eigen::VectorXd u = s;
  u(6) = -4.0;  // distractor
  CHECK(env.reward_of(s, a) == env.reward_of(u, a));
}

TEST_CASE("point mass: seeded determinism and distractor swap") {
  ContinuousPointMass a(point_spec()), b(point_spec());
  CHECK(a.reset(8) == b.reset(8));
  const std::vector<double> act{0.3, -0.7};
  for (int t = 0; t < 20; ++t) CHECK(a.step(act).obs == b.step(act).obs);
  a.set_distractor_process(1.5, 0.7, 0.5);
  a.reset(1);
  double mean = 0;
  int n = 0;
  for (int t = 0; t < 99; ++t) {
    a.step(act);
    for (int i = 4; i < a.obs_dim(); ++i, ++n) mean += a.raw_state()(i);
  }
  CHECK(mean / n == doctest::Approx(1.5).epsilon(0.2));
  CHECK_THROWS_AS(a.step(std::vector<double>{2.0, 0.0}), std::invalid_argument);
}

TEST_CASE("factored MDP: isolated factor does not affect the reward stream") {
  FactoredCausalMdp base(factored_spec());
  const std::vector<double> act0{-0.5}, act1{0.5};
  auto rollout = [&](int factor, int value, std::uint64_t seed) {
    FactoredCausalMdp env(factored_spec());
    env.reset(seed);
    if (factor > 0) env.intervene(factor, value);
    std::vector<double> rewards;
    for (int t = 0; t < 20; ++t) rewards.push_back(env.step(t % 2 ? act0 : act1).reward);
    return rewards;
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FactoredCausalMdp probe(factored_spec());
    probe.reset(seed);
    const int s3 = probe.factors_of(probe.current_state())[2];
    CHECK(rollout(3, (s3 + 1) % 3, seed) == rollout(0, 0, seed));
  }
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 50 && !changed; ++seed) {
    FactoredCausalMdp probe(factored_spec());
    probe.reset(seed);
    const int s1 = probe.factors_of(probe.current_state())[0];
    changed = rollout(1, (s1 + 1) % 3, seed) != rollout(0, 0, seed);
  }
  CHECK(changed);

  FactoredCausalMdp env(factored_spec());
  env.reset(1);
  env.intervene(2, 1);
  const int after_once = env.current_state();
  env.intervene(2, 1);
  CHECK(env.current_state() == after_once);
  CHECK(env.factors_of(after_once)[1] == 1);
  CHECK_THROWS_AS(env.intervene(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(env.intervene(1, 9), std::invalid_argument);
}

TEST_CASE("factored MDP: product transition and distractor bisimilarity") {
  FactoredCausalMdp env(factored_spec());
  const auto mdp = env.to_finite_mdp(0.9);
  for (int s = 0; s < env.n_states(); ++s)
    for (int a = 0; a < env.n_discrete_actions(); ++a) {
      double sum = 0;
      for (double p : mdp.row(a, s)) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  const auto d = bisim_metric_max(mdp, 0.9, MetricSolveOptions{1e-10, 1});
  for (int s = 0; s < env.n_states(); ++s)
    for (int t = 0; t < env.n_states(); ++t) {
      const auto fs = env.factors_of(s), ft = env.factors_of(t);
      if (fs[0] == ft[0] && fs[1] == ft[1]) CHECK(d(s, t) < 1e-6);
    }
}

TEST_CASE("reward variants and ancestor sets") {
  FactoredCausalMdp f(factored_spec());
  CHECK(f.variant() == "r_s1");
  CHECK(f.variant_preserves_ancestors("r_s1"));
  CHECK(f.variant_preserves_ancestors("r_s2"));
  CHECK_FALSE(f.variant_preserves_ancestors("r_s3"));
  auto f2 = f.with_reward_variant("r_s2");
  CHECK_FALSE(f2->variant_preserves_ancestors("r_s1"));

  TabularDistractorGrid g(grid_spec(3, 2));
  CHECK(g.variant_preserves_ancestors("alt_goal"));
  CHECK_FALSE(g.variant_preserves_ancestors("distractor_reward"));

  ContinuousPointMass p(point_spec());
  CHECK(p.variant_preserves_ancestors("hold_velocity"));
  CHECK_FALSE(p.variant_preserves_ancestors("distractor_reward"));
  CHECK_FALSE(p.with_reward_variant("hold_velocity")->variant_preserves_ancestors("reach_goal"));

  CHECK_THROWS_AS(g.with_reward_variant("nope"), ConfigError);
  EnvSpec bad = grid_spec(0, 2);
  CHECK_THROWS_AS(make_env(bad), ConfigError);
}

TEST_CASE("factor pairs differ in exactly one group") {
  TabularDistractorGrid g(grid_spec(3, 3));
  Rng rng(1);
  auto fp = g.factor_pairs(20, rng);
  REQUIRE(fp.distractor_only.a.cols() == 20);
  for (int k = 0; k < 20; ++k) {
    // one-hot cell block identical, chain block different
    CHECK(fp.distractor_only.a.col(k).head(9) == fp.distractor_only.b.col(k).head(9));
    CHECK(fp.distractor_only.a.col(k).tail(3) != fp.distractor_only.b.col(k).tail(3));
    CHECK(fp.task_only.a.col(k).tail(3) == fp.task_only.b.col(k).tail(3));
  }
}

}

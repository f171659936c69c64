#pragma once

// Independent reference computations used only by tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bisimkit/mdp.hpp"
#include "bisimkit/ot.hpp"
#include "bisimkit/random.hpp"

namespace oracle {

// V^pi = (I - gamma P^pi)^{-1} R^pi by dense LU.
inline std::vector<double> linear_solve_value(const bisimkit::FiniteMdp& mdp, const bisimkit::DiscretePolicy& pi) {
  const int n = mdp.n_states();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s)
    for (int act = 0; act < mdp.n_actions(); ++act) {
      const double w = pi.prob(s, act);
      r(s) += w * mdp.r(s, act);
      for (int t = 0; t < n; ++t) a(s, t) -= mdp.discount() * w * mdp.p(act, s, t);
    }
  Eigen::VectorXd v = a.partialPivLu().solve(r);
  return {v.data(), v.data() + n};
}

// Plain fixed-point loop for the bisimulation metric with brute-force W1.
// One channel per action (max) or a single policy-averaged channel.
inline std::vector<double> metric_fixed_point(const std::vector<std::vector<double>>& rewards,
                                              const std::vector<std::vector<double>>& transitions, int n,
                                              double c, double tol) {
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> next(d.size(), 0.0);
    double delta = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double best = 0.0;
        for (std::size_t k = 0; k < rewards.size(); ++k) {
          std::vector<double> p(transitions[k].begin() + i * n, transitions[k].begin() + (i + 1) * n);
          std::vector<double> q(transitions[k].begin() + j * n, transitions[k].begin() + (j + 1) * n);
          // brute force needs supports <= 5: compress to nonzero entries
          std::vector<int> si, sj;
          for (int t = 0; t < n; ++t) {
            if (p[t] > 0) si.push_back(t);
            if (q[t] > 0) sj.push_back(t);
          }
          std::vector<double> pp, qq, cost;
          for (int a : si) pp.push_back(p[a]);
          for (int b : sj) qq.push_back(q[b]);
          for (int a : si)
            for (int b : sj) cost.push_back(d[a * n + b]);
          const double w = bisimkit::brute_force_w1(pp, qq, cost);
          best = std::max(best, (1 - c) * std::abs(rewards[k][i] - rewards[k][j]) + c * w);
        }
        next[i * n + j] = best;
        delta = std::max(delta, std::abs(best - d[i * n + j]));
      }
    d = next;
    if (delta <= tol) break;
  }
  return d;
}

// Splits of the metric solve inputs for bisim_metric_max.
inline void max_channels(const bisimkit::FiniteMdp& mdp, std::vector<std::vector<double>>& rewards,
                         std::vector<std::vector<double>>& transitions) {
  const int n = mdp.n_states();
  for (int a = 0; a < mdp.n_actions(); ++a) {
    std::vector<double> r(n), p(static_cast<std::size_t>(n) * n);
    for (int s = 0; s < n; ++s) {
      r[s] = mdp.r(s, a);
      for (int t = 0; t < n; ++t) p[s * n + t] = mdp.p(a, s, t);
    }
    rewards.push_back(r);
    transitions.push_back(p);
  }
}

// MDP with sparse rows (at most `support` successors per row), so the
// brute-force oracle applies.
inline bisimkit::FiniteMdp sparse_random_mdp(int n, int n_actions, int support, double gamma, std::uint64_t seed) {
  bisimkit::Rng rng(seed);
  std::vector<double> p(static_cast<std::size_t>(n_actions) * n * n, 0.0), r(static_cast<std::size_t>(n) * n_actions);
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < n; ++s) {
      auto w = bisimkit::dirichlet_ones(rng, support);
      for (int k = 0; k < support; ++k) p[(a * n + s) * n + bisimkit::uniform_index(rng, n)] += w[k];
    }
  for (auto& x : r) x = bisimkit::uniform01(rng);
  return bisimkit::FiniteMdp(n, n_actions, p, r, gamma);
}

}  // namespace oracle

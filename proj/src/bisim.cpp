#include "bisimkit/bisim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bisimkit/ot.hpp"

namespace bisimkit {

PseudoMetric::PseudoMetric(int n, std::vector<double> dist) : n_(n), dist_(std::move(dist)) {
  if (n < 0 || dist_.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("PseudoMetric: matrix is not n x n");
}

double PseudoMetric::diameter() const {
  double m = 0.0;
  for (double d : dist_) m = std::max(m, d);
  return m;
}

void PseudoMetric::validate(double symmetry_tol, double triangle_tol) const {
  auto fail = [](int i, int j, const char* what) {
    std::ostringstream os;
    os << "pseudometric violates " << what << " at (" << i << ", " << j << ")";
    throw std::invalid_argument(os.str());
  };
  for (int i = 0; i < n_; ++i) {
    if ((*this)(i, i) != 0.0) fail(i, i, "zero diagonal");
    for (int j = 0; j < n_; ++j) {
      const double d = (*this)(i, j);
      if (!std::isfinite(d) || d < 0.0) fail(i, j, "nonnegativity");
      if (std::abs(d - (*this)(j, i)) > symmetry_tol) fail(i, j, "symmetry");
    }
  }
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        if ((*this)(i, j) > (*this)(i, k) + (*this)(k, j) + triangle_tol) fail(i, j, "triangle inequality");
}

int StatePartition::n_blocks() const {
  int m = -1;
  for (int b : block_id) m = std::max(m, b);
  return m + 1;
}

int default_thread_count() {
  if (const char* env = std::getenv("BISIMKIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Group items whose keys agree within tol with a group representative.
// Group ids follow first appearance.
std::vector<int> greedy_group(const std::vector<std::vector<double>>& keys, const std::vector<int>& within,
                              double tol) {
  const std::size_t n = keys.size();
  std::vector<int> out(n, -1);
  std::vector<std::size_t> reps;
  std::vector<int> rep_scope;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t g = 0; g < reps.size(); ++g) {
      if (rep_scope[g] != within[s]) continue;
      const auto& a = keys[reps[g]];
      const auto& b = keys[s];
      bool same = true;
      for (std::size_t k = 0; k < a.size() && same; ++k) same = std::abs(a[k] - b[k]) <= tol;
      if (same) {
        out[s] = static_cast<int>(g);
        break;
      }
    }
    if (out[s] < 0) {
      out[s] = static_cast<int>(reps.size());
      reps.push_back(s);
      rep_scope.push_back(within[s]);
    }
  }
  return out;
}

}  // namespace

StatePartition bisimulation_partition(const FiniteMdp& mdp, double tol) {
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  std::vector<std::vector<double>> rewards(n, std::vector<double>(m));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < m; ++a) rewards[s][a] = mdp.r(s, a);
  std::vector<int> block = greedy_group(rewards, std::vector<int>(n, 0), tol);

  for (;;) {
    int blocks = 0;
    for (int b : block) blocks = std::max(blocks, b + 1);
    std::vector<std::vector<double>> signature(n, std::vector<double>(static_cast<std::size_t>(m) * blocks, 0.0));
    for (int s = 0; s < n; ++s)
      for (int a = 0; a < m; ++a) {
        const auto row = mdp.row(a, s);
        for (int t = 0; t < n; ++t) signature[s][static_cast<std::size_t>(a) * blocks + block[t]] += row[t];
      }
    auto refined = greedy_group(signature, block, tol);
    int refined_blocks = 0;
    for (int b : refined) refined_blocks = std::max(refined_blocks, b + 1);
    block = std::move(refined);
    if (refined_blocks == blocks) break;
  }
  return StatePartition{std::move(block)};
}

namespace {

// One "channel" per action (max metric) or a single policy-averaged channel.
struct Channel {
  std::vector<double> reward;                    // n
  std::vector<std::vector<int>> support;         // per state, next-states with p > 0
  std::vector<std::vector<double>> probability;  // matching masses
};

Channel make_channel(int n, std::vector<double> reward, const std::vector<double>& transition) {
  Channel ch;
  ch.reward = std::move(reward);
  ch.support.resize(n);
  ch.probability.resize(n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      const double p = transition[static_cast<std::size_t>(s) * n + t];
      if (p > 0.0) {
        ch.support[s].push_back(t);
        ch.probability[s].push_back(p);
      }
    }
  return ch;
}

struct PairWorker {
  TransportSolver solver;
  std::vector<double> cost;

  double w1(const Channel& ch, int i, int j, const PseudoMetric& d, TransportBasis* warm) {
    const auto& si = ch.support[i];
    const auto& sj = ch.support[j];
    const auto& pi = ch.probability[i];
    const auto& pj = ch.probability[j];
    if (si.size() == 1 || sj.size() == 1) {
      double acc = 0.0;
      if (si.size() == 1)
        for (std::size_t b = 0; b < sj.size(); ++b) acc += pj[b] * d(si[0], sj[b]);
      else
        for (std::size_t a = 0; a < si.size(); ++a) acc += pi[a] * d(si[a], sj[0]);
      return acc;
    }
    cost.resize(si.size() * sj.size());
    for (std::size_t a = 0; a < si.size(); ++a)
      for (std::size_t b = 0; b < sj.size(); ++b) cost[a * sj.size() + b] = d(si[a], sj[b]);
    return solver.solve(pi, pj, cost, nullptr, warm);
  }
};

PseudoMetric solve_metric(const std::vector<Channel>& channels, int n, double c,
                          const MetricSolveOptions& options, MetricSolveStats* stats) {
  if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("metric weight c must lie in [0, 1)");
  if (!(options.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");

  double gap = 0.0;
  for (const auto& ch : channels) {
    const auto [lo, hi] = std::minmax_element(ch.reward.begin(), ch.reward.end());
    gap = std::max(gap, *hi - *lo);
  }
  // ||d_{k+1} - d_k|| <= c^k (1 - c) gap; margin absorbs rounding.
  constexpr int kMargin = 100;
  int cap = kMargin;
  if (c > 0.0 && gap > 0.0) {
    const double diameter_bound = gap / (1.0 - c);
    const double ratio = options.tol * (1.0 - c) / diameter_bound;
    if (ratio < 1.0) cap += static_cast<int>(std::ceil(std::log(ratio) / std::log(c)));
  }

  const int threads = std::max(1, std::min(options.threads > 0 ? options.threads : default_thread_count(), n));
  std::vector<PairWorker> workers(threads);

  // Supports stay fixed across iterations, so each pair's optimal basis is a
  // feasible start for the next iteration.
  std::vector<TransportBasis> bases(channels.size() * static_cast<std::size_t>(n) * n);

  PseudoMetric d(n);
  PseudoMetric next(n);
  double previous_delta = std::numeric_limits<double>::infinity();
  int iteration = 0;
  for (;;) {
    if (++iteration > cap) {
      std::ostringstream os;
      os << "bisimulation metric did not converge within " << cap << " iterations";
      throw std::runtime_error(os.str());
    }
    auto sweep = [&](int worker) {
      PairWorker& w = workers[worker];
      for (int i = worker; i < n; i += threads)
        for (int j = i + 1; j < n; ++j) {
          double best = 0.0;
          for (std::size_t a = 0; a < channels.size(); ++a) {
            const Channel& ch = channels[a];
            double value = (1.0 - c) * std::abs(ch.reward[i] - ch.reward[j]);
            if (c > 0.0 && iteration > 1)
              value += c * w.w1(ch, i, j, d, &bases[(a * n + i) * static_cast<std::size_t>(n) + j]);
            best = std::max(best, value);
          }
          next.set(i, j, best);
        }
    };
    if (threads == 1) {
      sweep(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(sweep, t);
      for (auto& th : pool) th.join();
    }

    double delta = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < d.data().size(); ++k) {
      const double diff = next.data()[k] - d.data()[k];
      scale = std::max(scale, next.data()[k]);
      // Iterates from zero increase monotonically.
      if (diff < -1e-12 * std::max(1.0, scale))
        throw std::logic_error("bisimulation metric iterates are not monotone");
      delta = std::max(delta, std::abs(diff));
    }
    if (delta > c * previous_delta + 1e-12 * std::max(1.0, scale))
      throw std::logic_error("bisimulation operator failed to contract");
    previous_delta = delta;
    std::swap(d, next);
    if (delta <= options.tol) break;
  }
  if (stats) {
    stats->iterations = iteration;
    stats->iteration_cap = cap;
    stats->final_delta = previous_delta;
  }
  return d;
}

}  // namespace

PseudoMetric bisim_metric_max(const FiniteMdp& mdp, double c, const MetricSolveOptions& options,
                              MetricSolveStats* stats) {
  const int n = mdp.n_states();
  std::vector<Channel> channels;
  for (int a = 0; a < mdp.n_actions(); ++a) {
    std::vector<double> reward(n);
    for (int s = 0; s < n; ++s) reward[s] = mdp.r(s, a);
    std::vector<double> transition(static_cast<std::size_t>(n) * n);
    for (int s = 0; s < n; ++s) {
      const auto row = mdp.row(a, s);
      std::copy(row.begin(), row.end(), transition.begin() + static_cast<std::ptrdiff_t>(s) * n);
    }
    channels.push_back(make_channel(n, std::move(reward), transition));
  }
  return solve_metric(channels, n, c, options, stats);
}

PseudoMetric bisim_metric_onpolicy(const FiniteMdp& mdp, const DiscretePolicy& policy, double c,
                                   const MetricSolveOptions& options, MetricSolveStats* stats) {
  std::vector<Channel> channels;
  channels.push_back(
      make_channel(mdp.n_states(), policy_reward(mdp, policy), policy_transition(mdp, policy)));
  return solve_metric(channels, mdp.n_states(), c, options, stats);
}

std::vector<PolicyMetricRound> onpolicy_metric_policy_iteration(const FiniteMdp& mdp,
                                                                const DiscretePolicy& initial, double c,
                                                                const MetricSolveOptions& options,
                                                                int max_rounds) {
  std::vector<PolicyMetricRound> rounds;
  DiscretePolicy policy = initial;
  for (int k = 0; k < max_rounds; ++k) {
    PolicyMetricRound round;
    round.metric = bisim_metric_onpolicy(mdp, policy, c, options);
    round.value = policy_evaluation(mdp, policy, std::min(options.tol, kDefaultTolerance));
    round.policy = policy;
    auto improved = greedy_policy(mdp, round.value);
    rounds.push_back(std::move(round));
    if (improved.probs == policy.probs) break;
    policy = std::move(improved);
  }
  return rounds;
}

AggregatedMdp epsilon_aggregate(const FiniteMdp& mdp, const PseudoMetric& metric, double eps,
                                AggregationRule rule) {
  if (!(eps >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
  const int n = mdp.n_states();
  if (metric.size() != n) throw std::invalid_argument("metric size does not match the MDP");

  AggregatedMdp agg;
  agg.cluster_of.assign(n, -1);
  for (int s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < agg.representatives.size(); ++k)
      if (metric(agg.representatives[k], s) <= eps) {
        agg.cluster_of[s] = static_cast<int>(k);
        break;
      }
    if (agg.cluster_of[s] < 0) {
      agg.cluster_of[s] = static_cast<int>(agg.representatives.size());
      agg.representatives.push_back(s);
    }
  }

  const int k = static_cast<int>(agg.representatives.size());
  const int m = mdp.n_actions();
  std::vector<std::vector<int>> members(k);
  for (int s = 0; s < n; ++s) members[agg.cluster_of[s]].push_back(s);

  std::vector<double> transition(static_cast<std::size_t>(m) * k * k, 0.0);
  std::vector<double> reward(static_cast<std::size_t>(k) * m, 0.0);
  for (int cl = 0; cl < k; ++cl) {
    std::vector<int> sources = rule == AggregationRule::kUniform ? members[cl]
                                                                 : std::vector<int>{agg.representatives[cl]};
    const double w = 1.0 / static_cast<double>(sources.size());
    for (int a = 0; a < m; ++a)
      for (int s : sources) {
        reward[static_cast<std::size_t>(cl) * m + a] += w * mdp.r(s, a);
        const auto row = mdp.row(a, s);
        for (int t = 0; t < n; ++t)
          transition[(static_cast<std::size_t>(a) * k + cl) * k + agg.cluster_of[t]] += w * row[t];
      }
  }
  // Renormalize rows against accumulated rounding.
  for (int a = 0; a < m; ++a)
    for (int cl = 0; cl < k; ++cl) {
      double sum = 0.0;
      for (int t = 0; t < k; ++t) sum += transition[(static_cast<std::size_t>(a) * k + cl) * k + t];
      for (int t = 0; t < k; ++t) transition[(static_cast<std::size_t>(a) * k + cl) * k + t] /= sum;
    }
  agg.mdp = FiniteMdp(k, m, std::move(transition), std::move(reward), mdp.discount());
  return agg;
}

ValueBoundReport check_value_bound(const FiniteMdp& mdp, const AggregatedMdp& agg, double eps, double c,
                                   double tol, double learning_error) {
  const int n = mdp.n_states();
  if (static_cast<int>(agg.cluster_of.size()) != n || agg.mdp.n_actions() != mdp.n_actions() ||
      agg.mdp.discount() != mdp.discount())
    throw std::invalid_argument("aggregation was not built from this MDP");
  for (int cl : agg.cluster_of)
    if (cl < 0 || cl >= agg.mdp.n_states()) throw std::invalid_argument("aggregation map is out of range");
  if (!(c >= 0.0 && c < 1.0)) throw std::invalid_argument("c must lie in [0, 1)");

  const double vi_tol = std::max(tol / 4.0, 1e-13);
  const auto v = value_iteration(mdp, vi_tol);
  const auto vbar = value_iteration(agg.mdp, vi_tol);
  ValueBoundReport report;
  for (int s = 0; s < n; ++s) report.max_gap = std::max(report.max_gap, std::abs(v[s] - vbar[agg.cluster_of[s]]));
  report.bound = (2.0 * eps + 2.0 * learning_error) / ((1.0 - mdp.discount()) * (1.0 - c));
  report.holds = report.max_gap <= report.bound + tol;
  return report;
}

LipschitzReport check_lipschitz(const FiniteMdp& mdp, const PseudoMetric& metric, double c, double tol) {
  if (c < mdp.discount()) throw std::invalid_argument("Lipschitz bound requires c >= gamma");
  if (!(c < 1.0)) throw std::invalid_argument("c must be below 1");
  const int n = mdp.n_states();
  if (metric.size() != n) throw std::invalid_argument("metric size does not match the MDP");
  const auto v = value_iteration(mdp, std::max(tol / 4.0, 1e-13));
  LipschitzReport report;
  report.max_excess = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double lhs = std::abs(v[i] - v[j]);
      const double rhs = metric(i, j) / (1.0 - c);
      report.max_excess = std::max(report.max_excess, lhs - rhs);
      if (rhs > tol)
        report.max_ratio = std::max(report.max_ratio, lhs / rhs);
      else if (lhs > 2.0 * tol)
        report.max_ratio = std::numeric_limits<double>::infinity();
      if (lhs > rhs + tol) ++report.violations;
    }
  if (n < 2) report.max_excess = 0.0;
  report.holds = report.violations == 0;
  return report;
}

PseudoMetric latent_distances(const std::vector<std::vector<double>>& latents, LatentNorm norm) {
  const int n = static_cast<int>(latents.size());
  PseudoMetric out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (latents[i].size() != latents[j].size()) throw std::invalid_argument("latent dimensions differ");
      double acc = 0.0;
      for (std::size_t k = 0; k < latents[i].size(); ++k) {
        const double diff = latents[i][k] - latents[j][k];
        acc += norm == LatentNorm::kL1 ? std::abs(diff) : diff * diff;
      }
      out.set(i, j, norm == LatentNorm::kL1 ? acc : std::sqrt(acc));
    }
  return out;
}

double learning_error(const PseudoMetric& approx, const PseudoMetric& metric) {
  if (approx.size() != metric.size()) throw std::invalid_argument("learning_error: state count mismatch");
  double worst = 0.0;
  for (int i = 0; i < metric.size(); ++i)
    for (int j = i + 1; j < metric.size(); ++j) worst = std::max(worst, std::abs(approx(i, j) - metric(i, j)));
  return worst;
}

double learning_error(const std::vector<std::vector<double>>& latents, const PseudoMetric& metric,
                      LatentNorm norm) {
  if (static_cast<int>(latents.size()) != metric.size())
    throw std::invalid_argument("learning_error: one latent per state required");
  return learning_error(latent_distances(latents, norm), metric);
}

void write_metric_csv(const PseudoMetric& metric, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "i,j,d\n";
  char buf[64];
  for (int i = 0; i < metric.size(); ++i)
    for (int j = 0; j < metric.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", metric(i, j));
      out << i << ',' << j << ',' << buf << '\n';
    }
}

void write_partition_csv(const StatePartition& partition, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "state,block\n";
  for (std::size_t s = 0; s < partition.block_id.size(); ++s) out << s << ',' << partition.block_id[s] << '\n';
}

}  // namespace bisimkit

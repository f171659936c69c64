#pragma once

#include <filesystem>
#include <vector>

#include "bisimkit/mdp.hpp"

namespace bisimkit {

// Symmetric state-pair distance matrix with zero diagonal.
class PseudoMetric {
 public:
  PseudoMetric() = default;
  explicit PseudoMetric(int n) : n_(n), dist_(static_cast<std::size_t>(n) * n, 0.0) {}
  // Throws std::invalid_argument if dist is not n x n.
  PseudoMetric(int n, std::vector<double> dist);

  int size() const { return n_; }
  double operator()(int i, int j) const { return dist_[static_cast<std::size_t>(i) * n_ + j]; }
  // Writes both (i, j) and (j, i).
  void set(int i, int j, double d) {
    dist_[static_cast<std::size_t>(i) * n_ + j] = d;
    dist_[static_cast<std::size_t>(j) * n_ + i] = d;
  }
  const std::vector<double>& data() const { return dist_; }
  double diameter() const;

  // Throws std::invalid_argument naming the first violated pseudometric axiom:
  // exact zero diagonal, nonnegativity, symmetry, triangle inequality.
  void validate(double symmetry_tol = 1e-12, double triangle_tol = 1e-7) const;

 private:
  int n_ = 0;
  std::vector<double> dist_;
};

struct StatePartition {
  std::vector<int> block_id;  // contiguous from 0 in order of first appearance

  int n_blocks() const;
  bool same_block(int i, int j) const { return block_id[i] == block_id[j]; }
};

// Coarsest partition whose blockmates agree on R(., a) and on P(G | ., a) for
// every block G, both within tol; computed by iterated splitting.
StatePartition bisimulation_partition(const FiniteMdp& mdp, double tol = 1e-9);

struct MetricSolveOptions {
  double tol = 1e-8;
  // 0 means BISIMKIT_THREADS or the hardware concurrency.
  int threads = 0;
};

struct MetricSolveStats {
  int iterations = 0;
  int iteration_cap = 0;
  double final_delta = 0.0;
};

// Least fixed point of
//   d(i, j) = max_a (1 - c)|R(i,a) - R(j,a)| + c W1(P(.|i,a), P(.|j,a); d)
// iterated from d = 0 until successive iterates differ by at most tol.
// Contraction and monotonicity of the iterates are asserted on every step.
PseudoMetric bisim_metric_max(const FiniteMdp& mdp, double c, const MetricSolveOptions& options = {},
                              MetricSolveStats* stats = nullptr);

// Same fixed point for the policy-averaged reward R^pi and transition P^pi.
PseudoMetric bisim_metric_onpolicy(const FiniteMdp& mdp, const DiscretePolicy& policy, double c,
                                   const MetricSolveOptions& options = {},
                                   MetricSolveStats* stats = nullptr);

// Alternates an on-policy metric solve with greedy policy improvement,
// starting from the given policy, until the policy stops changing.
struct PolicyMetricRound {
  DiscretePolicy policy;
  ValueFunction value;
  PseudoMetric metric;
};
std::vector<PolicyMetricRound> onpolicy_metric_policy_iteration(const FiniteMdp& mdp,
                                                                const DiscretePolicy& initial, double c,
                                                                const MetricSolveOptions& options = {},
                                                                int max_rounds = 50);

enum class AggregationRule { kUniform, kRepresentative };

struct AggregatedMdp {
  std::vector<int> cluster_of;       // state -> cluster
  std::vector<int> representatives;  // cluster -> state
  FiniteMdp mdp;                     // over clusters
};

// Greedy epsilon covering in state-index order; a state joins the first
// cluster whose representative lies within eps, else opens a new one.
AggregatedMdp epsilon_aggregate(const FiniteMdp& mdp, const PseudoMetric& metric, double eps,
                                AggregationRule rule = AggregationRule::kUniform);

struct ValueBoundReport {
  double max_gap = 0.0;
  double bound = 0.0;
  bool holds = false;
};

// max_s |V*(s) - Vbar*(phi(s))| against (2 eps + 2 learning_error) / ((1 - gamma)(1 - c)).
ValueBoundReport check_value_bound(const FiniteMdp& mdp, const AggregatedMdp& agg, double eps, double c,
                                   double tol, double learning_error = 0.0);

struct LipschitzReport {
  double max_ratio = 0.0;   // max |dV*| / (d / (1 - c)) over pairs with d / (1 - c) > tol
  double max_excess = 0.0;  // max |dV*| - d / (1 - c)
  int violations = 0;
  bool holds = false;
};

// |V*(i) - V*(j)| <= d(i, j) / (1 - c) + tol for all pairs. Requires c >= gamma.
LipschitzReport check_lipschitz(const FiniteMdp& mdp, const PseudoMetric& metric, double c, double tol);

enum class LatentNorm { kL1, kL2 };

// Pairwise latent distances as a PseudoMetric-shaped matrix.
PseudoMetric latent_distances(const std::vector<std::vector<double>>& latents, LatentNorm norm);

// sup over pairs of | ||phi(i) - phi(j)|| - d(i, j) |.
double learning_error(const std::vector<std::vector<double>>& latents, const PseudoMetric& metric,
                      LatentNorm norm);
// Same supremum for an already-computed distance matrix.
double learning_error(const PseudoMetric& approx, const PseudoMetric& metric);

// CSV exports: "i,j,d" (all ordered pairs) and "state,block".
void write_metric_csv(const PseudoMetric& metric, const std::filesystem::path& path);
void write_partition_csv(const StatePartition& partition, const std::filesystem::path& path);

// Worker count for pairwise solves: BISIMKIT_THREADS if set, else hardware concurrency.
int default_thread_count();

}  // namespace bisimkit

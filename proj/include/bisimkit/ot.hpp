#pragma once

#include <span>
#include <vector>

namespace bisimkit {

struct DiscreteDistribution {
  std::vector<double> probs;

  // Throws std::invalid_argument unless entries are >= 0 and sum to 1 within 1e-9.
  void validate() const;
  std::size_t size() const { return probs.size(); }
};

// Optimal coupling (row-major rows x cols) and its cost.
struct TransportPlan {
  int rows = 0;
  int cols = 0;
  std::vector<double> coupling;
  double value = 0.0;

  double at(int i, int j) const { return coupling[static_cast<std::size_t>(i) * cols + j]; }
};

// Diagonal Gaussian; stddev is the diagonal of Sigma^{1/2}.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// Basic cells and their flows from a previous solve, reusable as a starting
// point for a problem with the same supply and demand but new costs.
struct TransportBasis {
  int rows = 0;
  int cols = 0;
  std::vector<int> cells;  // i * cols + j
  std::vector<double> flows;
};

// Balanced transportation problem solver: north-west-corner start, MODI
// potentials, steepest reduced cost entering with a Bland's-rule fallback
// against cycling. Scratch buffers are reused between calls, so one instance
// per thread.
class TransportSolver {
 public:
  // supply/demand strictly positive with equal totals; cost row-major
  // supply.size() x demand.size(). Writes the optimal plan when plan != nullptr.
  // With warm set, starts from it when its shape matches (it must then come
  // from the same supply and demand) and stores the final basis back into it.
  double solve(std::span<const double> supply, std::span<const double> demand,
               std::span<const double> cost, std::vector<double>* plan = nullptr,
               TransportBasis* warm = nullptr);

  // Pivots performed by the last solve.
  int last_pivots() const { return pivots_; }

 private:
  void build_adjacency();
  bool compute_potentials();
  bool find_path(int from_node, int to_node);

  int m_ = 0;
  int n_ = 0;
  int pivots_ = 0;
  std::vector<double> flow_;
  std::vector<char> basic_;
  std::vector<int> basis_;  // cell ids i * n + j
  std::vector<double> u_, v_;
  std::vector<char> seen_;
  std::vector<int> parent_cell_, parent_node_, stack_;
  std::vector<int> path_;
  std::vector<int> adj_start_, adj_cells_, adj_fill_;  // basis cells incident to each node
  std::span<const double> cost_;
};

// Exact 1-Wasserstein distance (earth mover's distance) between p and q under
// the given ground cost (row-major p.size() x q.size()). Zero-probability
// support points are pruned before solving; the returned plan covers the full
// supports.
TransportPlan w1_discrete(std::span<const double> p, std::span<const double> q,
                          std::span<const double> cost);
TransportPlan w1_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q,
                          std::span<const double> cost);

// Independent oracle: minimum over all basic feasible solutions of the
// transportation polytope, enumerated as spanning trees of the bipartite
// support graph. Supports are limited to 5 points each.
double brute_force_w1(std::span<const double> p, std::span<const double> q,
                      std::span<const double> cost);

inline constexpr std::size_t kBruteForceMaxSupport = 5;

// sqrt(||mu_a - mu_b||^2 + ||sigma_a - sigma_b||^2).
double w2_diag_gaussian(const DiagGaussian& a, const DiagGaussian& b);

}  // namespace bisimkit

#include "bisimkit/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bisimkit {

namespace {

constexpr double kMassTolerance = 1e-9;

void check_distribution(std::span<const double> p, const char* name) {
  if (p.empty()) throw std::invalid_argument(std::string(name) + " has empty support");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      std::ostringstream os;
      os << name << "[" << i << "] = " << p[i] << " is not a probability";
      throw std::invalid_argument(os.str());
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os << name << " sums to " << sum << ", not 1";
    throw std::invalid_argument(os.str());
  }
}

void check_cost(std::span<const double> cost, std::size_t rows, std::size_t cols) {
  if (cost.size() != rows * cols) throw std::invalid_argument("cost matrix dimensions do not match supports");
  for (double c : cost)
    if (!std::isfinite(c) || c < 0.0)
      throw std::invalid_argument("cost entries must be finite and nonnegative");
}

}  // namespace

void DiscreteDistribution::validate() const { check_distribution(probs, "distribution"); }

void TransportSolver::build_adjacency() {
  const int nodes = m_ + n_;
  adj_start_.assign(nodes + 1, 0);
  for (int cell : basis_) {
    ++adj_start_[cell / n_ + 1];
    ++adj_start_[m_ + cell % n_ + 1];
  }
  for (int k = 0; k < nodes; ++k) adj_start_[k + 1] += adj_start_[k];
  adj_cells_.resize(2 * basis_.size());
  std::vector<int>& fill = adj_fill_;
  fill.assign(adj_start_.begin(), adj_start_.end() - 1);
  for (int cell : basis_) {
    adj_cells_[fill[cell / n_]++] = cell;
    adj_cells_[fill[m_ + cell % n_]++] = cell;
  }
}

bool TransportSolver::compute_potentials() {
  std::fill(seen_.begin(), seen_.end(), 0);
  // Breadth-first over the basis tree; stack_ doubles as the queue.
  stack_.clear();
  stack_.push_back(0);
  seen_[0] = 1;
  u_[0] = 0.0;
  for (std::size_t head = 0; head < stack_.size(); ++head) {
    const int node = stack_[head];
    for (int k = adj_start_[node]; k < adj_start_[node + 1]; ++k) {
      const int cell = adj_cells_[k];
      const int i = cell / n_;
      const int j = cell % n_;
      if (node < m_) {
        if (seen_[m_ + j]) continue;
        v_[j] = cost_[cell] - u_[i];
        seen_[m_ + j] = 1;
        stack_.push_back(m_ + j);
      } else {
        if (seen_[i]) continue;
        u_[i] = cost_[cell] - v_[j];
        seen_[i] = 1;
        stack_.push_back(i);
      }
    }
  }
  return static_cast<int>(stack_.size()) == m_ + n_;
}

bool TransportSolver::find_path(int from_node, int to_node) {
  std::fill(seen_.begin(), seen_.end(), 0);
  stack_.clear();
  stack_.push_back(from_node);
  seen_[from_node] = 1;
  parent_cell_[from_node] = -1;
  while (!stack_.empty()) {
    const int node = stack_.back();
    stack_.pop_back();
    if (node == to_node) break;
    for (int k = adj_start_[node]; k < adj_start_[node + 1]; ++k) {
      const int cell = adj_cells_[k];
      const int next = node < m_ ? m_ + cell % n_ : cell / n_;
      if (seen_[next]) continue;
      seen_[next] = 1;
      parent_cell_[next] = cell;
      parent_node_[next] = node;
      stack_.push_back(next);
    }
  }
  if (!seen_[to_node]) return false;
  path_.clear();
  for (int node = to_node; node != from_node; node = parent_node_[node]) path_.push_back(parent_cell_[node]);
  std::reverse(path_.begin(), path_.end());
  return true;
}

double TransportSolver::solve(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost, std::vector<double>* plan, TransportBasis* warm) {
  m_ = static_cast<int>(supply.size());
  n_ = static_cast<int>(demand.size());
  cost_ = cost;
  pivots_ = 0;
  const std::size_t cells = static_cast<std::size_t>(m_) * n_;
  flow_.assign(cells, 0.0);
  basic_.assign(cells, 0);
  basis_.clear();
  u_.assign(m_, 0.0);
  v_.assign(n_, 0.0);
  seen_.assign(m_ + n_, 0);
  parent_cell_.assign(m_ + n_, -1);
  parent_node_.assign(m_ + n_, -1);

  const bool reuse = warm && warm->rows == m_ && warm->cols == n_ &&
                     warm->cells.size() == static_cast<std::size_t>(m_ + n_ - 1);
  if (reuse) {
    for (std::size_t k = 0; k < warm->cells.size(); ++k) {
      const int cell = warm->cells[k];
      flow_[cell] = warm->flows[k];
      basic_[cell] = 1;
      basis_.push_back(cell);
    }
  } else {
    // North-west corner: exactly m + n - 1 basic cells forming a spanning tree.
    double s = supply[0];
    double d = demand[0];
    int i = 0;
    int j = 0;
    for (;;) {
      const double x = std::min(s, d);
      const int cell = i * n_ + j;
      flow_[cell] = x;
      basic_[cell] = 1;
      basis_.push_back(cell);
      if (i == m_ - 1 && j == n_ - 1) break;
      const bool row_done = s <= d;
      s -= x;
      d -= x;
      if ((row_done && i < m_ - 1) || j == n_ - 1) {
        ++i;
        s = supply[i];
      } else {
        ++j;
        d = demand[j];
      }
    }
  }

  double max_cost = 0.0;
  for (double c : cost) max_cost = std::max(max_cost, c);
  const double eps = 1e-12 * max_cost;

  const int max_pivots = 64 * static_cast<int>(cells) + 1024;
  // Most negative reduced cost until a long run of degenerate pivots, then
  // Bland's first-negative rule, which cannot cycle.
  const int degenerate_limit = static_cast<int>(cells);
  int degenerate_run = 0;
  while (max_cost > 0.0) {
    build_adjacency();
    if (!compute_potentials()) throw std::logic_error("transportation basis is not a spanning tree");
    const bool bland = degenerate_run >= degenerate_limit;
    int entering = -1;
    double most_negative = -eps;
    for (int i = 0, cell = 0; i < m_ && !(bland && entering >= 0); ++i)
      for (int j = 0; j < n_; ++j, ++cell) {
        if (basic_[cell]) continue;
        const double reduced = cost_[cell] - u_[i] - v_[j];
        if (reduced < most_negative) {
          entering = cell;
          if (bland) break;
          most_negative = reduced;
        }
      }
    if (entering < 0) break;
    if (++pivots_ > max_pivots) throw std::runtime_error("transportation simplex exceeded pivot limit");

    const int ei = entering / n_;
    const int ej = entering % n_;
    if (!find_path(ei, m_ + ej)) throw std::logic_error("no cycle through entering cell");
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < path_.size(); k += 2) {
      const int cell = path_[k];
      if (flow_[cell] < theta || (flow_[cell] == theta && cell < leaving)) {
        theta = flow_[cell];
        leaving = cell;
      }
    }
    for (std::size_t k = 0; k < path_.size(); ++k) {
      if (k % 2 == 0)
        flow_[path_[k]] -= theta;
      else
        flow_[path_[k]] += theta;
    }
    degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
    flow_[entering] = theta;
    flow_[leaving] = 0.0;
    basic_[leaving] = 0;
    basic_[entering] = 1;
    *std::find(basis_.begin(), basis_.end(), leaving) = entering;
  }

  double value = 0.0;
  for (int cell : basis_) value += flow_[cell] * cost_[cell];
  if (plan) *plan = flow_;
  if (warm) {
    warm->rows = m_;
    warm->cols = n_;
    warm->cells = basis_;
    warm->flows.resize(basis_.size());
    for (std::size_t k = 0; k < basis_.size(); ++k) warm->flows[k] = flow_[basis_[k]];
  }
  return value;
}

TransportPlan w1_discrete(std::span<const double> p, std::span<const double> q,
                          std::span<const double> cost) {
  check_distribution(p, "p");
  check_distribution(q, "q");
  check_cost(cost, p.size(), q.size());

  TransportPlan out;
  out.rows = static_cast<int>(p.size());
  out.cols = static_cast<int>(q.size());
  out.coupling.assign(p.size() * q.size(), 0.0);

  std::vector<int> rows, cols;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) rows.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q[j] > 0.0) cols.push_back(static_cast<int>(j));

  if (rows.size() == 1 || cols.size() == 1) {
    // A point mass on either side admits a single coupling.
    for (int i : rows)
      for (int j : cols) {
        const double x = rows.size() == 1 ? q[j] : p[i];
        out.coupling[static_cast<std::size_t>(i) * q.size() + j] = x;
        out.value += x * cost[static_cast<std::size_t>(i) * q.size() + j];
      }
    return out;
  }

  std::vector<double> supply(rows.size()), demand(cols.size()), sub(rows.size() * cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a) supply[a] = p[rows[a]];
  for (std::size_t b = 0; b < cols.size(); ++b) demand[b] = q[cols[b]];
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      sub[a * cols.size() + b] = cost[static_cast<std::size_t>(rows[a]) * q.size() + cols[b]];

  TransportSolver solver;
  std::vector<double> flow;
  out.value = solver.solve(supply, demand, sub, &flow);
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out.coupling[static_cast<std::size_t>(rows[a]) * q.size() + cols[b]] = flow[a * cols.size() + b];
  return out;
}

TransportPlan w1_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q,
                          std::span<const double> cost) {
  return w1_discrete(std::span<const double>(p.probs), std::span<const double>(q.probs), cost);
}

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Flows on a spanning tree of the bipartite graph are forced: peel leaves.
bool tree_flows(const std::vector<int>& tree, int m, int n, std::span<const double> p,
                std::span<const double> q, std::vector<double>& flow) {
  const int nodes = m + n;
  std::vector<double> residual(nodes);
  for (int i = 0; i < m; ++i) residual[i] = p[i];
  for (int j = 0; j < n; ++j) residual[m + j] = q[j];
  std::vector<int> degree(nodes, 0);
  for (int cell : tree) {
    ++degree[cell / n];
    ++degree[m + cell % n];
  }
  std::vector<char> used(tree.size(), 0);
  flow.assign(tree.size(), 0.0);
  for (std::size_t done = 0; done < tree.size(); ++done) {
    int leaf = -1;
    for (int v = 0; v < nodes && leaf < 0; ++v)
      if (degree[v] == 1) leaf = v;
    if (leaf < 0) return false;
    std::size_t edge = 0;
    for (; edge < tree.size(); ++edge) {
      if (used[edge]) continue;
      const int i = tree[edge] / n;
      const int j = m + tree[edge] % n;
      if (i == leaf || j == leaf) break;
    }
    const int i = tree[edge] / n;
    const int j = m + tree[edge] % n;
    const int other = i == leaf ? j : i;
    flow[edge] = residual[leaf];
    residual[other] -= residual[leaf];
    residual[leaf] = 0.0;
    used[edge] = 1;
    --degree[i];
    --degree[j];
  }
  return true;
}

}  // namespace

double brute_force_w1(std::span<const double> p, std::span<const double> q,
                      std::span<const double> cost) {
  if (p.size() > kBruteForceMaxSupport || q.size() > kBruteForceMaxSupport)
    throw std::invalid_argument("brute_force_w1 supports at most 5 points per side");
  check_distribution(p, "p");
  check_distribution(q, "q");
  check_cost(cost, p.size(), q.size());

  const int m = static_cast<int>(p.size());
  const int n = static_cast<int>(q.size());
  const int cells = m * n;
  const int k = m + n - 1;
  constexpr double kFeasibility = 1e-12;

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  std::vector<double> flow;
  for (;;) {
    DisjointSets sets(m + n);
    bool acyclic = true;
    for (int cell : pick)
      if (!sets.unite(cell / n, m + cell % n)) {
        acyclic = false;
        break;
      }
    if (acyclic && tree_flows(pick, m, n, p, q, flow)) {
      bool feasible = true;
      double value = 0.0;
      for (std::size_t e = 0; e < pick.size(); ++e) {
        if (flow[e] < -kFeasibility) feasible = false;
        value += std::max(flow[e], 0.0) * cost[pick[e]];
      }
      if (feasible) best = std::min(best, value);
    }
    // Next k-combination of [0, cells).
    int pos = k - 1;
    while (pos >= 0 && pick[pos] == cells - k + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int r = pos + 1; r < k; ++r) pick[r] = pick[r - 1] + 1;
  }
  return best;
}

double w2_diag_gaussian(const DiagGaussian& a, const DiagGaussian& b) {
  if (a.mean.size() != b.mean.size() || a.stddev.size() != b.stddev.size() ||
      a.mean.size() != a.stddev.size())
    throw std::invalid_argument("w2_diag_gaussian: dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    if (!(a.stddev[k] > 0.0) || !(b.stddev[k] > 0.0) || !std::isfinite(a.stddev[k]) ||
        !std::isfinite(b.stddev[k]))
      throw std::invalid_argument("w2_diag_gaussian: stddev must be positive and finite");
    const double dm = a.mean[k] - b.mean[k];
    const double ds = a.stddev[k] - b.stddev[k];
    acc += dm * dm + ds * ds;
  }
  return std::sqrt(acc);
}

}  // namespace bisimkit

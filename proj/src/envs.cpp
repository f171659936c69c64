#include "bisimkit/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bisimkit/errors.hpp"

namespace bisimkit {

namespace {

void check_action(std::span<const double> action, std::size_t dim) {
  if (action.size() != dim) throw std::invalid_argument("action has wrong dimension");
  for (double a : action)
    if (!std::isfinite(a) || std::abs(a) > 1.0 + 1e-9) throw std::invalid_argument("action outside [-1, 1]");
}

// Chooses up to max_pairs of the candidate index pairs uniformly without
// replacement, keeping enumeration order.
std::vector<std::pair<int, int>> subsample(std::vector<std::pair<int, int>> all, int max_pairs, Rng& rng) {
  if (max_pairs <= 0 || static_cast<std::size_t>(max_pairs) >= all.size()) return all;
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < static_cast<std::size_t>(max_pairs); ++i)
    std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
  idx.resize(static_cast<std::size_t>(max_pairs));
  std::sort(idx.begin(), idx.end());
  std::vector<std::pair<int, int>> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

ObservationPairs pairs_from_states(const TabularEnvironment& env, const std::vector<std::pair<int, int>>& pairs) {
  ObservationPairs out;
  out.a.resize(env.obs_dim(), static_cast<Eigen::Index>(pairs.size()));
  out.b.resize(env.obs_dim(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto oa = env.observation_of_state(pairs[k].first);
    const auto ob = env.observation_of_state(pairs[k].second);
    out.a.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(oa.data(), env.obs_dim());
    out.b.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(ob.data(), env.obs_dim());
  }
  return out;
}

std::vector<double> dirichlet_rows(Rng& rng, int rows, int cols) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    auto row = dirichlet_ones(rng, static_cast<std::size_t>(cols));
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace

std::vector<std::string> family_variants(const std::string& family) {
  if (family == "grid") return {"reach_goal", "alt_goal", "distractor_reward"};
  if (family == "point_mass") return {"reach_goal", "hold_velocity", "distractor_reward"};
  if (family == "factored") return {"r_s1", "r_s2", "r_s3"};
  throw ConfigError("unknown environment family '" + family + "'");
}

void EnvSpec::validate() const {
  const auto allowed = family_variants(family);
  if (!variant.empty() && std::find(allowed.begin(), allowed.end(), variant) == allowed.end())
    throw ConfigError("unknown " + family + " variant '" + variant + "'");
  if (episode_cap < 0) throw ConfigError("episode_cap must be >= 0");
  if (grid_size < 1 || chain_states < 1) throw ConfigError("grid_size and chain_states must be >= 1");
  if (distractor_dims < 0) throw ConfigError("distractor_dims must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(action_cost >= 0.0)) throw ConfigError("action_cost must be >= 0");
  if (!(std::abs(distractor_rho) < 1.0)) throw ConfigError("distractor_rho must lie in (-1, 1)");
  if (!(distractor_sigma >= 0.0)) throw ConfigError("distractor_sigma must be >= 0");
  if (!std::isfinite(distractor_mean)) throw ConfigError("distractor_mean must be finite");
  if (s1_size < 1 || s2_size < 1 || s3_size < 1 || factored_actions < 1)
    throw ConfigError("factor sizes and action count must be >= 1");
}

// ---------------------------------------------------------------- grid

TabularDistractorGrid::TabularDistractorGrid(const EnvSpec& spec)
    : n_(spec.grid_size),
      m_(spec.chain_states),
      cap_(spec.episode_cap > 0 ? spec.episode_cap : 5 * spec.grid_size),
      absorbing_(spec.absorbing_goal),
      variant_(spec.variant.empty() ? "reach_goal" : spec.variant) {
  spec.validate();
  const auto v = variants();
  if (std::find(v.begin(), v.end(), variant_) == v.end()) throw ConfigError("unknown grid variant '" + variant_ + "'");
  Rng rng(derive_seed(spec.chain_seed, 0));
  chain_p_ = dirichlet_rows(rng, m_, m_);
}

int TabularDistractorGrid::move(int cell, int action) const {
  int x = cell % n_, y = cell / n_;
  switch (action) {
    case 0: x = std::min(x + 1, n_ - 1); break;
    case 1: x = std::max(x - 1, 0); break;
    case 2: y = std::min(y + 1, n_ - 1); break;
    case 3: y = std::max(y - 1, 0); break;
    default: throw std::invalid_argument("grid action must be in [0, 4)");
  }
  return y * n_ + x;
}

double TabularDistractorGrid::reward_of(int cell, int chain) const {
  if (variant_ == "reach_goal") return cell == goal_cell() ? 1.0 : 0.0;
  if (variant_ == "alt_goal") return cell == 0 ? 1.0 : 0.0;
  return chain == 0 ? 1.0 : 0.0;
}

bool TabularDistractorGrid::is_terminal_cell(int cell) const {
  if (!absorbing_) return false;
  if (variant_ == "reach_goal") return cell == goal_cell();
  if (variant_ == "alt_goal") return cell == 0;
  return false;
}

std::vector<double> TabularDistractorGrid::reset(std::uint64_t seed) {
  rng_ = Rng(derive_seed(seed, 11));
  cell_ = static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(n_) * n_));
  chain_ = static_cast<int>(uniform_index(rng_, static_cast<std::size_t>(m_)));
  t_ = 0;
  return observation_of_state(current_state());
}

void TabularDistractorGrid::set_state(int cell, int chain) {
  if (cell < 0 || cell >= n_ * n_ || chain < 0 || chain >= m_) throw std::invalid_argument("grid state out of range");
  cell_ = cell;
  chain_ = chain;
}

StepResult TabularDistractorGrid::step_discrete(int action) {
  cell_ = move(cell_, action);
  const double u = uniform01(rng_);
  double acc = 0.0;
  int next = m_ - 1;
  for (int d = 0; d < m_; ++d) {
    acc += chain_prob(chain_, d);
    if (u < acc) {
      next = d;
      break;
    }
  }
  chain_ = next;
  ++t_;
  StepResult r;
  r.obs = observation_of_state(current_state());
  r.reward = reward_of(cell_, chain_);
  r.terminal = is_terminal_cell(cell_);
  r.timeout = !r.terminal && t_ >= cap_;
  return r;
}

StepResult TabularDistractorGrid::step(std::span<const double> action) { return step_discrete(discrete_action(action)); }

int TabularDistractorGrid::discrete_action(std::span<const double> action) const {
  check_action(action, 2);
  if (std::abs(action[1]) > std::abs(action[0])) return action[1] >= 0.0 ? 2 : 3;
  return action[0] >= 0.0 ? 0 : 1;
}

std::vector<double> TabularDistractorGrid::continuous_action(int discrete) const {
  switch (discrete) {
    case 0: return {1.0, 0.0};
    case 1: return {-1.0, 0.0};
    case 2: return {0.0, 1.0};
    case 3: return {0.0, -1.0};
  }
  throw std::invalid_argument("grid action must be in [0, 4)");
}

std::vector<double> TabularDistractorGrid::observation_of_state(int state) const {
  if (state < 0 || state >= n_states()) throw std::invalid_argument("grid state out of range");
  std::vector<double> obs(static_cast<std::size_t>(obs_dim()), 0.0);
  obs[static_cast<std::size_t>(state / m_)] = 1.0;
  obs[static_cast<std::size_t>(n_ * n_ + state % m_)] = 1.0;
  return obs;
}

FiniteMdp TabularDistractorGrid::to_finite_mdp(double gamma) const {
  const int S = n_states();
  std::vector<double> p(static_cast<std::size_t>(4) * S * S, 0.0), r(static_cast<std::size_t>(S) * 4, 0.0);
  for (int a = 0; a < 4; ++a)
    for (int s = 0; s < S; ++s) {
      const int cell = s / m_, d = s % m_;
      const bool stuck = is_terminal_cell(cell);
      const int next_cell = stuck ? cell : move(cell, a);
      double expected = 0.0;
      for (int d2 = 0; d2 < m_; ++d2) {
        const double pr = chain_prob(d, d2);
        p[(static_cast<std::size_t>(a) * S + s) * S + next_cell * m_ + d2] = pr;
        expected += pr * reward_of(next_cell, d2);
      }
      r[static_cast<std::size_t>(s) * 4 + a] = stuck ? 0.0 : expected;
    }
  return FiniteMdp(S, 4, std::move(p), std::move(r), gamma);
}

std::unique_ptr<Environment> TabularDistractorGrid::with_reward_variant(const std::string& variant) const {
  auto copy = std::make_unique<TabularDistractorGrid>(*this);
  const auto v = variants();
  if (std::find(v.begin(), v.end(), variant) == v.end()) throw ConfigError("unknown grid variant '" + variant + "'");
  copy->variant_ = variant;
  return copy;
}

bool TabularDistractorGrid::variant_preserves_ancestors(const std::string& variant) const {
  // ancestors: the cell for the goal rewards, the chain for the distractor reward
  return (variant == "distractor_reward") == (variant_ == "distractor_reward");
}

FactorPairs TabularDistractorGrid::factor_pairs(int max_pairs, Rng& rng) const {
  std::vector<std::pair<int, int>> distractor, task;
  for (int s = 0; s < n_states(); ++s)
    for (int t = s + 1; t < n_states(); ++t) {
      const bool same_cell = s / m_ == t / m_;
      const bool same_chain = s % m_ == t % m_;
      if (same_cell && !same_chain) distractor.emplace_back(s, t);
      if (same_chain && !same_cell) task.emplace_back(s, t);
    }
  FactorPairs fp;
  fp.distractor_only = pairs_from_states(*this, subsample(distractor, max_pairs, rng));
  fp.task_only = pairs_from_states(*this, subsample(task, max_pairs, rng));
  return fp;
}

// ---------------------------------------------------------------- point mass

ContinuousPointMass::ContinuousPointMass(const EnvSpec& spec)
    : k_(spec.distractor_dims),
      cap_(spec.episode_cap > 0 ? spec.episode_cap : 100),
      dt_(spec.dt),
      action_cost_(spec.action_cost),
      d_mean_(spec.distractor_mean),
      d_rho_(spec.distractor_rho),
      d_sigma_(spec.distractor_sigma),
      variant_(spec.variant.empty() ? "reach_goal" : spec.variant) {
  spec.validate();
  const auto v = variants();
  if (std::find(v.begin(), v.end(), variant_) == v.end())
    throw ConfigError("unknown point-mass variant '" + variant_ + "'");
  if (variant_ == "distractor_reward" && k_ == 0) throw ConfigError("distractor_reward needs distractor_dims >= 1");
  const int dim = 4 + k_;
  Rng rng(derive_seed(spec.mixing_seed, 0));
  Eigen::MatrixXd g(dim, dim);
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r) g(r, c) = standard_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  mixing_ = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd rr = qr.matrixQR();
  for (int c = 0; c < dim; ++c)
    if (rr(c, c) < 0.0) mixing_.col(c) *= -1.0;
  state_ = Eigen::VectorXd::Zero(dim);
}

void ContinuousPointMass::set_distractor_process(double mean, double rho, double sigma) {
  if (!(std::abs(rho) < 1.0) || !(sigma >= 0.0) || !std::isfinite(mean))
    throw ConfigError("invalid distractor process parameters");
  d_mean_ = mean;
  d_rho_ = rho;
  d_sigma_ = sigma;
}

std::vector<double> ContinuousPointMass::observe(const Eigen::VectorXd& raw) const {
  const Eigen::VectorXd o = mixing_ * raw;
  return {o.data(), o.data() + o.size()};
}

void ContinuousPointMass::set_raw_state(const Eigen::VectorXd& s) {
  if (s.size() != 4 + k_) throw std::invalid_argument("point-mass state has wrong dimension");
  state_ = s;
}

std::vector<double> ContinuousPointMass::reset(std::uint64_t seed) {
  rng_ = Rng(derive_seed(seed, 21));
  state_.setZero();
  state_(0) = uniform(rng_, -1.0, 1.0);
  state_(1) = uniform(rng_, -1.0, 1.0);
  const double stationary = d_sigma_ / std::sqrt(1.0 - d_rho_ * d_rho_);
  for (int i = 0; i < k_; ++i) state_(4 + i) = d_mean_ + stationary * standard_normal(rng_);
  t_ = 0;
  return observe(state_);
}

double ContinuousPointMass::reward_of(const Eigen::VectorXd& next, std::span<const double> action) const {
  const double cost = action_cost_ * (action[0] * action[0] + action[1] * action[1]);
  if (variant_ == "reach_goal") return -std::hypot(next(0), next(1)) - cost;
  if (variant_ == "hold_velocity") return -std::hypot(next(2) - 0.3, next(3)) - cost;
  return -std::abs(next(4)) - cost;
}

StepResult ContinuousPointMass::step(std::span<const double> action) {
  check_action(action, 2);
  Eigen::VectorXd next = state_;
  for (int i = 0; i < 2; ++i) {
    double v = (1.0 - kDamping * dt_) * state_(2 + i) + dt_ * kThrust * action[i];
    double p = state_(i) + dt_ * v;
    if (p > kBox || p < -kBox) {
      p = std::clamp(p, -kBox, kBox);
      v = 0.0;
    }
    next(i) = p;
    next(2 + i) = v;
  }
  for (int i = 0; i < k_; ++i)
    next(4 + i) = d_mean_ + d_rho_ * (state_(4 + i) - d_mean_) + d_sigma_ * standard_normal(rng_);
  state_ = next;
  ++t_;
  StepResult r;
  r.obs = observe(state_);
  r.reward = reward_of(state_, action);
  r.timeout = t_ >= cap_;
  return r;
}

std::unique_ptr<Environment> ContinuousPointMass::with_reward_variant(const std::string& variant) const {
  const auto v = variants();
  if (std::find(v.begin(), v.end(), variant) == v.end())
    throw ConfigError("unknown point-mass variant '" + variant + "'");
  if (variant == "distractor_reward" && k_ == 0) throw ConfigError("distractor_reward needs distractor_dims >= 1");
  auto copy = std::make_unique<ContinuousPointMass>(*this);
  copy->variant_ = variant;
  return copy;
}

bool ContinuousPointMass::variant_preserves_ancestors(const std::string& variant) const {
  // 0 position, 1 velocity, 2 distractors; position is driven by velocity
  auto ancestors = [](const std::string& v) -> std::vector<int> {
    if (v == "reach_goal") return {0, 1};
    if (v == "hold_velocity") return {1};
    return {2};
  };
  const auto mine = ancestors(variant_);
  for (int f : ancestors(variant))
    if (std::find(mine.begin(), mine.end(), f) == mine.end()) return false;
  return true;
}

FactorPairs ContinuousPointMass::factor_pairs(int max_pairs, Rng& rng) const {
  const int n = max_pairs > 0 ? max_pairs : 1000;
  const int dim = 4 + k_;
  const double stationary = d_sigma_ / std::sqrt(1.0 - d_rho_ * d_rho_);
  auto task_part = [&](Eigen::VectorXd& s) {
    s(0) = uniform(rng, -1.0, 1.0);
    s(1) = uniform(rng, -1.0, 1.0);
    s(2) = uniform(rng, -0.5, 0.5);
    s(3) = uniform(rng, -0.5, 0.5);
  };
  auto distractor_part = [&](Eigen::VectorXd& s) {
    for (int i = 0; i < k_; ++i) s(4 + i) = d_mean_ + stationary * standard_normal(rng);
  };
  FactorPairs fp;
  fp.distractor_only.a.resize(dim, n);
  fp.distractor_only.b.resize(dim, n);
  fp.task_only.a.resize(dim, n);
  fp.task_only.b.resize(dim, n);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd s(dim);
    task_part(s);
    distractor_part(s);
    Eigen::VectorXd t = s;
    distractor_part(t);
    fp.distractor_only.a.col(k) = mixing_ * s;
    fp.distractor_only.b.col(k) = mixing_ * t;
    Eigen::VectorXd u = s;
    task_part(u);
    fp.task_only.a.col(k) = mixing_ * s;
    fp.task_only.b.col(k) = mixing_ * u;
  }
  return fp;
}

// ---------------------------------------------------------------- factored

FactoredCausalMdp::FactoredCausalMdp(const EnvSpec& spec)
    : n1_(spec.s1_size),
      n2_(spec.s2_size),
      n3_(spec.s3_size),
      n_actions_(spec.factored_actions),
      cap_(spec.episode_cap > 0 ? spec.episode_cap : 50),
      variant_(spec.variant.empty() ? "r_s1" : spec.variant) {
  spec.validate();
  const auto v = variants();
  if (std::find(v.begin(), v.end(), variant_) == v.end())
    throw ConfigError("unknown factored variant '" + variant_ + "'");
  Rng rng(derive_seed(spec.factored_seed, 0));
  p1_ = dirichlet_rows(rng, n_actions_ * n1_ * n2_, n1_);
  p2_ = dirichlet_rows(rng, n2_, n2_);
  p3_ = dirichlet_rows(rng, n3_, n3_);
  for (int i = 0; i < n1_; ++i) w1_.push_back(uniform01(rng));
  for (int i = 0; i < n2_; ++i) w2_.push_back(uniform01(rng));
  for (int i = 0; i < n3_; ++i) w3_.push_back(uniform01(rng));
}

int FactoredCausalMdp::draw(std::span<const double> row, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    acc += row[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(row.size()) - 1;
}

double FactoredCausalMdp::reward_of(int s1, int s2, int s3) const {
  if (variant_ == "r_s1") return w1_[s1];
  if (variant_ == "r_s2") return w2_[s2];
  return w3_[s3];
}

std::vector<double> FactoredCausalMdp::reset(std::uint64_t seed) {
  rng1_ = Rng(derive_seed(seed, 31));
  rng2_ = Rng(derive_seed(seed, 32));
  rng3_ = Rng(derive_seed(seed, 33));
  s1_ = static_cast<int>(uniform_index(rng1_, static_cast<std::size_t>(n1_)));
  s2_ = static_cast<int>(uniform_index(rng2_, static_cast<std::size_t>(n2_)));
  s3_ = static_cast<int>(uniform_index(rng3_, static_cast<std::size_t>(n3_)));
  t_ = 0;
  return observation_of_state(current_state());
}

StepResult FactoredCausalMdp::step_discrete(int action) {
  if (action < 0 || action >= n_actions_) throw std::invalid_argument("factored action out of range");
  const std::size_t row1 = ((static_cast<std::size_t>(action) * n1_ + s1_) * n2_ + s2_) * n1_;
  const int s1 = draw(std::span<const double>(p1_.data() + row1, static_cast<std::size_t>(n1_)), rng1_);
  const int s2 = draw(std::span<const double>(p2_.data() + static_cast<std::size_t>(s2_) * n2_, n2_), rng2_);
  const int s3 = draw(std::span<const double>(p3_.data() + static_cast<std::size_t>(s3_) * n3_, n3_), rng3_);
  s1_ = s1;
  s2_ = s2;
  s3_ = s3;
  ++t_;
  StepResult r;
  r.obs = observation_of_state(current_state());
  r.reward = reward_of(s1_, s2_, s3_);
  r.timeout = t_ >= cap_;
  return r;
}

StepResult FactoredCausalMdp::step(std::span<const double> action) { return step_discrete(discrete_action(action)); }

int FactoredCausalMdp::discrete_action(std::span<const double> action) const {
  check_action(action, 1);
  const int k = static_cast<int>(std::floor((action[0] + 1.0) * 0.5 * n_actions_));
  return std::clamp(k, 0, n_actions_ - 1);
}

std::vector<double> FactoredCausalMdp::continuous_action(int discrete) const {
  if (discrete < 0 || discrete >= n_actions_) throw std::invalid_argument("factored action out of range");
  return {-1.0 + (2.0 * discrete + 1.0) / n_actions_};
}

std::vector<int> FactoredCausalMdp::factors_of(int state) const {
  if (state < 0 || state >= n_states()) throw std::invalid_argument("factored state out of range");
  return {state / (n2_ * n3_), (state / n3_) % n2_, state % n3_};
}

std::vector<double> FactoredCausalMdp::observation_of_state(int state) const {
  const auto f = factors_of(state);
  std::vector<double> obs(static_cast<std::size_t>(obs_dim()), 0.0);
  obs[static_cast<std::size_t>(f[0])] = 1.0;
  obs[static_cast<std::size_t>(n1_ + f[1])] = 1.0;
  obs[static_cast<std::size_t>(n1_ + n2_ + f[2])] = 1.0;
  return obs;
}

FiniteMdp FactoredCausalMdp::to_finite_mdp(double gamma) const {
  const int S = n_states();
  const int A = n_actions_;
  std::vector<double> p(static_cast<std::size_t>(A) * S * S, 0.0), r(static_cast<std::size_t>(S) * A, 0.0);
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s) {
      const auto f = factors_of(s);
      const std::size_t row1 = ((static_cast<std::size_t>(a) * n1_ + f[0]) * n2_ + f[1]) * n1_;
      double expected = 0.0;
      for (int t1 = 0; t1 < n1_; ++t1)
        for (int t2 = 0; t2 < n2_; ++t2)
          for (int t3 = 0; t3 < n3_; ++t3) {
            const double pr = p1_[row1 + t1] * p2_[static_cast<std::size_t>(f[1]) * n2_ + t2] *
                              p3_[static_cast<std::size_t>(f[2]) * n3_ + t3];
            p[(static_cast<std::size_t>(a) * S + s) * S + index(t1, t2, t3)] = pr;
            expected += pr * reward_of(t1, t2, t3);
          }
      r[static_cast<std::size_t>(s) * A + a] = expected;
    }
  return FiniteMdp(S, A, std::move(p), std::move(r), gamma);
}

void FactoredCausalMdp::intervene(int factor, int value) {
  switch (factor) {
    case 1:
      if (value < 0 || value >= n1_) break;
      s1_ = value;
      return;
    case 2:
      if (value < 0 || value >= n2_) break;
      s2_ = value;
      return;
    case 3:
      if (value < 0 || value >= n3_) break;
      s3_ = value;
      return;
    default: throw std::invalid_argument("factor must be 1, 2 or 3");
  }
  throw std::invalid_argument("intervention value outside the factor's domain");
}

std::unique_ptr<Environment> FactoredCausalMdp::with_reward_variant(const std::string& variant) const {
  const auto v = variants();
  if (std::find(v.begin(), v.end(), variant) == v.end())
    throw ConfigError("unknown factored variant '" + variant + "'");
  auto copy = std::make_unique<FactoredCausalMdp>(*this);
  copy->variant_ = variant;
  return copy;
}

bool FactoredCausalMdp::variant_preserves_ancestors(const std::string& variant) const {
  auto ancestors = [](const std::string& v) -> std::vector<int> {
    if (v == "r_s1") return {1, 2};
    if (v == "r_s2") return {2};
    return {3};
  };
  const auto mine = ancestors(variant_);
  for (int f : ancestors(variant))
    if (std::find(mine.begin(), mine.end(), f) == mine.end()) return false;
  return true;
}

FactorPairs FactoredCausalMdp::factor_pairs(int max_pairs, Rng& rng) const {
  std::vector<std::pair<int, int>> distractor, task;
  for (int s = 0; s < n_states(); ++s)
    for (int t = s + 1; t < n_states(); ++t) {
      const auto a = factors_of(s), b = factors_of(t);
      const bool same_task = a[0] == b[0] && a[1] == b[1];
      if (same_task && a[2] != b[2]) distractor.emplace_back(s, t);
      if (!same_task && a[2] == b[2]) task.emplace_back(s, t);
    }
  FactorPairs fp;
  fp.distractor_only = pairs_from_states(*this, subsample(distractor, max_pairs, rng));
  fp.task_only = pairs_from_states(*this, subsample(task, max_pairs, rng));
  return fp;
}

std::unique_ptr<Environment> make_env(const EnvSpec& spec) {
  spec.validate();
  if (spec.family == "grid") return std::make_unique<TabularDistractorGrid>(spec);
  if (spec.family == "point_mass") return std::make_unique<ContinuousPointMass>(spec);
  return std::make_unique<FactoredCausalMdp>(spec);
}

}  // namespace bisimkit

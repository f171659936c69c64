#include "bisimkit/replay.hpp"

#include <stdexcept>

namespace bisimkit {

Batch Batch::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != size()) throw std::invalid_argument("Batch::permuted: size mismatch");
  Batch out;
  out.obs.resize(obs.rows(), size());
  out.action.resize(action.rows(), size());
  out.next_obs.resize(next_obs.rows(), size());
  out.reward.resize(size());
  out.not_done.resize(size());
  out.indices.resize(size());
  for (int b = 0; b < size(); ++b) {
    const int src = perm[b];
    out.obs.col(b) = obs.col(src);
    out.action.col(b) = action.col(src);
    out.next_obs.col(b) = next_obs.col(src);
    out.reward(b) = reward(src);
    out.not_done(b) = not_done(src);
    out.indices[b] = indices[src];
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim)
    : capacity_(capacity), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  if (obs_dim <= 0 || action_dim <= 0) throw std::invalid_argument("ReplayBuffer: dimensions must be positive");
}

void ReplayBuffer::push(std::span<const double> obs, std::span<const double> action, double reward,
                        std::span<const double> next_obs, bool done) {
  if (static_cast<int>(obs.size()) != obs_dim_ || static_cast<int>(next_obs.size()) != obs_dim_ ||
      static_cast<int>(action.size()) != action_dim_)
    throw std::invalid_argument("ReplayBuffer::push: transition shape mismatch");
  if (size_ < capacity_) {
    obs_.insert(obs_.end(), obs.begin(), obs.end());
    action_.insert(action_.end(), action.begin(), action.end());
    next_obs_.insert(next_obs_.end(), next_obs.begin(), next_obs.end());
    reward_.push_back(reward);
    not_done_.push_back(done ? 0.0 : 1.0);
    ++size_;
    return;
  }
  const std::size_t s = head_;
  std::copy(obs.begin(), obs.end(), obs_.begin() + s * obs_dim_);
  std::copy(action.begin(), action.end(), action_.begin() + s * action_dim_);
  std::copy(next_obs.begin(), next_obs.end(), next_obs_.begin() + s * obs_dim_);
  reward_[s] = reward;
  not_done_[s] = done ? 0.0 : 1.0;
  head_ = (head_ + 1) % capacity_;
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size == 0) throw std::invalid_argument("ReplayBuffer::sample: batch size must be positive");
  if (size_ < batch_size) throw std::logic_error("ReplayBuffer::sample: buffer holds fewer transitions than batch size");
  std::vector<std::size_t> slots(batch_size);
  for (auto& s : slots) s = uniform_index(rng, size_);
  return gather(slots);
}

Batch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
  const int n = static_cast<int>(slots.size());
  Batch b;
  b.obs.resize(obs_dim_, n);
  b.next_obs.resize(obs_dim_, n);
  b.action.resize(action_dim_, n);
  b.reward.resize(n);
  b.not_done.resize(n);
  b.indices.assign(slots.begin(), slots.end());
  for (int k = 0; k < n; ++k) {
    const std::size_t s = slots[k];
    if (s >= size_) throw std::out_of_range("ReplayBuffer::gather: slot out of range");
    std::copy_n(obs_.data() + s * obs_dim_, obs_dim_, b.obs.col(k).data());
    std::copy_n(next_obs_.data() + s * obs_dim_, obs_dim_, b.next_obs.col(k).data());
    std::copy_n(action_.data() + s * action_dim_, action_dim_, b.action.col(k).data());
    b.reward(k) = reward_[s];
    b.not_done(k) = not_done_[s];
  }
  return b;
}

std::size_t ReplayBuffer::slot_of_oldest(std::size_t k) const {
  if (k >= size_) throw std::out_of_range("ReplayBuffer: index out of range");
  return size_ < capacity_ ? k : (head_ + k) % capacity_;
}

Transition ReplayBuffer::oldest(std::size_t k) const {
  const std::size_t s = slot_of_oldest(k);
  Transition t;
  t.obs.assign(obs_.begin() + s * obs_dim_, obs_.begin() + (s + 1) * obs_dim_);
  t.next_obs.assign(next_obs_.begin() + s * obs_dim_, next_obs_.begin() + (s + 1) * obs_dim_);
  t.action.assign(action_.begin() + s * action_dim_, action_.begin() + (s + 1) * action_dim_);
  t.reward = reward_[s];
  t.done = not_done_[s] == 0.0;
  return t;
}

}  // namespace bisimkit

#pragma once

#include <span>
#include <vector>

#include "bisimkit/nn.hpp"
#include "bisimkit/random.hpp"

namespace bisimkit {

// Column-major minibatch: one transition per column.
struct Batch {
  nn::Matrix obs;
  nn::Matrix action;
  nn::Matrix next_obs;
  nn::Vector reward;
  nn::Vector not_done;
  std::vector<std::size_t> indices;  // storage slots the columns came from

  int size() const { return static_cast<int>(obs.cols()); }
  // Columns reordered so that column b of the result is column perm[b] here.
  Batch permuted(std::span<const int> perm) const;
};

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
};

// Ring buffer of transitions with FIFO eviction once full. Storage grows with
// use, so a large nominal capacity costs nothing until it is reached.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int action_dim);

  void push(std::span<const double> obs, std::span<const double> action, double reward,
            std::span<const double> next_obs, bool done);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }

  // Uniform sampling with replacement. Throws std::logic_error when fewer
  // than batch_size transitions are stored.
  Batch sample(std::size_t batch_size, Rng& rng) const;
  Batch gather(std::span<const std::size_t> slots) const;

  // k-th oldest stored transition.
  Transition oldest(std::size_t k) const;

 private:
  std::size_t slot_of_oldest(std::size_t k) const;

  std::size_t capacity_;
  int obs_dim_;
  int action_dim_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next slot to write once full
  std::vector<double> obs_, action_, next_obs_, reward_, not_done_;
};

}  // namespace bisimkit

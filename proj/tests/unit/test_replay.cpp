#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bisimkit/replay.hpp"

using namespace bisimkit;

namespace {

void push_scalar(ReplayBuffer& rb, double x, bool done = false) {
  std::vector<double> o{x}, a{x / 10}, n{x + 1};
  rb.push(o, a, x, n, done);
}

}  // namespace

TEST_SUITE("replay") {

TEST_CASE("FIFO eviction at capacity") {
  ReplayBuffer rb(2, 1, 1);
  push_scalar(rb, 1);
  push_scalar(rb, 2);
  push_scalar(rb, 3);
  CHECK(rb.size() == 2);
  CHECK(rb.oldest(0).reward == 2.0);
  CHECK(rb.oldest(1).reward == 3.0);
  push_scalar(rb, 4, true);
  CHECK(rb.oldest(0).reward == 3.0);
  CHECK(rb.oldest(1).done);
  CHECK(rb.oldest(1).next_obs[0] == 5.0);
}

TEST_CASE("sampling is seeded and requires enough data") {
  ReplayBuffer rb(100, 1, 1);
  push_scalar(rb, 0);
  Rng rng(1);
  CHECK_THROWS_AS(rb.sample(2, rng), std::logic_error);
  for (int i = 1; i < 50; ++i) push_scalar(rb, i, i % 7 == 0);
  Rng a(5), b(5);
  auto ba = rb.sample(16, a);
  auto bb = rb.sample(16, b);
  CHECK(ba.indices == bb.indices);
  CHECK(ba.obs == bb.obs);
  for (int k = 0; k < ba.size(); ++k) {
    CHECK(ba.reward(k) == ba.obs(0, k));
    CHECK(ba.next_obs(0, k) == ba.obs(0, k) + 1);
    CHECK(ba.not_done(k) == (static_cast<int>(ba.reward(k)) % 7 == 0 && ba.reward(k) > 0 ? 0.0 : 1.0));
  }
}

TEST_CASE("uniform sampling frequencies") {
  ReplayBuffer rb(10, 1, 1);
  for (int i = 0; i < 10; ++i) push_scalar(rb, i);
  Rng rng(123);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int draw = 0; draw < n / 10; ++draw)
    for (auto idx : rb.sample(10, rng).indices) ++counts[idx];
  const double expected = n / 10.0;
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  double chi2 = 0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) <= 3 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 27.88);  // 99.9% quantile, 9 dof
}

TEST_CASE("push validates shapes") {
  ReplayBuffer rb(4, 2, 1);
  std::vector<double> o{1}, a{0}, n{1, 2};
  CHECK_THROWS_AS(rb.push(o, a, 0, n, false), std::invalid_argument);
  CHECK_THROWS_AS(ReplayBuffer(0, 1, 1), std::invalid_argument);
}

TEST_CASE("batch permutation keeps the multiset") {
  ReplayBuffer rb(8, 1, 1);
  for (int i = 0; i < 8; ++i) push_scalar(rb, i);
  Rng rng(3);
  auto b = rb.sample(6, rng);
  std::vector<int> perm{5, 4, 3, 2, 1, 0};
  auto p = b.permuted(perm);
  for (int k = 0; k < 6; ++k) CHECK(p.reward(k) == b.reward(5 - k));
}

}

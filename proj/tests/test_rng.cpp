#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "kipkit/rng.hpp"

using kipkit::RngStream;

TEST(rng, identical_seeds_give_identical_streams) {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(rng, different_seeds_diverge) {
  RngStream a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++same;
  EXPECT_EQ(same, 0);
}

TEST(rng, copies_carry_full_state) {
  RngStream a(9);
  for (int i = 0; i < 17; ++i) a.uniform01();
  RngStream b = a;
  for (int i = 0; i < 50; ++i) EXPECT_DOUBLE_EQ(a.uniform01(), b.uniform01());
}

TEST(rng, uniform01_range_and_mean) {
  RngStream rng(5);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(rng, uniform_respects_bounds) {
  RngStream rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-0.12, 0.12);
    ASSERT_GE(v, -0.12);
    ASSERT_LT(v, 0.12);
  }
}

TEST(rng, normal_moments) {
  RngStream rng(8);
  const int n = 40000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.standard_normal();
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}

TEST(rng, index_bounds_and_coverage) {
  RngStream rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.index(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(rng.index(0), kipkit::InvalidParam);
}

TEST(rng, permutation_is_a_permutation) {
  RngStream rng(13);
  auto p = rng.permutation(50);
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(p, sorted);  // astronomically unlikely to be identity
}

TEST(rng, shuffle_preserves_elements) {
  RngStream rng(14);
  std::vector<int> v(30);
  std::iota(v.begin(), v.end(), 0);
  std::vector<int> orig = v;
  rng.shuffle(v);
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, orig);
}

TEST(rng, sample_without_replacement_unique_and_in_range) {
  RngStream rng(15);
  auto s = rng.sample_without_replacement(20, 8);
  EXPECT_EQ(s.size(), 8u);
  std::set<std::size_t> uniq(s.begin(), s.end());
  EXPECT_EQ(uniq.size(), 8u);
  for (auto i : s) EXPECT_LT(i, 20u);
  EXPECT_THROW(rng.sample_without_replacement(3, 4), kipkit::InvalidParam);
}

TEST(rng, forks_are_independent_and_reproducible) {
  RngStream base(21);
  RngStream f1 = base.fork(1);
  RngStream f2 = base.fork(2);
  RngStream f1_again = RngStream(21).fork(1);
  EXPECT_NE(f1.next_u64(), f2.next_u64());
  RngStream f1_fresh = RngStream(21).fork(1);
  EXPECT_EQ(f1_fresh.next_u64(), f1_again.next_u64());
}

TEST(rng, batch_draw_helpers_match_scalar_draws) {
  RngStream a(33), b(33);
  auto u = a.uniform01_draws(5);
  for (double v : u) EXPECT_DOUBLE_EQ(v, b.uniform01());
  auto z = a.normal_draws(4);
  for (double v : z) EXPECT_DOUBLE_EQ(v, b.standard_normal());
}

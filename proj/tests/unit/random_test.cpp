// Copyright 2026 The aflm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "aflm/random.hpp"

namespace {

using aflm::Rng;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DifferentSeedsDiverge) {
  Rng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_LT(equal, 2);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.uniform_index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  // Each bucket is Binomial(n, 1/7); 5 sigma is about 460.
  for (const int c : counts) EXPECT_NEAR(c, n / 7.0, 460.0);
}

TEST(Rng, UniformIndexOfOneIsZero) {
  Rng r(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(r.uniform_index(1), 0u);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Rng, StateRoundTripResumesExactly) {
  Rng r(5);
  for (int i = 0; i < 17; ++i) r.normal();  // leaves a cached spare
  const auto saved = r.state();
  std::vector<double> expected;
  for (int i = 0; i < 50; ++i) expected.push_back(r.normal());
  Rng restored(999);
  restored.set_state(saved);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(restored.normal(), expected[static_cast<std::size_t>(i)]);
  EXPECT_EQ(restored.state(), r.state());
}

TEST(MixSeed, DistinctInputsDistinctOutputs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a) {
    for (std::uint64_t b = 0; b < 50; ++b) seen.insert(aflm::mix_seed(a, b));
  }
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_NE(aflm::mix_seed(1, 2), aflm::mix_seed(2, 1));
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(aflm::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(aflm::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(aflm::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

}  // namespace

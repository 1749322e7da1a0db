// Copyright 2026 The lowshot Authors
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

#include <set>

#include "lowshot/common.hpp"

namespace {

using lowshot::Rng;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next(), b.next());
    EXPECT_EQ(a.normal(), b.normal());
  }
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(7);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::size_t v = rng.uniform_index(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_EQ(rng.uniform_index(1), 0u);
  EXPECT_EQ(rng.uniform_index(0), 0u);
}

TEST(Rng, UniformIsHalfOpen) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(MixSeed, ChildSeedsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(lowshot::mix_seed(a, b));
  }
  EXPECT_EQ(seen.size(), 400u);
}

// Published FNV-1a 64-bit test vectors.
TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(lowshot::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(lowshot::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(lowshot::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Format, TrimmedDropsTrailingZeros) {
  EXPECT_EQ(lowshot::format_trimmed(89.10, 2), "89.1");
  EXPECT_EQ(lowshot::format_trimmed(48.72, 2), "48.72");
  EXPECT_EQ(lowshot::format_trimmed(91.0, 2), "91");
  EXPECT_EQ(lowshot::format_trimmed(100.0 * 76 / 156, 2), "48.72");
  EXPECT_EQ(lowshot::format_trimmed(0.0, 2), "0");
  EXPECT_EQ(lowshot::format_fixed(1.005, 1), "1.0");
}

TEST(Format, Hex64IsFixedWidth) {
  EXPECT_EQ(lowshot::hex64(0), "0000000000000000");
  EXPECT_EQ(lowshot::hex64(0xdeadbeefULL), "00000000deadbeef");
}

TEST(TextFile, RoundTrip) {
  const std::string path = ::testing::TempDir() + "/lowshot_text_roundtrip.txt";
  lowshot::write_text_file(path, "line one\nline two\n");
  EXPECT_EQ(lowshot::read_text_file(path), "line one\nline two\n");
  EXPECT_THROW(lowshot::read_text_file(path + ".missing"), lowshot::Error);
}

}  // namespace

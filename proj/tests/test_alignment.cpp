// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lipspeech/alignment.hpp"
#include "lipspeech/error.hpp"
#include "lipspeech/ops.hpp"
#include "test_util.hpp"

using namespace lipspeech;

TEST_CASE("30 fps to 80 Hz interleaves 3, 3, 2") {
  DuplicationPlan plan = duplication_counts(9, 30.0, 80.0);
  CHECK(plan.counts == std::vector<Index>{3, 3, 2, 3, 3, 2, 3, 3, 2});
  CHECK(plan.total == 24);
  CHECK(duplication_counts(90, 30.0, 80.0).total == 240);
}

TEST_CASE("integer duplication factor repeats uniformly") {
  DuplicationPlan plan = duplication_counts(50, 25.0, 100.0);
  for (Index c : plan.counts) CHECK(c == 4);
  CHECK(plan.total == 200);
}

TEST_CASE("random rates satisfy the sum law and the floor/ceil bound") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> fps_d(5.0, 60.0), ratio_d(1.0, 12.0);
  std::uniform_int_distribution<Index> t_d(1, 600);
  for (int trial = 0; trial < 1000; ++trial) {
    const double fps = fps_d(rng), aud = fps * ratio_d(rng);
    const Index t = t_d(rng);
    DuplicationPlan plan = duplication_counts(t, fps, aud);
    const double d = aud / fps;
    const long double exact = static_cast<long double>(t) * aud / fps;
    CHECK(plan.total == static_cast<Index>(std::ceil(exact)));
    Index sum = 0, lo = plan.counts[0], hi = plan.counts[0];
    for (Index c : plan.counts) {
      sum += c;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      CHECK((c == static_cast<Index>(std::floor(d)) || c == static_cast<Index>(std::ceil(d))));
    }
    CHECK(sum == plan.total);
    CHECK(hi - lo <= 1);
    const std::vector<Index> src = plan.source_index();
    CHECK(static_cast<Index>(src.size()) == plan.total);
    CHECK(std::is_sorted(src.begin(), src.end()));
    CHECK(src.front() == 0);
    CHECK(src.back() == t - 1);
    CHECK(std::adjacent_find(src.begin(), src.end(), [](Index a, Index b) { return b > a + 1; }) == src.end());
  }
}

TEST_CASE("align duplicates rows") {
  std::mt19937_64 rng(3);
  Tensor f = testing::random_tensor({90, 16}, rng);
  DuplicationPlan plan = duplication_counts(90, 30.0, 80.0);
  Tensor a = align(f, plan);
  REQUIRE(a.shape() == Shape{240, 16});
  const std::vector<Index> src = plan.source_index();
  for (Index j = 0; j < 240; ++j)
    for (Index c = 0; c < 16; ++c) CHECK(a.values()[static_cast<std::size_t>(j * 16 + c)] == f.values()[static_cast<std::size_t>(src[static_cast<std::size_t>(j)] * 16 + c)]);

  DuplicationPlan ones{{1, 1, 1, 1}, 4};
  Tensor g = testing::random_tensor({4, 3}, rng);
  CHECK(align(g, ones).values() == g.values());

  DuplicationPlan five{{5}, 5};
  Tensor one = testing::random_tensor({1, 7}, rng);
  Tensor five_rows = align(one, five);
  REQUIRE(five_rows.dim(0) == 5);
  for (Index r = 0; r < 5; ++r)
    for (Index c = 0; c < 7; ++c) CHECK(five_rows.values()[static_cast<std::size_t>(r * 7 + c)] == one.values()[static_cast<std::size_t>(c)]);
}

TEST_CASE("align gradient accumulates over duplicated rows") {
  std::mt19937_64 rng(4);
  Tensor f = testing::random_tensor({9, 5}, rng, 1.0, true);
  DuplicationPlan plan = duplication_counts(9, 30.0, 80.0);
  Tensor w = testing::random_tensor({plan.total, 5}, rng);
  CHECK(testing::gradient_check([&] { return ops::sum(ops::mul(align(f, plan), w)); }, {f}) < 1e-7);
}

TEST_CASE("alignment errors") {
  CHECK_THROWS_AS(duplication_counts(10, 0.0, 80.0), ConfigError);
  CHECK_THROWS_AS(duplication_counts(10, 30.0, -1.0), ConfigError);
  CHECK_THROWS_AS(duplication_counts(0, 30.0, 80.0), ConfigError);
  CHECK_THROWS_AS(duplication_counts(10, 30.0, 20.0), ConfigError);
  Tensor f({3, 2});
  CHECK_THROWS_AS(align(f, duplication_counts(4, 30.0, 80.0)), InternalError);
}

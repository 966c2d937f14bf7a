// Copyright 2026 The BSConv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "bsconv/conv_ops.hpp"
#include "bsconv/parallel.hpp"
#include "bsconv/rng.hpp"
#include "bsconv/tensor.hpp"
#include "reference.hpp"

namespace bsconv {
namespace {

// Values from tests/oracles/xoshiro_fixture.py.
TEST(Rng, MatchesReferenceStream) {
  Rng a(0);
  EXPECT_EQ(a.next(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(a.next(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(a.next(), 0x1a5f849d4933e6e0ULL);
  EXPECT_EQ(a.next(), 0x6aa594f1262d2d2cULL);
  Rng b(42);
  EXPECT_EQ(b.next(), 0x15780b2e0c2ec716ULL);
  EXPECT_EQ(b.next(), 0x6104d9866d113a7eULL);
}

TEST(Rng, BelowStaysInRange) {
  Rng r(7);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = r.below(5);
    ASSERT_LT(v, 5u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, NormalMoments) {
  Rng r(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  // 5 sigma bounds on the sample mean and variance.
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<float>({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{}), ShapeError);
  EXPECT_THROW(Tensor<float>({1, 1, 1, 1, 1}), ShapeError);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  Tensor<double> t({2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t(1, 2, 3), 23.0);
  EXPECT_EQ(t(0, 1, 0), 4.0);
  EXPECT_EQ(t(1, 0, 0), 12.0);
  const auto r = t.reshaped({6, 4});
  EXPECT_EQ(r(5, 3), 23.0);
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
}

TEST(Tensor, CastRoundTrip) {
  const auto a = Tensor<float>::random_normal({3, 5}, 11, 1.0f);
  EXPECT_EQ(a.cast<double>().cast<float>(), a);
}

TEST(Tensor, RandomNormalIsSeeded) {
  EXPECT_EQ(Tensor<double>::random_normal({4, 4}, 5, 1.0), Tensor<double>::random_normal({4, 4}, 5, 1.0));
  EXPECT_NE(Tensor<double>::random_normal({4, 4}, 5, 1.0), Tensor<double>::random_normal({4, 4}, 6, 1.0));
}

TEST(Tensor, MatmulAndTranspose) {
  const auto a = Tensor<double>::random_normal({5, 7}, 1, 1.0);
  const auto b = Tensor<double>::random_normal({7, 3}, 2, 1.0);
  EXPECT_LT(relative_error(matmul(a, b), ref::mat(a, b)), 1e-14);
  const auto at = transpose(a);
  ASSERT_EQ(at.shape(), (Shape{7, 5}));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(at(j, i), a(i, j));
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Tensor, RelativeErrorIsNormwise) {
  Tensor<double> ref_t({3}, 0.0);
  ref_t[0] = 10.0;
  Tensor<double> got = ref_t;
  got[2] = 1e-3;  // large elementwise error on a zero entry, tiny normwise
  EXPECT_NEAR(relative_error(got, ref_t), 1e-4, 1e-18);
  EXPECT_EQ(relative_error(Tensor<double>({2}), Tensor<double>({2})), 0.0);
}

TEST(Parallel, ResultIndependentOfThreadCount) {
  const auto u = Tensor<float>::random_normal({16, 24, 24}, 1, 1.0f);
  const auto f = Tensor<float>::random_normal({32, 16, 3, 3}, 2, 1.0f);
  set_thread_count(1);
  const auto serial = conv2d_standard(u, f, ConvGeometry::same(3));
  set_thread_count(4);
  const auto threaded = conv2d_standard(u, f, ConvGeometry::same(3));
  set_thread_count(1);
  EXPECT_EQ(serial, threaded);
}

}  // namespace
}  // namespace bsconv

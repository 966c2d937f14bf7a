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

#include "bsconv/blueprint_conv.hpp"
#include "bsconv/rng.hpp"
#include "reference.hpp"

namespace bsconv {
namespace {

using T64 = Tensor<double>;

TEST(SubspaceSize, CeilWithIntegerSnapping) {
  EXPECT_EQ(subspace_size(1.0 / 6.0, 128), 22u);
  EXPECT_EQ(subspace_size(1.0 / 6.0, 12), 2u);  // 12/6 is integral despite rounding in 1/6
  EXPECT_EQ(subspace_size(1.0 / 6.0, 7), 2u);
  EXPECT_EQ(subspace_size(1.0 / 6.0, 1), 1u);
  EXPECT_EQ(subspace_size(1.0 / 3.0, 7), 3u);
  EXPECT_EQ(subspace_size(1.0 / 3.0, 9), 3u);
  EXPECT_EQ(subspace_size(0.5, 3), 2u);
  EXPECT_EQ(subspace_size(1.0, 5), 5u);
  EXPECT_THROW(subspace_size(0.0, 5), std::invalid_argument);
  EXPECT_THROW(subspace_size(1.5, 5), std::invalid_argument);
}

TEST(Params, ValidateShapes) {
  BsconvUParams<double> u{T64({4, 3, 3}), T64({4, 5})};
  EXPECT_NO_THROW(u.validate());
  EXPECT_EQ(u.param_count(), 4u * 9 + 4 * 5);
  u.weights = T64({3, 5});
  EXPECT_THROW(u.validate(), ShapeError);
  BsconvUParams<double> even{T64({4, 2, 2}), T64({4, 5})};
  EXPECT_ANY_THROW(even.validate());

  BsconvSParams<double> s{T64({4, 3, 3}), T64({4, 2}), T64({2, 12}), 1.0 / 6.0};
  EXPECT_NO_THROW(s.validate());
  s.ratio = 1.0 / 3.0;  // would need M' = 4
  EXPECT_ANY_THROW(s.validate());
}

TEST(Materialize, UIsOuterProduct) {
  const auto p = BsconvUParams<double>::init(5, 4, 3, 1);
  EXPECT_EQ(materialize_u(p), ref::outer_kernels(p.weights, p.blueprints));
}

TEST(Materialize, SUsesProductWeights) {
  const auto p = BsconvSParams<double>::init(12, 4, 3, 1.0 / 6.0, 2);
  ASSERT_EQ(p.subspace_channels(), 2u);
  const auto expected = ref::outer_kernels(ref::mat(p.weights_a, p.weights_b), p.blueprints);
  EXPECT_LT(relative_error(materialize_s(p), expected), 1e-15);
}

TEST(Materialize, CrossKernelIndexesBlueprintByInputChannel) {
  const auto w = T64::random_normal({3, 4}, 1, 1.0);
  const auto b = T64::random_normal({4, 3, 3}, 2, 1.0);
  const auto f = cross_kernel_materialize(w, b);
  ASSERT_EQ(f.shape(), (Shape{3, 4, 3, 3}));
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t m = 0; m < 4; ++m)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f(n, m, i, j), w(n, m) * b(m, i, j));
}

TEST(Forward, MatchesMaterializedReference) {
  Rng r(9);
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = 1 + r.below(12), n = 1 + r.below(12), k = 1 + 2 * r.below(3);
    const std::size_t stride = 1 + r.below(2), y = 1 + r.below(10), x = 1 + r.below(10);
    const auto g = ConvGeometry::same(k, stride);
    const auto u = T64::random_normal({m, y, x}, r.next(), 1.0);
    const auto pu = BsconvUParams<double>::init(m, n, k, r.next());
    EXPECT_LT(relative_error(bsconv_u_forward(u, pu, g),
                             ref::conv(u, ref::outer_kernels(pu.weights, pu.blueprints), stride, g.padding)),
              1e-12);
    const auto ps = BsconvSParams<double>::init(m, n, k, 1.0 / 3.0, r.next());
    const auto fs = ref::outer_kernels(ref::mat(ps.weights_a, ps.weights_b), ps.blueprints);
    EXPECT_LT(relative_error(bsconv_s_forward(u, ps, g), ref::conv(u, fs, stride, g.padding)), 1e-12);
  }
}

TEST(Forward, DefaultGeometryIsSame) {
  const auto u = T64::random_normal({3, 6, 6}, 1, 1.0);
  const auto p = BsconvUParams<double>::init(3, 2, 5, 2);
  EXPECT_EQ(bsconv_u_forward(u, p), bsconv_u_forward(u, p, ConvGeometry::same(5)));
  EXPECT_EQ(bsconv_u_forward(u, p).shape(), (Shape{2, 6, 6}));
}

TEST(Init, VarianceAndOrthonormality) {
  const std::size_t m = 64, n = 64, k = 3;
  const auto p = BsconvUParams<double>::init(m, n, k, 3);
  const auto var = [](const T64& t) { return dot(t, t) / static_cast<double>(t.size()); };
  EXPECT_NEAR(var(p.blueprints), 2.0 / 9.0, 0.2 * 2.0 / 9.0);
  EXPECT_NEAR(var(p.weights), 1.0 / m, 0.1 / m);
  EXPECT_NEAR(var(materialize_u(p)), 2.0 / (9.0 * m), 0.25 * 2.0 / (9.0 * m));

  const auto s = BsconvSParams<float>::init(m, n, k, 1.0 / 6.0, 4);
  EXPECT_EQ(s.weights_b.shape(), (Shape{11, 64}));
  EXPECT_LT(ortho_loss(s.weights_b), 1e-5);
  EXPECT_NE(BsconvUParams<double>::init(m, n, k, 3).weights, BsconvUParams<double>::init(m, n, k, 4).weights);
}

TEST(Backward, BsconvUMatchesFiniteDifferences) {
  const auto g = ConvGeometry::same(3, 2);
  const auto u = T64::random_normal({4, 7, 6}, 1, 1.0);
  auto p = BsconvUParams<double>::init(4, 3, 3, 2);
  const auto probe = T64::random_normal(bsconv_u_forward(u, p, g).shape(), 3, 1.0);
  const auto grads = bsconv_u_backward(u, p, g, probe);
  const auto loss = [&](const BsconvUParams<double>& q, const T64& x) { return dot(bsconv_u_forward(x, q, g), probe); };
  EXPECT_LT(relative_error(grads.d_input, ref::numeric_gradient(u, [&](const T64& x) { return loss(p, x); })), 1e-8);
  EXPECT_LT(relative_error(grads.d_blueprints, ref::numeric_gradient(p.blueprints,
                                                                     [&](const T64& b) {
                                                                       return loss({b, p.weights}, u);
                                                                     })),
            1e-8);
  EXPECT_LT(relative_error(grads.d_weights, ref::numeric_gradient(p.weights,
                                                                  [&](const T64& w) {
                                                                    return loss({p.blueprints, w}, u);
                                                                  })),
            1e-8);
}

TEST(Backward, BsconvSMatchesFiniteDifferences) {
  const auto g = ConvGeometry::same(3);
  const auto u = T64::random_normal({6, 5, 5}, 1, 1.0);
  const auto p = BsconvSParams<double>::init(6, 4, 3, 1.0 / 3.0, 2);
  const auto probe = T64::random_normal(bsconv_s_forward(u, p, g).shape(), 3, 1.0);
  const auto grads = bsconv_s_backward(u, p, g, probe);
  const auto loss = [&](BsconvSParams<double> q, const T64& x) { return dot(bsconv_s_forward(x, q, g), probe); };
  auto with = [&](auto member) {
    return [&, member](const T64& v) {
      auto q = p;
      q.*member = v;
      return loss(q, u);
    };
  };
  EXPECT_LT(relative_error(grads.d_input, ref::numeric_gradient(u, [&](const T64& x) { return loss(p, x); })), 1e-8);
  EXPECT_LT(relative_error(grads.d_blueprints,
                           ref::numeric_gradient(p.blueprints, with(&BsconvSParams<double>::blueprints))),
            1e-8);
  EXPECT_LT(relative_error(grads.d_weights_a, ref::numeric_gradient(p.weights_a, with(&BsconvSParams<double>::weights_a))),
            1e-8);
  EXPECT_LT(relative_error(grads.d_weights_b, ref::numeric_gradient(p.weights_b, with(&BsconvSParams<double>::weights_b))),
            1e-8);
}

TEST(OrthoLoss, ZeroOnOrthonormalRows) {
  T64 w({2, 5});
  w(0, 3) = 1.0;
  w(1, 1) = -1.0;
  EXPECT_EQ(ortho_loss(w), 0.0);
  EXPECT_EQ(max_abs(ortho_loss_grad(w)), 0.0);
  EXPECT_EQ(ortho_loss(identity<double>(4)), 0.0);
}

TEST(OrthoLoss, HandValue) {
  // (2I)(2I)^T - I = 3I, Frobenius norm 3*sqrt(2) for a 2x2 identity.
  EXPECT_NEAR(ortho_loss(scaled(identity<double>(2), 2.0)), 3.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(ortho_loss(scaled(identity<float>(2), 2.0f)), 3.0 * std::sqrt(2.0), 1e-6);
}

TEST(OrthoLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto w = T64::random_normal({3, 7}, seed, 0.5);
    const auto numeric = ref::numeric_gradient(w, [](const T64& x) { return ortho_loss(x); });
    EXPECT_LT(relative_error(ortho_loss_grad(w), numeric), 1e-8);
  }
}

TEST(OrthoLoss, MatchesDirectFormula) {
  const auto w = T64::random_normal({4, 9}, 3, 1.0);
  const auto g = ref::mat(w, transpose(w));
  EXPECT_NEAR(ortho_loss(w), ref::frobenius(add(g, scaled(identity<double>(4), -1.0))), 1e-12);
}

TEST(Orthonormalize, RowsBecomeOrthonormal) {
  auto w = T64::random_normal({5, 8}, 2, 3.0);
  orthonormalize_rows(w);
  EXPECT_LT(ortho_loss(w), 1e-12);
  T64 dependent({2, 3});
  dependent(0, 0) = dependent(1, 0) = 1.0;
  EXPECT_ANY_THROW(orthonormalize_rows(dependent));
}

}  // namespace
}  // namespace bsconv

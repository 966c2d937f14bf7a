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

#include "bsconv/blueprint_conv.hpp"
#include "bsconv/complexity.hpp"
#include "bsconv/conv_ops.hpp"
#include "bsconv/model.hpp"
#include "bsconv/rng.hpp"
#include "reference.hpp"

namespace bsconv {
namespace {

using T64 = Tensor<double>;

LayerSpec conv_spec(LayerKind kind, std::size_t m, std::size_t n, std::size_t k, std::size_t stride = 1,
                    double p = 1.0 / 6.0) {
  return LayerSpec{.kind = kind, .in_channels = m, .out_channels = n, .kernel = k, .stride = stride, .p = p};
}

TEST(CountParams, ClosedFormHandValues) {
  EXPECT_EQ(count_params(conv_spec(LayerKind::kStandardConv, 128, 128, 3)), 147456u);
  EXPECT_EQ(count_params(conv_spec(LayerKind::kBsconvU, 128, 128, 3)), 17536u);
  EXPECT_EQ(count_params(conv_spec(LayerKind::kBsconvS, 128, 128, 3)), 6784u);
  EXPECT_EQ(count_params(conv_spec(LayerKind::kDsc, 128, 64, 3)), 128u * 9 + 128 * 64);
  EXPECT_EQ(count_params(conv_spec(LayerKind::kPointwise, 7, 5, 1)), 35u);
  EXPECT_EQ(count_params(conv_spec(LayerKind::kDepthwise, 7, 7, 5)), 175u);
  EXPECT_EQ(count_params(conv_spec(LayerKind::kLinear, 10, 4, 1)), 44u);
  EXPECT_EQ(count_params(LayerSpec{.kind = LayerKind::kRelu}), 0u);
  EXPECT_EQ(count_params(LayerSpec{.kind = LayerKind::kGlobalAvgPool}), 0u);
}

// Allocated-scalar audit: the model builder's parameter tensors hold exactly
// count_params scalars for every kind.
TEST(CountParams, MatchesAllocatedScalars) {
  Rng r(17);
  const LayerKind kinds[] = {LayerKind::kStandardConv, LayerKind::kPointwise, LayerKind::kDepthwise,
                             LayerKind::kDsc,          LayerKind::kBsconvU,   LayerKind::kBsconvS};
  const double ratios[] = {1.0 / 6.0, 1.0 / 3.0, 0.5, 1.0};
  for (int t = 0; t < 100; ++t) {
    for (LayerKind kind : kinds) {
      const std::size_t m = 1 + r.below(40), k = 1 + 2 * r.below(3);
      const std::size_t n = kind == LayerKind::kDepthwise ? m : 1 + r.below(40);
      const LayerSpec spec = conv_spec(kind, m, n, kind == LayerKind::kPointwise ? 1 : k, 1, ratios[t % 4]);
      const std::vector<LayerSpec> body{spec};
      const auto model = Model<float>::build(body, {m, 5, 5}, 3, static_cast<std::uint64_t>(t));
      std::size_t allocated = 0;
      for (const auto& p : model.layers()[0].params) allocated += p.value.size();
      EXPECT_EQ(allocated, count_params(spec)) << layer_kind_name(kind) << " M=" << m << " N=" << n;
      std::size_t head = 0;
      for (const auto& p : model.layers().back().params) head += p.value.size();
      EXPECT_EQ(head, count_params(conv_spec(LayerKind::kLinear, n, 3, 1)));
    }
  }
}

// Instrumented reference forward: performs the arithmetic of each stage
// with explicit loops over every tap (padding included) and counts the
// multiplies. The result must also equal the library forward pass.
struct Counted {
  T64 out;
  std::uint64_t macs = 0;
};

Counted counted_conv(const T64& u, const T64& f, std::size_t stride, std::size_t pad, bool diagonal) {
  const T64 p = ref::padded(u, pad);
  const std::size_t n = f.extent(0), m = u.extent(0), k = f.extent(2);
  const std::size_t oy = (p.extent(1) - k) / stride + 1, ox = (p.extent(2) - k) / stride + 1;
  Counted c{T64({n, oy, ox}), 0};
  for (std::size_t o = 0; o < n; ++o)
    for (std::size_t y = 0; y < oy; ++y)
      for (std::size_t x = 0; x < ox; ++x)
        for (std::size_t ch = 0; ch < m; ++ch) {
          if (diagonal && ch != o) continue;
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              c.out(o, y, x) += p(ch, y * stride + i, x * stride + j) * f(o, diagonal ? 0 : ch, i, j);
              ++c.macs;
            }
        }
  return c;
}

Counted counted_pointwise(const T64& u, const T64& w) {
  return counted_conv(u, w.reshaped({w.extent(0), w.extent(1), 1, 1}), 1, 0, false);
}

Counted counted_depthwise(const T64& u, const T64& b, std::size_t stride, std::size_t pad) {
  return counted_conv(u, b.reshaped({b.extent(0), 1, b.extent(1), b.extent(2)}), stride, pad, true);
}

TEST(CountMacs, MatchesInstrumentedForward) {
  Rng r(23);
  for (int t = 0; t < 25; ++t) {
    const std::size_t m = 1 + r.below(6), n = 1 + r.below(6), k = 1 + 2 * r.below(3);
    const std::size_t stride = 1 + r.below(2), y = 1 + r.below(8), x = 1 + r.below(8);
    const ConvGeometry g = ConvGeometry::same(k, stride);
    const Shape in{m, y, x};
    const auto u = T64::random_normal(in, r.next(), 1.0);

    const auto f = T64::random_normal({n, m, k, k}, r.next(), 1.0);
    const auto cs = counted_conv(u, f, stride, g.padding, false);
    EXPECT_LT(relative_error(cs.out, conv2d_standard(u, f, g)), 1e-12);
    EXPECT_EQ(cs.macs, count_macs(conv_spec(LayerKind::kStandardConv, m, n, k, stride), in));

    const auto w = T64::random_normal({n, m}, r.next(), 1.0);
    const auto cp = counted_pointwise(u, w);
    EXPECT_LT(relative_error(cp.out, conv2d_pointwise(u, w)), 1e-12);
    EXPECT_EQ(cp.macs, count_macs(conv_spec(LayerKind::kPointwise, m, n, 1), in));

    const auto bm = T64::random_normal({m, k, k}, r.next(), 1.0);
    const auto cd = counted_depthwise(u, bm, stride, g.padding);
    EXPECT_LT(relative_error(cd.out, conv2d_depthwise(u, bm, g)), 1e-12);
    EXPECT_EQ(cd.macs, count_macs(conv_spec(LayerKind::kDepthwise, m, m, k, stride), in));

    const auto dsc2 = counted_pointwise(cd.out, w);
    EXPECT_LT(relative_error(dsc2.out, dsc_block(u, bm, w, g)), 1e-12);
    EXPECT_EQ(cd.macs + dsc2.macs, count_macs(conv_spec(LayerKind::kDsc, m, n, k, stride), in));

    const auto pu = BsconvUParams<double>::init(m, n, k, r.next());
    const auto u1 = counted_pointwise(u, pu.weights);
    const auto u2 = counted_depthwise(u1.out, pu.blueprints, stride, g.padding);
    EXPECT_LT(relative_error(u2.out, bsconv_u_forward(u, pu, g)), 1e-12);
    EXPECT_EQ(u1.macs + u2.macs, count_macs(conv_spec(LayerKind::kBsconvU, m, n, k, stride), in));

    const auto ps = BsconvSParams<double>::init(m, n, k, 1.0 / 3.0, r.next());
    const auto s1 = counted_pointwise(u, ps.weights_b);
    const auto s2 = counted_pointwise(s1.out, ps.weights_a);
    const auto s3 = counted_depthwise(s2.out, ps.blueprints, stride, g.padding);
    EXPECT_LT(relative_error(s3.out, bsconv_s_forward(u, ps, g)), 1e-12);
    EXPECT_EQ(s1.macs + s2.macs + s3.macs,
              count_macs(conv_spec(LayerKind::kBsconvS, m, n, k, stride, 1.0 / 3.0), in));
  }
}

TEST(CountMacs, HandValues) {
  EXPECT_EQ(count_macs(conv_spec(LayerKind::kStandardConv, 1, 1, 1), {1, 1, 1}), 1u);
  const Shape in{128, 32, 32};
  const auto std_macs = count_macs(conv_spec(LayerKind::kStandardConv, 128, 128, 3), in);
  const auto u_macs = count_macs(conv_spec(LayerKind::kBsconvU, 128, 128, 3), in);
  EXPECT_EQ(std_macs, 147456u * 1024);
  // Ratio equals 17536 / 147456 exactly.
  EXPECT_EQ(u_macs * 147456u, std_macs * 17536u);
  EXPECT_EQ(count_macs(conv_spec(LayerKind::kLinear, 10, 4, 1), {10}), 40u);
  EXPECT_EQ(count_macs(LayerSpec{.kind = LayerKind::kRelu}, in), 0u);
  EXPECT_EQ(count_macs(LayerSpec{.kind = LayerKind::kGlobalAvgPool}, in), 0u);
}

TEST(ModelCosts, ShapesAndErrors) {
  const std::vector<LayerSpec> model{conv_spec(LayerKind::kStandardConv, 3, 8, 3),
                                     LayerSpec{.kind = LayerKind::kRelu},
                                     conv_spec(LayerKind::kBsconvU, 8, 16, 3, 2),
                                     LayerSpec{.kind = LayerKind::kGlobalAvgPool},
                                     conv_spec(LayerKind::kLinear, 16, 10, 1)};
  const auto costs = model_costs(model, {3, 16, 16});
  ASSERT_EQ(costs.size(), 5u);
  EXPECT_EQ(costs[2].output_shape, (Shape{16, 8, 8}));
  EXPECT_EQ(costs[3].output_shape, (Shape{16}));
  EXPECT_EQ(costs[4].output_shape, (Shape{10}));
  std::uint64_t sum = 0;
  for (const auto& c : costs) sum += c.params;
  EXPECT_EQ(sum, total_params(model));

  std::vector<LayerSpec> bad = model;
  bad[2].in_channels = 7;
  try {
    model_costs(bad, {3, 16, 16});
    FAIL() << "expected SpecError";
  } catch (const SpecError& e) {
    EXPECT_EQ(e.field().rfind("layers[2]", 0), 0u) << e.field();
  }
  bad = model;
  bad[0].kernel = 4;
  try {
    model_costs(bad, {3, 16, 16});
    FAIL() << "expected SpecError";
  } catch (const SpecError& e) {
    EXPECT_EQ(e.field(), "layers[0].kernel");
  }
  EXPECT_TRUE(model_costs(std::vector<LayerSpec>{}, {1, 1, 1}).empty());
}

TEST(Savings, MonotoneAcrossSweep) {
  for (std::size_t k : {3u, 5u, 7u}) {
    for (std::size_t m = 1; m <= 64; ++m) {
      for (std::size_t n : {1u, 8u, 64u}) {
        const auto s = count_params(conv_spec(LayerKind::kStandardConv, m, n, k));
        const auto u = count_params(conv_spec(LayerKind::kBsconvU, m, n, k));
        const double k2 = static_cast<double>(k * k);
        if (static_cast<double>(m) > k2 / (k2 - 1.0)) EXPECT_LT(u, s) << m << ' ' << n << ' ' << k;
        const auto sub = subspace_size(1.0 / 6.0, m);
        const auto sp = count_params(conv_spec(LayerKind::kBsconvS, m, n, k));
        if (sub * (n + m) <= n * m) EXPECT_LE(sp, u);
      }
    }
  }
}

TEST(MatchWidth, SameKindAndSingletonGrid) {
  const std::vector<LayerSpec> base{conv_spec(LayerKind::kStandardConv, 3, 16, 3),
                                    conv_spec(LayerKind::kStandardConv, 16, 32, 3)};
  const std::vector<double> grid{0.5, 0.75, 1.0, 1.25, 2.0};
  EXPECT_EQ(match_width(base, LayerKind::kStandardConv, grid), 1.0);
  const std::vector<double> one{1.0};
  EXPECT_EQ(match_width(base, LayerKind::kBsconvU, one), 1.0);
  EXPECT_THROW(match_width(base, LayerKind::kBsconvU, std::vector<double>{}), std::invalid_argument);
}

// Single standard layer M=N=128, K=3 against bsconv_u of width w: the input
// channels stay 128 and the output becomes round(128 w), so the variant has
// (9 + 128) * round(128 w) parameters. Exhaustive search over the grid.
TEST(MatchWidth, ExhaustiveGridOracle) {
  const std::vector<LayerSpec> base{conv_spec(LayerKind::kStandardConv, 128, 128, 3)};
  std::vector<double> grid;
  for (int i = 1; i <= 40; ++i) grid.push_back(0.25 * i);
  double expected = 0;
  double best_gap = 1e300;
  for (double w : grid) {
    const double count = 137.0 * std::llround(128 * w);
    if (count > 147456.0 * 1.01) continue;
    if (std::abs(count - 147456.0) < best_gap) best_gap = std::abs(count - 147456.0), expected = w;
  }
  EXPECT_EQ(expected, 8.25);  // 137 * 1056 = 144672; 8.5 gives 149056 > 148930.56
  EXPECT_EQ(match_width(base, LayerKind::kBsconvU, grid), expected);
  const auto scaled_model = scale_model(base, LayerKind::kBsconvU, expected);
  EXPECT_EQ(scaled_model[0].in_channels, 128u);
  EXPECT_EQ(scaled_model[0].out_channels, 1056u);
}

TEST(ScaleModel, KeepsInputAndClassifier) {
  const std::vector<LayerSpec> base{conv_spec(LayerKind::kStandardConv, 3, 16, 3),
                                    LayerSpec{.kind = LayerKind::kRelu},
                                    conv_spec(LayerKind::kStandardConv, 16, 32, 3, 2),
                                    LayerSpec{.kind = LayerKind::kGlobalAvgPool},
                                    conv_spec(LayerKind::kLinear, 32, 10, 1)};
  const auto s = scale_model(base, LayerKind::kBsconvS, 1.5);
  EXPECT_EQ(s[0].kind, LayerKind::kBsconvS);
  EXPECT_EQ(s[0].in_channels, 3u);
  EXPECT_EQ(s[0].out_channels, 24u);
  EXPECT_EQ(s[2].in_channels, 24u);
  EXPECT_EQ(s[2].out_channels, 48u);
  EXPECT_EQ(s[4].in_channels, 48u);
  EXPECT_EQ(s[4].out_channels, 10u);
  EXPECT_NO_THROW(model_costs(s, {3, 8, 8}));
}

TEST(LayerKindNames, RoundTrip) {
  for (auto k : {LayerKind::kStandardConv, LayerKind::kPointwise, LayerKind::kDepthwise, LayerKind::kDsc,
                 LayerKind::kBsconvU, LayerKind::kBsconvS, LayerKind::kRelu, LayerKind::kGlobalAvgPool,
                 LayerKind::kLinear}) {
    EXPECT_EQ(parse_layer_kind(layer_kind_name(k)), k);
  }
  EXPECT_FALSE(parse_layer_kind("conv").has_value());
}

}  // namespace
}  // namespace bsconv

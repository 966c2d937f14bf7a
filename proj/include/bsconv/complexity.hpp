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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bsconv/conv_ops.hpp"
#include "bsconv/tensor.hpp"

namespace bsconv {

enum class LayerKind {
  kStandardConv,
  kPointwise,
  kDepthwise,
  kDsc,
  kBsconvU,
  kBsconvS,
  kRelu,
  kGlobalAvgPool,
  kLinear,
};

std::string_view layer_kind_name(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

// True for the four spatial convolution kinds that can stand in for each
// other (standard, dsc, bsconv_u, bsconv_s).
bool is_conv_block(LayerKind kind);

// Raised for specs missing a field their kind needs. `field()` names the
// offending member.
class SpecError : public std::invalid_argument {
 public:
  SpecError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct LayerSpec {
  LayerKind kind = LayerKind::kStandardConv;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::optional<std::size_t> padding{};  // unset: (K-1)/2
  double p = 1.0 / 6.0;                // bsconv_s only

  ConvGeometry geometry() const;
  // Throws SpecError.
  void validate() const;

  bool operator==(const LayerSpec&) const = default;
};

// Activation shape after the layer: [C,Y,X] for spatial layers, [F] after
// pooling or linear layers.
Shape output_shape(const LayerSpec& spec, const Shape& input_shape);

// Closed-form learnable-scalar count.
//   standard  M*N*K^2          pointwise M*N
//   depthwise C*K^2            dsc       M*K^2 + M*N
//   bsconv_u  N*K^2 + M*N      bsconv_s  N*K^2 + N*M' + M'*M, M' = ceil(p*M)
//   linear    in*out + out     relu/pool 0
std::uint64_t count_params(const LayerSpec& spec);

// Multiply-accumulates for one image of `input_shape`, counting every
// kernel tap including those over zero padding. Pointwise stages run at
// input resolution, depthwise stages at output resolution.
std::uint64_t count_macs(const LayerSpec& spec, const Shape& input_shape);

struct LayerCost {
  LayerSpec spec;
  Shape input_shape;
  Shape output_shape;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

// Walks the model from `input_shape`, checking that adjacent layers compose.
std::vector<LayerCost> model_costs(std::span<const LayerSpec> model, const Shape& input_shape);
std::uint64_t total_params(std::span<const LayerSpec> model);

// Replaces every conv block with `variant` and scales every intermediate
// channel count by `width` (rounded, at least 1). The network input channels
// and the classifier output size are kept.
std::vector<LayerSpec> scale_model(std::span<const LayerSpec> model, LayerKind variant, double width);

// Grid entry whose scaled variant has total params closest to the base
// model's without exceeding it by more than 1%. Throws on an empty grid or
// when no entry qualifies.
double match_width(std::span<const LayerSpec> base_model, LayerKind variant, std::span<const double> width_grid);

}  // namespace bsconv

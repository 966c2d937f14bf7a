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

#include "bsconv/complexity.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "bsconv/blueprint_conv.hpp"

namespace bsconv {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 9> kKindNames{{
    {LayerKind::kStandardConv, "standard_conv"},
    {LayerKind::kPointwise, "pointwise"},
    {LayerKind::kDepthwise, "depthwise"},
    {LayerKind::kDsc, "dsc"},
    {LayerKind::kBsconvU, "bsconv_u"},
    {LayerKind::kBsconvS, "bsconv_s"},
    {LayerKind::kRelu, "relu"},
    {LayerKind::kGlobalAvgPool, "global_avg_pool"},
    {LayerKind::kLinear, "linear"},
}};

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

bool is_conv_block(LayerKind kind) {
  return kind == LayerKind::kStandardConv || kind == LayerKind::kDsc || kind == LayerKind::kBsconvU ||
         kind == LayerKind::kBsconvS;
}

ConvGeometry LayerSpec::geometry() const {
  const std::size_t pad = padding.value_or(kernel >= 1 ? (kernel - 1) / 2 : 0);
  return {kernel, stride, pad};
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::kRelu:
    case LayerKind::kGlobalAvgPool:
      return;
    case LayerKind::kLinear:
    case LayerKind::kPointwise:
      if (in_channels < 1) throw SpecError("in_channels", "must be >= 1");
      if (out_channels < 1) throw SpecError("out_channels", "must be >= 1");
      return;
    case LayerKind::kDepthwise:
      if (in_channels < 1) throw SpecError("in_channels", "must be >= 1");
      if (out_channels != 0 && out_channels != in_channels) {
        throw SpecError("out_channels", "depthwise output channels must equal input channels");
      }
      break;
    default:
      if (in_channels < 1) throw SpecError("in_channels", "must be >= 1");
      if (out_channels < 1) throw SpecError("out_channels", "must be >= 1");
      break;
  }
  if (kernel < 1 || kernel % 2 == 0) throw SpecError("kernel", "must be odd and >= 1");
  if (stride < 1) throw SpecError("stride", "must be >= 1");
  if (kind == LayerKind::kBsconvS && (!(p > 0.0) || p > 1.0)) throw SpecError("p", "must be in (0, 1]");
}

Shape output_shape(const LayerSpec& spec, const Shape& in) {
  spec.validate();
  const auto need_spatial = [&] {
    if (in.size() != 3) throw SpecError("input", "expected [C,Y,X] activation, got " + shape_string(in));
    if (spec.kind != LayerKind::kRelu && in[0] != spec.in_channels) {
      throw SpecError("in_channels", "layer expects " + std::to_string(spec.in_channels) +
                                         " channels, input has " + std::to_string(in[0]));
    }
  };
  switch (spec.kind) {
    case LayerKind::kRelu:
      return in;
    case LayerKind::kGlobalAvgPool:
      if (in.size() != 3) throw SpecError("input", "pooling expects [C,Y,X], got " + shape_string(in));
      return {in[0]};
    case LayerKind::kLinear: {
      const std::size_t features = shape_volume(in);
      if (features != spec.in_channels) {
        throw SpecError("in_channels", "linear expects " + std::to_string(spec.in_channels) + " features, got " +
                                           std::to_string(features));
      }
      return {spec.out_channels};
    }
    case LayerKind::kPointwise:
      need_spatial();
      return {spec.out_channels, in[1], in[2]};
    case LayerKind::kDepthwise: {
      need_spatial();
      const ConvGeometry g = spec.geometry();
      return {spec.in_channels, g.output_extent(in[1]), g.output_extent(in[2])};
    }
    default: {
      need_spatial();
      const ConvGeometry g = spec.geometry();
      return {spec.out_channels, g.output_extent(in[1]), g.output_extent(in[2])};
    }
  }
}

std::uint64_t count_params(const LayerSpec& spec) {
  spec.validate();
  const std::uint64_t m = spec.in_channels, n = spec.out_channels, k2 = spec.kernel * spec.kernel;
  switch (spec.kind) {
    case LayerKind::kStandardConv:
      return m * n * k2;
    case LayerKind::kPointwise:
      return m * n;
    case LayerKind::kDepthwise:
      return m * k2;
    case LayerKind::kDsc:
      return m * k2 + m * n;
    case LayerKind::kBsconvU:
      return n * k2 + m * n;
    case LayerKind::kBsconvS: {
      const std::uint64_t sub = subspace_size(spec.p, spec.in_channels);
      return n * k2 + n * sub + sub * m;
    }
    case LayerKind::kLinear:
      return m * n + n;
    case LayerKind::kRelu:
    case LayerKind::kGlobalAvgPool:
      return 0;
  }
  return 0;
}

std::uint64_t count_macs(const LayerSpec& spec, const Shape& input_shape) {
  const Shape out = output_shape(spec, input_shape);
  const std::uint64_t m = spec.in_channels, n = spec.out_channels, k2 = spec.kernel * spec.kernel;
  const auto plane = [](const Shape& s) -> std::uint64_t { return s.size() == 3 ? s[1] * s[2] : 1; };
  const std::uint64_t in_px = plane(input_shape), out_px = plane(out);
  switch (spec.kind) {
    case LayerKind::kStandardConv:
      return m * n * k2 * out_px;
    case LayerKind::kPointwise:
      return m * n * in_px;
    case LayerKind::kDepthwise:
      return m * k2 * out_px;
    case LayerKind::kDsc:
      return m * k2 * out_px + m * n * out_px;
    case LayerKind::kBsconvU:
      return m * n * in_px + n * k2 * out_px;
    case LayerKind::kBsconvS: {
      const std::uint64_t sub = subspace_size(spec.p, spec.in_channels);
      return m * sub * in_px + sub * n * in_px + n * k2 * out_px;
    }
    case LayerKind::kLinear:
      return m * n;
    case LayerKind::kRelu:
    case LayerKind::kGlobalAvgPool:
      return 0;
  }
  return 0;
}

std::vector<LayerCost> model_costs(std::span<const LayerSpec> model, const Shape& input_shape) {
  std::vector<LayerCost> out;
  out.reserve(model.size());
  Shape shape = input_shape;
  for (std::size_t i = 0; i < model.size(); ++i) {
    try {
      LayerCost c{model[i], shape, output_shape(model[i], shape), count_params(model[i]),
                  count_macs(model[i], shape)};
      shape = c.output_shape;
      out.push_back(std::move(c));
    } catch (const SpecError& e) {
      throw SpecError("layers[" + std::to_string(i) + "]." + e.field(),
                      std::string(e.what()).substr(e.field().size() + 2));
    } catch (const ShapeError& e) {
      throw SpecError("layers[" + std::to_string(i) + "]", e.what());
    }
  }
  return out;
}

std::uint64_t total_params(std::span<const LayerSpec> model) {
  std::uint64_t total = 0;
  for (const auto& l : model) total += count_params(l);
  return total;
}

std::vector<LayerSpec> scale_model(std::span<const LayerSpec> model, LayerKind variant, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("width multiplier must be > 0");
  if (!is_conv_block(variant)) throw std::invalid_argument("variant must be a conv block kind");
  const auto scale = [width](std::size_t c) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(c) * width)));
  };
  std::vector<LayerSpec> out;
  out.reserve(model.size());
  std::optional<std::size_t> channels;  // running channel count after scaling
  for (LayerSpec l : model) {
    if (l.kind == LayerKind::kRelu || l.kind == LayerKind::kGlobalAvgPool) {
      out.push_back(l);
      continue;
    }
    if (channels) l.in_channels = *channels;
    if (l.kind == LayerKind::kLinear) {
      out.push_back(l);
      channels = l.out_channels;
      continue;
    }
    if (is_conv_block(l.kind)) l.kind = variant;
    if (l.kind == LayerKind::kDepthwise) {
      if (l.out_channels != 0) l.out_channels = l.in_channels;
      channels = l.in_channels;
    } else {
      l.out_channels = scale(l.out_channels);
      channels = l.out_channels;
    }
    out.push_back(l);
  }
  return out;
}

double match_width(std::span<const LayerSpec> base_model, LayerKind variant, std::span<const double> width_grid) {
  if (width_grid.empty()) throw std::invalid_argument("match_width: empty width grid");
  const double base = static_cast<double>(total_params(base_model));
  const double cap = base * 1.01;
  std::optional<double> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double w : width_grid) {
    const double total = static_cast<double>(total_params(scale_model(base_model, variant, w)));
    if (total > cap) continue;
    const double gap = std::abs(total - base);
    if (gap < best_gap) {
      best_gap = gap;
      best = w;
    }
  }
  if (!best) throw std::invalid_argument("match_width: every grid entry exceeds the baseline by more than 1%");
  return *best;
}

}  // namespace bsconv

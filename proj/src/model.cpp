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

#include "bsconv/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsconv/blueprint_conv.hpp"
#include "bsconv/conv_ops.hpp"
#include "bsconv/rng.hpp"

namespace bsconv {

namespace {

template <Scalar T>
Param<T> make_param(std::string name, Tensor<T> value, bool decay = true) {
  Tensor<T> zeros(value.shape());
  return {std::move(name), std::move(value), zeros, zeros, decay};
}

template <Scalar T>
T he_std(std::size_t fan_in) {
  return static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
}

template <Scalar T>
std::vector<Param<T>> allocate(const LayerSpec& s, std::uint64_t seed) {
  const std::size_t m = s.in_channels, n = s.out_channels, k = s.kernel;
  Rng seeds(seed);
  std::vector<Param<T>> p;
  switch (s.kind) {
    case LayerKind::kStandardConv:
      p.push_back(make_param("kernel", Tensor<T>::random_normal({n, m, k, k}, seeds.next(), he_std<T>(m * k * k))));
      break;
    case LayerKind::kPointwise:
      p.push_back(make_param("weights", Tensor<T>::random_normal({n, m}, seeds.next(), he_std<T>(m))));
      break;
    case LayerKind::kDepthwise:
      p.push_back(make_param("kernel", Tensor<T>::random_normal({m, k, k}, seeds.next(), he_std<T>(k * k))));
      break;
    case LayerKind::kDsc:
      p.push_back(make_param("depthwise", Tensor<T>::random_normal({m, k, k}, seeds.next(), he_std<T>(k * k))));
      p.push_back(make_param("pointwise", Tensor<T>::random_normal({n, m}, seeds.next(), he_std<T>(m))));
      break;
    case LayerKind::kBsconvU: {
      auto bp = BsconvUParams<T>::init(m, n, k, seeds.next());
      p.push_back(make_param("blueprints", std::move(bp.blueprints)));
      p.push_back(make_param("weights", std::move(bp.weights)));
      break;
    }
    case LayerKind::kBsconvS: {
      auto bp = BsconvSParams<T>::init(m, n, k, s.p, seeds.next());
      p.push_back(make_param("blueprints", std::move(bp.blueprints)));
      p.push_back(make_param("weights_a", std::move(bp.weights_a)));
      p.push_back(make_param("weights_b", std::move(bp.weights_b)));
      break;
    }
    case LayerKind::kLinear:
      p.push_back(make_param("weights", Tensor<T>::random_normal({n, m}, seeds.next(),
                                                                 static_cast<T>(1.0 / std::sqrt(double(m))))));
      p.push_back(make_param("bias", Tensor<T>({n}), false));
      break;
    case LayerKind::kRelu:
    case LayerKind::kGlobalAvgPool:
      break;
  }
  return p;
}

template <Scalar T>
BsconvUParams<T> u_params(const Layer<T>& l) {
  return {l.param("blueprints").value, l.param("weights").value};
}

template <Scalar T>
BsconvSParams<T> s_params(const Layer<T>& l) {
  return {l.param("blueprints").value, l.param("weights_a").value, l.param("weights_b").value, l.spec.p};
}

template <Scalar T>
void accumulate(Param<T>& p, const Tensor<T>& g) {
  T* dst = p.grad.raw();
  const T* src = g.raw();
  for (std::size_t i = 0; i < p.grad.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <Scalar T>
Param<T>& Layer<T>::param(std::string_view name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw std::out_of_range("layer has no parameter '" + std::string(name) + "'");
}

template <Scalar T>
const Param<T>& Layer<T>::param(std::string_view name) const {
  return const_cast<Layer*>(this)->param(name);
}

template <Scalar T>
Tensor<T> Layer<T>::forward(const Tensor<T>& x) const {
  switch (spec.kind) {
    case LayerKind::kStandardConv:
      return conv2d_standard(x, param("kernel").value, spec.geometry());
    case LayerKind::kPointwise:
      return conv2d_pointwise(x, param("weights").value);
    case LayerKind::kDepthwise:
      return conv2d_depthwise(x, param("kernel").value, spec.geometry());
    case LayerKind::kDsc:
      return dsc_block(x, param("depthwise").value, param("pointwise").value, spec.geometry());
    case LayerKind::kBsconvU:
      return bsconv_u_forward(x, u_params(*this), spec.geometry());
    case LayerKind::kBsconvS:
      return bsconv_s_forward(x, s_params(*this), spec.geometry());
    case LayerKind::kRelu: {
      Tensor<T> y = x;
      for (auto& v : y.data()) v = std::max(v, T{0});
      return y;
    }
    case LayerKind::kGlobalAvgPool: {
      require_rank(x, 3, "global_avg_pool");
      const std::size_t c = x.extent(0), plane = x.extent(1) * x.extent(2);
      Tensor<T> y({c});
      for (std::size_t i = 0; i < c; ++i) {
        T acc{0};
        for (std::size_t j = 0; j < plane; ++j) acc += x[i * plane + j];
        y[i] = acc / static_cast<T>(plane);
      }
      return y;
    }
    case LayerKind::kLinear: {
      const auto& w = param("weights").value;
      const auto& b = param("bias").value;
      const std::size_t out = w.extent(0), in = w.extent(1);
      require_shape(x.size() == in, "linear: expected " + std::to_string(in) + " features, got " +
                                        shape_string(x.shape()));
      Tensor<T> y({out});
      for (std::size_t o = 0; o < out; ++o) {
        T acc{0};
        for (std::size_t i = 0; i < in; ++i) acc += w(o, i) * x[i];
        y[o] = acc + b[o];
      }
      return y;
    }
  }
  throw std::logic_error("unhandled layer kind");
}

template <Scalar T>
Tensor<T> Layer<T>::backward(const Tensor<T>& x, const Tensor<T>& dy) {
  switch (spec.kind) {
    case LayerKind::kStandardConv: {
      auto g = conv2d_standard_backward(x, param("kernel").value, spec.geometry(), dy);
      accumulate(param("kernel"), g.d_kernel);
      return std::move(g.d_input);
    }
    case LayerKind::kPointwise: {
      auto g = pointwise_backward(x, param("weights").value, dy);
      accumulate(param("weights"), g.d_kernel);
      return std::move(g.d_input);
    }
    case LayerKind::kDepthwise: {
      auto g = depthwise_backward(x, param("kernel").value, spec.geometry(), dy);
      accumulate(param("kernel"), g.d_kernel);
      return std::move(g.d_input);
    }
    case LayerKind::kDsc: {
      auto g = dsc_block_backward(x, param("depthwise").value, param("pointwise").value, spec.geometry(), dy);
      accumulate(param("depthwise"), g.d_depthwise);
      accumulate(param("pointwise"), g.d_pointwise);
      return std::move(g.d_input);
    }
    case LayerKind::kBsconvU: {
      auto g = bsconv_u_backward(x, u_params(*this), spec.geometry(), dy);
      accumulate(param("blueprints"), g.d_blueprints);
      accumulate(param("weights"), g.d_weights);
      return std::move(g.d_input);
    }
    case LayerKind::kBsconvS: {
      auto g = bsconv_s_backward(x, s_params(*this), spec.geometry(), dy);
      accumulate(param("blueprints"), g.d_blueprints);
      accumulate(param("weights_a"), g.d_weights_a);
      accumulate(param("weights_b"), g.d_weights_b);
      return std::move(g.d_input);
    }
    case LayerKind::kRelu: {
      Tensor<T> dx = dy;
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(x[i] > T{0})) dx[i] = T{0};
      return dx;
    }
    case LayerKind::kGlobalAvgPool: {
      const std::size_t c = x.extent(0), plane = x.extent(1) * x.extent(2);
      Tensor<T> dx(x.shape());
      for (std::size_t i = 0; i < c; ++i) {
        const T g = dy[i] / static_cast<T>(plane);
        for (std::size_t j = 0; j < plane; ++j) dx[i * plane + j] = g;
      }
      return dx;
    }
    case LayerKind::kLinear: {
      auto& w = param("weights");
      auto& b = param("bias");
      const std::size_t out = w.value.extent(0), in = w.value.extent(1);
      Tensor<T> dx(x.shape());
      for (std::size_t o = 0; o < out; ++o) {
        b.grad[o] += dy[o];
        for (std::size_t i = 0; i < in; ++i) {
          w.grad(o, i) += dy[o] * x[i];
          dx[i] += w.value(o, i) * dy[o];
        }
      }
      return dx;
    }
  }
  throw std::logic_error("unhandled layer kind");
}

template <Scalar T>
Model<T> Model<T>::build(std::span<const LayerSpec> body, Shape input_shape, std::size_t classes,
                         std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("model needs at least 2 classes");
  std::vector<LayerSpec> specs(body.begin(), body.end());
  const std::vector<LayerCost> costs = model_costs(specs, input_shape);
  const Shape last = costs.empty() ? input_shape : costs.back().output_shape;
  if (last.size() != 3) throw SpecError("layers", "body must end with a [C,Y,X] activation");
  specs.push_back({LayerKind::kGlobalAvgPool});
  LayerSpec head{LayerKind::kLinear};
  head.in_channels = last[0];
  head.out_channels = classes;
  specs.push_back(head);

  Model m;
  m.input_shape_ = std::move(input_shape);
  m.classes_ = classes;
  Rng seeds(seed);
  for (const auto& s : specs) m.layers_.push_back({s, allocate<T>(s, seeds.next())});
  return m;
}

template <Scalar T>
std::vector<LayerSpec> Model<T>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

template <Scalar T>
std::vector<Param<T>*> Model<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_)
    for (auto& p : l.params) out.push_back(&p);
  return out;
}

template <Scalar T>
std::vector<const Param<T>*> Model<T>::parameters() const {
  std::vector<const Param<T>*> out;
  for (const auto& l : layers_)
    for (const auto& p : l.params) out.push_back(&p);
  return out;
}

template <Scalar T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

template <Scalar T>
void Model<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T{0});
}

template <Scalar T>
std::vector<const Tensor<T>*> Model<T>::subspace_bases() const {
  std::vector<const Tensor<T>*> out;
  for (const auto& l : layers_)
    if (l.spec.kind == LayerKind::kBsconvS) out.push_back(&l.param("weights_b").value);
  return out;
}

template <Scalar T>
ForwardResult<T> forward(const Model<T>& model, std::span<const Tensor<T>> batch) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  ForwardResult<T> r{Tensor<T>({batch.size(), model.classes()}), {}};
  r.cache.inputs.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b].shape() != model.input_shape()) {
      throw ShapeError("forward: sample " + std::to_string(b) + " has shape " + shape_string(batch[b].shape()) +
                       ", model expects " + shape_string(model.input_shape()));
    }
    auto& inputs = r.cache.inputs[b];
    inputs.reserve(model.layers().size());
    Tensor<T> x = batch[b];
    for (const auto& layer : model.layers()) {
      Tensor<T> y = layer.forward(x);
      inputs.push_back(std::move(x));
      x = std::move(y);
    }
    for (std::size_t c = 0; c < model.classes(); ++c) r.logits(b, c) = x[c];
  }
  return r;
}

template <Scalar T>
void backward(Model<T>& model, const ForwardCache<T>& cache, const Tensor<T>& d_logits) {
  const std::size_t batch = cache.inputs.size();
  require_shape(d_logits.shape() == Shape{batch, model.classes()}, "backward: logits gradient shape mismatch");
  auto& layers = model.layers();
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor<T> g({model.classes()});
    for (std::size_t c = 0; c < model.classes(); ++c) g[c] = d_logits(b, c);
    for (std::size_t i = layers.size(); i-- > 0;) g = layers[i].backward(cache.inputs[b][i], g);
  }
}

template struct Layer<float>;
template struct Layer<double>;
template class Model<float>;
template class Model<double>;
template ForwardResult<float> forward(const Model<float>&, std::span<const Tensor<float>>);
template ForwardResult<double> forward(const Model<double>&, std::span<const Tensor<double>>);
template void backward(Model<float>&, const ForwardCache<float>&, const Tensor<float>&);
template void backward(Model<double>&, const ForwardCache<double>&, const Tensor<double>&);

}  // namespace bsconv

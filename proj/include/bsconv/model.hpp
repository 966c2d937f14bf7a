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
#include <span>
#include <string>
#include <vector>

#include "bsconv/complexity.hpp"
#include "bsconv/tensor.hpp"

namespace bsconv {

template <Scalar T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> velocity;
  bool decay = true;  // weight decay applies (everything except biases)
};

// One layer with its allocated parameters. Parameter layout by kind:
//   standard_conv  kernel [N,M,K,K]
//   pointwise      weights [N,M]
//   depthwise      kernel [C,K,K]
//   dsc            depthwise [M,K,K], pointwise [N,M]
//   bsconv_u       blueprints [N,K,K], weights [N,M]
//   bsconv_s       blueprints [N,K,K], weights_a [N,M'], weights_b [M',M]
//   linear         weights [out,in], bias [out]
template <Scalar T>
struct Layer {
  LayerSpec spec;
  std::vector<Param<T>> params;

  Param<T>& param(std::string_view name);
  const Param<T>& param(std::string_view name) const;

  Tensor<T> forward(const Tensor<T>& input) const;
  // Accumulates parameter gradients into params[i].grad and returns the
  // gradient with respect to the input.
  Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& d_output);
};

// Sequential network; the last two layers are always global_avg_pool and
// linear (the classifier head).
template <Scalar T>
class Model {
 public:
  // Allocates parameters for `body` followed by the classifier head.
  // Conv-block weights follow the blueprint initializers; standard and
  // depthwise kernels use He init; the linear layer uses N(0, 1/in) with
  // zero bias.
  static Model build(std::span<const LayerSpec> body, Shape input_shape, std::size_t classes, std::uint64_t seed);

  const Shape& input_shape() const noexcept { return input_shape_; }
  std::size_t classes() const noexcept { return classes_; }
  std::vector<Layer<T>>& layers() noexcept { return layers_; }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }
  std::vector<LayerSpec> specs() const;

  // Flattened parameter list; every learnable tensor appears exactly once.
  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  std::size_t parameter_count() const;

  void zero_grad();

  // Every bsconv_s layer's Wb, in layer order.
  std::vector<const Tensor<T>*> subspace_bases() const;

  template <Scalar U>
  Model<U> cast() const {
    Model<U> out;
    out.input_shape_ = input_shape_;
    out.classes_ = classes_;
    for (const auto& l : layers_) {
      Layer<U> nl{l.spec, {}};
      for (const auto& p : l.params) {
        nl.params.push_back({p.name, p.value.template cast<U>(), p.grad.template cast<U>(),
                             p.velocity.template cast<U>(), p.decay});
      }
      out.layers_.push_back(std::move(nl));
    }
    return out;
  }

 private:
  template <Scalar>
  friend class Model;

  Shape input_shape_;
  std::size_t classes_ = 0;
  std::vector<Layer<T>> layers_;
};

// Per-sample layer inputs recorded by forward, consumed by backward.
template <Scalar T>
struct ForwardCache {
  std::vector<std::vector<Tensor<T>>> inputs;  // [sample][layer]
};

template <Scalar T>
struct ForwardResult {
  Tensor<T> logits;  // [batch, classes]
  ForwardCache<T> cache;
};

template <Scalar T>
ForwardResult<T> forward(const Model<T>& model, std::span<const Tensor<T>> batch);

// Backpropagates d_logits ([batch, classes]) and accumulates into the
// parameter grads. Samples are processed in order, so accumulation is
// deterministic.
template <Scalar T>
void backward(Model<T>& model, const ForwardCache<T>& cache, const Tensor<T>& d_logits);

}  // namespace bsconv

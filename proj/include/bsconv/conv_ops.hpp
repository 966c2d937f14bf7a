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

#include "bsconv/tensor.hpp"

namespace bsconv {

// Square-kernel convolution geometry with symmetric zero padding.
struct ConvGeometry {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  // Stride 1 with padding (K-1)/2 keeps the spatial size unchanged.
  static ConvGeometry same(std::size_t kernel, std::size_t stride = 1) {
    return {kernel, stride, (kernel - 1) / 2};
  }

  // Throws std::invalid_argument unless K is odd and >= 1 and stride >= 1.
  void validate() const;

  // floor((in + 2*pad - K) / stride) + 1; throws ShapeError when < 1.
  std::size_t output_extent(std::size_t in) const;

  bool operator==(const ConvGeometry&) const = default;
};

template <Scalar T>
struct ConvGrads {
  Tensor<T> d_input;
  Tensor<T> d_kernel;
};

// Cross-correlation, no kernel flip:
//   V[n,y,x] = sum_{m,i,j} U_pad[m, y*s+i, x*s+j] * F[n,m,i,j]
// U: [M,Y,X], F: [N,M,K,K] -> [N,Y',X'].
template <Scalar T>
Tensor<T> conv2d_standard(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom);

template <Scalar T>
ConvGrads<T> conv2d_standard_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                                      const ConvGeometry& geom, const Tensor<T>& d_output);

// 1x1 channel mixing: V[n,y,x] = sum_m W[n,m] * U[m,y,x]. W: [N,M].
template <Scalar T>
Tensor<T> conv2d_pointwise(const Tensor<T>& input, const Tensor<T>& weights);

template <Scalar T>
ConvGrads<T> pointwise_backward(const Tensor<T>& input, const Tensor<T>& weights,
                                const Tensor<T>& d_output);

// Per-channel KxK filtering: V[c] = U[c] (*) B[c]. B: [C,K,K].
template <Scalar T>
Tensor<T> conv2d_depthwise(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom);

template <Scalar T>
ConvGrads<T> depthwise_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                                const ConvGeometry& geom, const Tensor<T>& d_output);

template <Scalar T>
struct DscGrads {
  Tensor<T> d_input;
  Tensor<T> d_depthwise;
  Tensor<T> d_pointwise;
};

// Depthwise separable block in MobileNetV1 order: depthwise first, then
// pointwise. Bdw: [M,K,K], Wpw: [N,M].
template <Scalar T>
Tensor<T> dsc_block(const Tensor<T>& input, const Tensor<T>& depthwise_kernels,
                    const Tensor<T>& pointwise_weights, const ConvGeometry& geom);

template <Scalar T>
DscGrads<T> dsc_block_backward(const Tensor<T>& input, const Tensor<T>& depthwise_kernels,
                               const Tensor<T>& pointwise_weights, const ConvGeometry& geom,
                               const Tensor<T>& d_output);

}  // namespace bsconv

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

#include "bsconv/conv_ops.hpp"
#include "bsconv/tensor.hpp"

namespace bsconv {

// M' = ceil(p * M), clamped to [1, M]. Products within 1e-9 of an integer
// are treated as that integer so that e.g. p = 1/6, M = 12 gives 2, not 3.
std::size_t subspace_size(double ratio, std::size_t in_channels);

// Unconstrained blueprint convolution: filter n is W[n,:] (outer) B[n].
template <Scalar T>
struct BsconvUParams {
  Tensor<T> blueprints;  // [N,K,K]
  Tensor<T> weights;     // [N,M]

  std::size_t in_channels() const { return weights.extent(1); }
  std::size_t out_channels() const { return blueprints.extent(0); }
  std::size_t kernel_size() const { return blueprints.extent(1); }
  std::size_t param_count() const { return blueprints.size() + weights.size(); }

  // Throws on inconsistent shapes or an even kernel.
  void validate() const;

  // Blueprints ~ N(0, 2/K^2), weights ~ N(0, 1/M): the materialized kernels
  // then have the He-init variance 2/(K^2 M) of a standard convolution.
  static BsconvUParams init(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::uint64_t seed);
};

// Subspace blueprint convolution: W = Wa * Wb with Wb spanning an
// M'-dimensional subspace of the input channels.
template <Scalar T>
struct BsconvSParams {
  Tensor<T> blueprints;  // [N,K,K]
  Tensor<T> weights_a;   // [N,M']
  Tensor<T> weights_b;   // [M',M]
  double ratio = 1.0;

  std::size_t in_channels() const { return weights_b.extent(1); }
  std::size_t out_channels() const { return blueprints.extent(0); }
  std::size_t subspace_channels() const { return weights_b.extent(0); }
  std::size_t kernel_size() const { return blueprints.extent(1); }
  std::size_t param_count() const { return blueprints.size() + weights_a.size() + weights_b.size(); }

  // Also checks M' == subspace_size(ratio, M).
  void validate() const;

  // Wb starts with orthonormal rows (Gram-Schmidt on a Gaussian matrix), so
  // the orthonormal regularizer starts at zero. Wa ~ N(0, 1/M').
  static BsconvSParams init(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            double ratio, std::uint64_t seed);
};

template <Scalar T>
struct BsconvUGrads {
  Tensor<T> d_input;
  Tensor<T> d_blueprints;
  Tensor<T> d_weights;
};

template <Scalar T>
struct BsconvSGrads {
  Tensor<T> d_input;
  Tensor<T> d_blueprints;
  Tensor<T> d_weights_a;
  Tensor<T> d_weights_b;
};

// F[n,m] = W[n,m] * B[n]  ->  [N,M,K,K].
template <Scalar T>
Tensor<T> materialize_u(const BsconvUParams<T>& params);

// F[n,m] = (Wa Wb)[n,m] * B[n].
template <Scalar T>
Tensor<T> materialize_s(const BsconvSParams<T>& params);

// Blueprint indexed by input channel and shared by all filters:
// F[n,m] = W[n,m] * B'[m]. This is the kernel set a depthwise separable
// block implicitly uses. W: [N,M], B': [M,K,K].
template <Scalar T>
Tensor<T> cross_kernel_materialize(const Tensor<T>& weights, const Tensor<T>& shared_blueprints);

// Pointwise with W, then depthwise with B.
template <Scalar T>
Tensor<T> bsconv_u_forward(const Tensor<T>& input, const BsconvUParams<T>& params);
template <Scalar T>
Tensor<T> bsconv_u_forward(const Tensor<T>& input, const BsconvUParams<T>& params, const ConvGeometry& geom);

template <Scalar T>
BsconvUGrads<T> bsconv_u_backward(const Tensor<T>& input, const BsconvUParams<T>& params,
                                  const Tensor<T>& d_output);
template <Scalar T>
BsconvUGrads<T> bsconv_u_backward(const Tensor<T>& input, const BsconvUParams<T>& params,
                                  const ConvGeometry& geom, const Tensor<T>& d_output);

// Pointwise with Wb (projection), pointwise with Wa, depthwise with B. No
// nonlinearity between the steps.
template <Scalar T>
Tensor<T> bsconv_s_forward(const Tensor<T>& input, const BsconvSParams<T>& params);
template <Scalar T>
Tensor<T> bsconv_s_forward(const Tensor<T>& input, const BsconvSParams<T>& params, const ConvGeometry& geom);

template <Scalar T>
BsconvSGrads<T> bsconv_s_backward(const Tensor<T>& input, const BsconvSParams<T>& params,
                                  const Tensor<T>& d_output);
template <Scalar T>
BsconvSGrads<T> bsconv_s_backward(const Tensor<T>& input, const BsconvSParams<T>& params,
                                  const ConvGeometry& geom, const Tensor<T>& d_output);

// || Wb Wb^T - I ||_F with I of size M' x M'.
template <Scalar T>
double ortho_loss(const Tensor<T>& weights_b);

// (2 / L) * (Wb Wb^T - I) * Wb; zero at L == 0.
template <Scalar T>
Tensor<T> ortho_loss_grad(const Tensor<T>& weights_b);

// Rows of a [R,C] matrix (R <= C) orthonormalized in place by modified
// Gram-Schmidt. Throws if the rows are linearly dependent.
void orthonormalize_rows(Tensor<double>& matrix);

}  // namespace bsconv

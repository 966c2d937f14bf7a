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

#include "bsconv/blueprint_conv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bsconv/rng.hpp"

namespace bsconv {

std::size_t subspace_size(double ratio, std::size_t in_channels) {
  if (!(ratio > 0.0) || ratio > 1.0) {
    throw std::invalid_argument("subspace ratio p must be in (0, 1], got " + std::to_string(ratio));
  }
  if (in_channels == 0) throw std::invalid_argument("subspace_size: in_channels must be >= 1");
  const double x = ratio * static_cast<double>(in_channels);
  const double nearest = std::round(x);
  const double m = std::abs(x - nearest) < 1e-9 ? nearest : std::ceil(x);
  return std::clamp<std::size_t>(static_cast<std::size_t>(m), 1, in_channels);
}

void orthonormalize_rows(Tensor<double>& matrix) {
  require_rank(matrix, 2, "orthonormalize_rows");
  const std::size_t rows = matrix.extent(0), cols = matrix.extent(1);
  require_shape(rows <= cols, "orthonormalize_rows: more rows than columns");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < r; ++q) {
      double proj = 0.0;
      for (std::size_t c = 0; c < cols; ++c) proj += matrix(r, c) * matrix(q, c);
      for (std::size_t c = 0; c < cols; ++c) matrix(r, c) -= proj * matrix(q, c);
    }
    double norm = 0.0;
    for (std::size_t c = 0; c < cols; ++c) norm += matrix(r, c) * matrix(r, c);
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("orthonormalize_rows: rows are linearly dependent");
    for (std::size_t c = 0; c < cols; ++c) matrix(r, c) /= norm;
  }
}

namespace {

void check_kernel_extent(std::size_t k) {
  if (k == 0 || k % 2 == 0) throw std::invalid_argument("blueprint size must be odd, got " + std::to_string(k));
}

template <Scalar T>
void check_blueprints(const Tensor<T>& b, const char* who) {
  require_rank(b, 3, who);
  require_shape(b.extent(1) == b.extent(2), std::string(who) + ": blueprints must be square");
  check_kernel_extent(b.extent(1));
}

template <Scalar T>
Tensor<T> materialize(const Tensor<T>& weights, const Tensor<T>& blueprints, bool index_by_filter) {
  const std::size_t n_out = weights.extent(0), n_in = weights.extent(1), k = blueprints.extent(1);
  Tensor<T> out({n_out, n_in, k, k});
  T* f = out.raw();
  for (std::size_t n = 0; n < n_out; ++n) {
    for (std::size_t m = 0; m < n_in; ++m) {
      const T w = weights(n, m);
      const T* b = blueprints.raw() + (index_by_filter ? n : m) * k * k;
      T* fnm = f + (n * n_in + m) * k * k;
      for (std::size_t t = 0; t < k * k; ++t) fnm[t] = w * b[t];
    }
  }
  return out;
}

}  // namespace

template <Scalar T>
void BsconvUParams<T>::validate() const {
  check_blueprints(blueprints, "BsconvUParams blueprints");
  require_rank(weights, 2, "BsconvUParams weights");
  require_shape(weights.extent(0) == blueprints.extent(0),
                "BsconvUParams: weight rows " + std::to_string(weights.extent(0)) + " != blueprint count " +
                    std::to_string(blueprints.extent(0)));
}

template <Scalar T>
BsconvUParams<T> BsconvUParams<T>::init(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                        std::uint64_t seed) {
  check_kernel_extent(kernel);
  Rng seeds(seed);
  const double k2 = static_cast<double>(kernel * kernel);
  BsconvUParams p{
      Tensor<T>::random_normal({out_channels, kernel, kernel}, seeds.next(), static_cast<T>(std::sqrt(2.0 / k2))),
      Tensor<T>::random_normal({out_channels, in_channels}, seeds.next(),
                               static_cast<T>(1.0 / std::sqrt(static_cast<double>(in_channels))))};
  return p;
}

template <Scalar T>
void BsconvSParams<T>::validate() const {
  check_blueprints(blueprints, "BsconvSParams blueprints");
  require_rank(weights_a, 2, "BsconvSParams weights_a");
  require_rank(weights_b, 2, "BsconvSParams weights_b");
  require_shape(weights_a.extent(0) == blueprints.extent(0), "BsconvSParams: weights_a rows != blueprint count");
  require_shape(weights_a.extent(1) == weights_b.extent(0), "BsconvSParams: weights_a columns != weights_b rows");
  const std::size_t expected = subspace_size(ratio, weights_b.extent(1));
  require_shape(weights_b.extent(0) == expected,
                "BsconvSParams: subspace size " + std::to_string(weights_b.extent(0)) + " != ceil(p*M) = " +
                    std::to_string(expected));
}

template <Scalar T>
BsconvSParams<T> BsconvSParams<T>::init(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                        double ratio, std::uint64_t seed) {
  check_kernel_extent(kernel);
  const std::size_t sub = subspace_size(ratio, in_channels);
  Rng seeds(seed);
  const double k2 = static_cast<double>(kernel * kernel);
  auto blueprints =
      Tensor<T>::random_normal({out_channels, kernel, kernel}, seeds.next(), static_cast<T>(std::sqrt(2.0 / k2)));
  auto weights_a = Tensor<T>::random_normal({out_channels, sub}, seeds.next(),
                                            static_cast<T>(1.0 / std::sqrt(static_cast<double>(sub))));
  auto basis = Tensor<double>::random_normal({sub, in_channels}, seeds.next(), 1.0);
  orthonormalize_rows(basis);
  return {std::move(blueprints), std::move(weights_a), basis.cast<T>(), ratio};
}

template <Scalar T>
Tensor<T> materialize_u(const BsconvUParams<T>& params) {
  params.validate();
  return materialize(params.weights, params.blueprints, true);
}

template <Scalar T>
Tensor<T> materialize_s(const BsconvSParams<T>& params) {
  params.validate();
  return materialize(matmul(params.weights_a, params.weights_b), params.blueprints, true);
}

template <Scalar T>
Tensor<T> cross_kernel_materialize(const Tensor<T>& weights, const Tensor<T>& shared_blueprints) {
  require_rank(weights, 2, "cross_kernel_materialize weights");
  check_blueprints(shared_blueprints, "cross_kernel_materialize blueprints");
  require_shape(shared_blueprints.extent(0) == weights.extent(1),
                "cross_kernel_materialize: blueprint count " + std::to_string(shared_blueprints.extent(0)) +
                    " != weight columns " + std::to_string(weights.extent(1)));
  return materialize(weights, shared_blueprints, false);
}

template <Scalar T>
Tensor<T> bsconv_u_forward(const Tensor<T>& input, const BsconvUParams<T>& params) {
  return bsconv_u_forward(input, params, ConvGeometry::same(params.kernel_size()));
}

template <Scalar T>
Tensor<T> bsconv_u_forward(const Tensor<T>& input, const BsconvUParams<T>& params, const ConvGeometry& geom) {
  params.validate();
  return conv2d_depthwise(conv2d_pointwise(input, params.weights), params.blueprints, geom);
}

template <Scalar T>
BsconvUGrads<T> bsconv_u_backward(const Tensor<T>& input, const BsconvUParams<T>& params,
                                  const Tensor<T>& d_output) {
  return bsconv_u_backward(input, params, ConvGeometry::same(params.kernel_size()), d_output);
}

template <Scalar T>
BsconvUGrads<T> bsconv_u_backward(const Tensor<T>& input, const BsconvUParams<T>& params,
                                  const ConvGeometry& geom, const Tensor<T>& d_output) {
  params.validate();
  const Tensor<T> mixed = conv2d_pointwise(input, params.weights);
  ConvGrads<T> dw = depthwise_backward(mixed, params.blueprints, geom, d_output);
  ConvGrads<T> pw = pointwise_backward(input, params.weights, dw.d_input);
  return {std::move(pw.d_input), std::move(dw.d_kernel), std::move(pw.d_kernel)};
}

template <Scalar T>
Tensor<T> bsconv_s_forward(const Tensor<T>& input, const BsconvSParams<T>& params) {
  return bsconv_s_forward(input, params, ConvGeometry::same(params.kernel_size()));
}

template <Scalar T>
Tensor<T> bsconv_s_forward(const Tensor<T>& input, const BsconvSParams<T>& params, const ConvGeometry& geom) {
  params.validate();
  const Tensor<T> projected = conv2d_pointwise(input, params.weights_b);
  return conv2d_depthwise(conv2d_pointwise(projected, params.weights_a), params.blueprints, geom);
}

template <Scalar T>
BsconvSGrads<T> bsconv_s_backward(const Tensor<T>& input, const BsconvSParams<T>& params,
                                  const Tensor<T>& d_output) {
  return bsconv_s_backward(input, params, ConvGeometry::same(params.kernel_size()), d_output);
}

template <Scalar T>
BsconvSGrads<T> bsconv_s_backward(const Tensor<T>& input, const BsconvSParams<T>& params,
                                  const ConvGeometry& geom, const Tensor<T>& d_output) {
  params.validate();
  const Tensor<T> projected = conv2d_pointwise(input, params.weights_b);
  const Tensor<T> mixed = conv2d_pointwise(projected, params.weights_a);
  ConvGrads<T> dw = depthwise_backward(mixed, params.blueprints, geom, d_output);
  ConvGrads<T> pa = pointwise_backward(projected, params.weights_a, dw.d_input);
  ConvGrads<T> pb = pointwise_backward(input, params.weights_b, pa.d_input);
  return {std::move(pb.d_input), std::move(dw.d_kernel), std::move(pa.d_kernel), std::move(pb.d_kernel)};
}

namespace {

// G = Wb Wb^T - I in double precision.
template <Scalar T>
Tensor<double> gram_residual(const Tensor<T>& weights_b) {
  require_rank(weights_b, 2, "ortho_loss");
  const std::size_t rows = weights_b.extent(0), cols = weights_b.extent(1);
  require_shape(rows <= cols, "ortho_loss: subspace size exceeds input channels");
  Tensor<double> g({rows, rows});
  for (std::size_t a = 0; a < rows; ++a) {
    for (std::size_t b = 0; b < rows; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        acc += static_cast<double>(weights_b(a, c)) * static_cast<double>(weights_b(b, c));
      }
      g(a, b) = acc - (a == b ? 1.0 : 0.0);
    }
  }
  return g;
}

}  // namespace

template <Scalar T>
double ortho_loss(const Tensor<T>& weights_b) {
  const Tensor<double> g = gram_residual(weights_b);
  double s = 0.0;
  for (double v : g.data()) s += v * v;
  return std::sqrt(s);
}

template <Scalar T>
Tensor<T> ortho_loss_grad(const Tensor<T>& weights_b) {
  const Tensor<double> g = gram_residual(weights_b);
  double s = 0.0;
  for (double v : g.data()) s += v * v;
  const double loss = std::sqrt(s);
  Tensor<T> grad(weights_b.shape());
  if (loss == 0.0) return grad;
  const std::size_t rows = weights_b.extent(0), cols = weights_b.extent(1);
  for (std::size_t a = 0; a < rows; ++a) {
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t b = 0; b < rows; ++b) acc += g(a, b) * static_cast<double>(weights_b(b, c));
      grad(a, c) = static_cast<T>(2.0 / loss * acc);
    }
  }
  return grad;
}

#define BSCONV_INSTANTIATE(T)                                                                                  \
  template struct BsconvUParams<T>;                                                                            \
  template struct BsconvSParams<T>;                                                                            \
  template Tensor<T> materialize_u(const BsconvUParams<T>&);                                                   \
  template Tensor<T> materialize_s(const BsconvSParams<T>&);                                                   \
  template Tensor<T> cross_kernel_materialize(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> bsconv_u_forward(const Tensor<T>&, const BsconvUParams<T>&);                              \
  template Tensor<T> bsconv_u_forward(const Tensor<T>&, const BsconvUParams<T>&, const ConvGeometry&);         \
  template BsconvUGrads<T> bsconv_u_backward(const Tensor<T>&, const BsconvUParams<T>&, const Tensor<T>&);     \
  template BsconvUGrads<T> bsconv_u_backward(const Tensor<T>&, const BsconvUParams<T>&, const ConvGeometry&,   \
                                             const Tensor<T>&);                                                \
  template Tensor<T> bsconv_s_forward(const Tensor<T>&, const BsconvSParams<T>&);                              \
  template Tensor<T> bsconv_s_forward(const Tensor<T>&, const BsconvSParams<T>&, const ConvGeometry&);         \
  template BsconvSGrads<T> bsconv_s_backward(const Tensor<T>&, const BsconvSParams<T>&, const Tensor<T>&);     \
  template BsconvSGrads<T> bsconv_s_backward(const Tensor<T>&, const BsconvSParams<T>&, const ConvGeometry&,   \
                                             const Tensor<T>&);                                                \
  template double ortho_loss(const Tensor<T>&);                                                                \
  template Tensor<T> ortho_loss_grad(const Tensor<T>&);

BSCONV_INSTANTIATE(float)
BSCONV_INSTANTIATE(double)

#undef BSCONV_INSTANTIATE

}  // namespace bsconv

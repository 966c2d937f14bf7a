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

// Independent oracles for the tests. Written without any library kernel:
// inputs are explicitly zero-padded into a fresh buffer and every sum is
// accumulated in long double, so they share no code path (or summation
// order) with the implementation under test.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "bsconv/tensor.hpp"

namespace bsconv::ref {

template <Scalar T>
Tensor<T> padded(const Tensor<T>& u, std::size_t pad) {
  const std::size_t m = u.extent(0), y = u.extent(1), x = u.extent(2);
  Tensor<T> out({m, y + 2 * pad, x + 2 * pad});
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t i = 0; i < y; ++i)
      for (std::size_t j = 0; j < x; ++j) out(c, i + pad, j + pad) = u(c, i, j);
  return out;
}

// Direct cross-correlation with F: [N,M,K,K].
template <Scalar T>
Tensor<T> conv(const Tensor<T>& u, const Tensor<T>& f, std::size_t stride, std::size_t pad) {
  const Tensor<T> p = padded(u, pad);
  const std::size_t n = f.extent(0), m = f.extent(1), k = f.extent(2);
  const std::size_t oy = (p.extent(1) - k) / stride + 1, ox = (p.extent(2) - k) / stride + 1;
  Tensor<T> out({n, oy, ox});
  for (std::size_t o = 0; o < n; ++o)
    for (std::size_t yy = 0; yy < oy; ++yy)
      for (std::size_t xx = 0; xx < ox; ++xx) {
        long double acc = 0;
        for (std::size_t c = 0; c < m; ++c)
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
              acc += static_cast<long double>(p(c, yy * stride + i, xx * stride + j)) * f(o, c, i, j);
        out(o, yy, xx) = static_cast<T>(acc);
      }
  return out;
}

// Depthwise as a full convolution whose kernel is zero off the diagonal.
template <Scalar T>
Tensor<T> depthwise(const Tensor<T>& u, const Tensor<T>& b, std::size_t stride, std::size_t pad) {
  const std::size_t c = b.extent(0), k = b.extent(1);
  Tensor<T> f({c, c, k, k});
  for (std::size_t o = 0; o < c; ++o)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) f(o, o, i, j) = b(o, i, j);
  return conv(u, f, stride, pad);
}

template <Scalar T>
Tensor<T> pointwise(const Tensor<T>& u, const Tensor<T>& w) {
  return conv(u, w.reshaped({w.extent(0), w.extent(1), 1, 1}), 1, 0);
}

template <Scalar T>
Tensor<T> mat(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out({a.extent(0), b.extent(1)});
  for (std::size_t i = 0; i < a.extent(0); ++i)
    for (std::size_t j = 0; j < b.extent(1); ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < a.extent(1); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<T>(acc);
    }
  return out;
}

// F[n,m,i,j] = W[n,m] * B[n,i,j].
template <Scalar T>
Tensor<T> outer_kernels(const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t n = w.extent(0), m = w.extent(1), k = b.extent(1);
  Tensor<T> f({n, m, k, k});
  for (std::size_t o = 0; o < n; ++o)
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) f(o, c, i, j) = w(o, c) * b(o, i, j);
  return f;
}

// Central-difference gradient of a scalar function of one tensor.
inline Tensor<double> numeric_gradient(Tensor<double> x, const std::function<double(const Tensor<double>&)>& f,
                                       double h = 1e-6) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// Frobenius norm, long-double accumulation.
inline double frobenius(const Tensor<double>& a) {
  long double s = 0;
  for (double v : a.data()) s += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(s));
}

}  // namespace bsconv::ref

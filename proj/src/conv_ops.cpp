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

#include "bsconv/conv_ops.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "bsconv/parallel.hpp"

namespace bsconv {

void ConvGeometry::validate() const {
  if (kernel == 0 || kernel % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd and >= 1, got " + std::to_string(kernel));
  }
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
}

std::size_t ConvGeometry::output_extent(std::size_t in) const {
  validate();
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel) {
    throw ShapeError("degenerate output: input extent " + std::to_string(in) + " with padding " +
                     std::to_string(padding) + " is smaller than kernel " + std::to_string(kernel));
  }
  return (padded - kernel) / stride + 1;
}

namespace {

// Range of kernel taps [lo, hi) that land inside the unpadded input for
// output coordinate `o`.
struct TapRange {
  std::size_t lo;
  std::size_t hi;
};

inline TapRange taps(std::size_t o, std::size_t in, const ConvGeometry& g) {
  const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(o * g.stride) - static_cast<std::ptrdiff_t>(g.padding);
  const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(g.kernel);
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -base);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(in) - base);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

inline std::size_t input_coord(std::size_t o, std::size_t tap, const ConvGeometry& g) {
  return o * g.stride + tap - g.padding;
}

template <Scalar T>
void check_standard(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom) {
  require_rank(input, 3, "conv2d_standard input");
  require_rank(kernels, 4, "conv2d_standard kernels");
  geom.validate();
  require_shape(kernels.extent(1) == input.extent(0),
                "conv2d_standard: kernel in-channels " + std::to_string(kernels.extent(1)) +
                    " != input channels " + std::to_string(input.extent(0)));
  require_shape(kernels.extent(2) == geom.kernel && kernels.extent(3) == geom.kernel,
                "conv2d_standard: kernel spatial size " + shape_string(kernels.shape()) +
                    " does not match geometry K=" + std::to_string(geom.kernel));
}

template <Scalar T>
void check_depthwise(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom) {
  require_rank(input, 3, "conv2d_depthwise input");
  require_rank(kernels, 3, "conv2d_depthwise kernels");
  geom.validate();
  require_shape(kernels.extent(0) == input.extent(0),
                "conv2d_depthwise: kernel channels " + std::to_string(kernels.extent(0)) +
                    " != input channels " + std::to_string(input.extent(0)));
  require_shape(kernels.extent(1) == geom.kernel && kernels.extent(2) == geom.kernel,
                "conv2d_depthwise: kernel spatial size " + shape_string(kernels.shape()) +
                    " does not match geometry K=" + std::to_string(geom.kernel));
}

template <Scalar T>
void check_pointwise(const Tensor<T>& input, const Tensor<T>& weights) {
  require_rank(input, 3, "conv2d_pointwise input");
  require_rank(weights, 2, "conv2d_pointwise weights");
  require_shape(weights.extent(1) == input.extent(0),
                "conv2d_pointwise: weight columns " + std::to_string(weights.extent(1)) +
                    " != input channels " + std::to_string(input.extent(0)));
}

template <Scalar T>
void check_grad_shape(const Tensor<T>& d_output, const Shape& expected, const char* op) {
  require_shape(d_output.shape() == expected, std::string(op) + ": output gradient shape " +
                                                  shape_string(d_output.shape()) + " != " +
                                                  shape_string(expected));
}

}  // namespace

template <Scalar T>
Tensor<T> conv2d_standard(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom) {
  check_standard(input, kernels, geom);
  const std::size_t in_c = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  const std::size_t out_c = kernels.extent(0), k = geom.kernel;
  const std::size_t out_h = geom.output_extent(in_h), out_w = geom.output_extent(in_w);

  Tensor<T> out({out_c, out_h, out_w});
  const T* u = input.raw();
  const T* f = kernels.raw();
  T* v = out.raw();
  parallel_for(out_c, in_c * k * k * out_h * out_w, [&](std::size_t n) {
    const T* fn = f + n * in_c * k * k;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const TapRange ry = taps(oy, in_h, geom);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const TapRange rx = taps(ox, in_w, geom);
        T acc{0};
        for (std::size_t m = 0; m < in_c; ++m) {
          const T* um = u + m * in_h * in_w;
          const T* fm = fn + m * k * k;
          for (std::size_t i = ry.lo; i < ry.hi; ++i) {
            const T* row = um + input_coord(oy, i, geom) * in_w;
            for (std::size_t j = rx.lo; j < rx.hi; ++j) acc += row[input_coord(ox, j, geom)] * fm[i * k + j];
          }
        }
        v[(n * out_h + oy) * out_w + ox] = acc;
      }
    }
  });
  return out;
}

template <Scalar T>
ConvGrads<T> conv2d_standard_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                                      const ConvGeometry& geom, const Tensor<T>& d_output) {
  check_standard(input, kernels, geom);
  const std::size_t in_c = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  const std::size_t out_c = kernels.extent(0), k = geom.kernel;
  const std::size_t out_h = geom.output_extent(in_h), out_w = geom.output_extent(in_w);
  check_grad_shape(d_output, {out_c, out_h, out_w}, "conv2d_standard_backward");

  ConvGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(kernels.shape())};
  const T* u = input.raw();
  const T* f = kernels.raw();
  const T* dv = d_output.raw();
  T* du = g.d_input.raw();
  T* df = g.d_kernel.raw();

  parallel_for(out_c, in_c * k * k * out_h * out_w, [&](std::size_t n) {
    const T* dvn = dv + n * out_h * out_w;
    for (std::size_t m = 0; m < in_c; ++m) {
      const T* um = u + m * in_h * in_w;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          T acc{0};
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const TapRange ry = taps(oy, in_h, geom);
            if (i < ry.lo || i >= ry.hi) continue;
            const T* row = um + input_coord(oy, i, geom) * in_w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const TapRange rx = taps(ox, in_w, geom);
              if (j < rx.lo || j >= rx.hi) continue;
              acc += dvn[oy * out_w + ox] * row[input_coord(ox, j, geom)];
            }
          }
          df[((n * in_c + m) * k + i) * k + j] = acc;
        }
      }
    }
  });

  parallel_for(in_c, out_c * k * k * out_h * out_w, [&](std::size_t m) {
    T* dum = du + m * in_h * in_w;
    for (std::size_t n = 0; n < out_c; ++n) {
      const T* fnm = f + (n * in_c + m) * k * k;
      const T* dvn = dv + n * out_h * out_w;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const TapRange ry = taps(oy, in_h, geom);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const TapRange rx = taps(ox, in_w, geom);
          const T grad = dvn[oy * out_w + ox];
          for (std::size_t i = ry.lo; i < ry.hi; ++i) {
            T* row = dum + input_coord(oy, i, geom) * in_w;
            for (std::size_t j = rx.lo; j < rx.hi; ++j) row[input_coord(ox, j, geom)] += grad * fnm[i * k + j];
          }
        }
      }
    }
  });
  return g;
}

template <Scalar T>
Tensor<T> conv2d_pointwise(const Tensor<T>& input, const Tensor<T>& weights) {
  check_pointwise(input, weights);
  const std::size_t in_c = input.extent(0), plane = input.extent(1) * input.extent(2);
  const std::size_t out_c = weights.extent(0);
  Tensor<T> out({out_c, input.extent(1), input.extent(2)});
  const T* u = input.raw();
  const T* w = weights.raw();
  T* v = out.raw();
  parallel_for(out_c, in_c * plane, [&](std::size_t n) {
    T* vn = v + n * plane;
    for (std::size_t m = 0; m < in_c; ++m) {
      const T wnm = w[n * in_c + m];
      const T* um = u + m * plane;
      for (std::size_t p = 0; p < plane; ++p) vn[p] += wnm * um[p];
    }
  });
  return out;
}

template <Scalar T>
ConvGrads<T> pointwise_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& d_output) {
  check_pointwise(input, weights);
  const std::size_t in_c = input.extent(0), plane = input.extent(1) * input.extent(2);
  const std::size_t out_c = weights.extent(0);
  check_grad_shape(d_output, {out_c, input.extent(1), input.extent(2)}, "pointwise_backward");

  ConvGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape())};
  const T* u = input.raw();
  const T* w = weights.raw();
  const T* dv = d_output.raw();
  T* du = g.d_input.raw();
  T* dw = g.d_kernel.raw();

  parallel_for(out_c, in_c * plane, [&](std::size_t n) {
    const T* dvn = dv + n * plane;
    for (std::size_t m = 0; m < in_c; ++m) {
      const T* um = u + m * plane;
      T acc{0};
      for (std::size_t p = 0; p < plane; ++p) acc += dvn[p] * um[p];
      dw[n * in_c + m] = acc;
    }
  });
  parallel_for(in_c, out_c * plane, [&](std::size_t m) {
    T* dum = du + m * plane;
    for (std::size_t n = 0; n < out_c; ++n) {
      const T wnm = w[n * in_c + m];
      const T* dvn = dv + n * plane;
      for (std::size_t p = 0; p < plane; ++p) dum[p] += wnm * dvn[p];
    }
  });
  return g;
}

template <Scalar T>
Tensor<T> conv2d_depthwise(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom) {
  check_depthwise(input, kernels, geom);
  const std::size_t ch = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  const std::size_t k = geom.kernel;
  const std::size_t out_h = geom.output_extent(in_h), out_w = geom.output_extent(in_w);
  Tensor<T> out({ch, out_h, out_w});
  const T* u = input.raw();
  const T* b = kernels.raw();
  T* v = out.raw();
  parallel_for(ch, k * k * out_h * out_w, [&](std::size_t c) {
    const T* uc = u + c * in_h * in_w;
    const T* bc = b + c * k * k;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const TapRange ry = taps(oy, in_h, geom);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const TapRange rx = taps(ox, in_w, geom);
        T acc{0};
        for (std::size_t i = ry.lo; i < ry.hi; ++i) {
          const T* row = uc + input_coord(oy, i, geom) * in_w;
          for (std::size_t j = rx.lo; j < rx.hi; ++j) acc += row[input_coord(ox, j, geom)] * bc[i * k + j];
        }
        v[(c * out_h + oy) * out_w + ox] = acc;
      }
    }
  });
  return out;
}

template <Scalar T>
ConvGrads<T> depthwise_backward(const Tensor<T>& input, const Tensor<T>& kernels, const ConvGeometry& geom,
                                const Tensor<T>& d_output) {
  check_depthwise(input, kernels, geom);
  const std::size_t ch = input.extent(0), in_h = input.extent(1), in_w = input.extent(2);
  const std::size_t k = geom.kernel;
  const std::size_t out_h = geom.output_extent(in_h), out_w = geom.output_extent(in_w);
  check_grad_shape(d_output, {ch, out_h, out_w}, "depthwise_backward");

  ConvGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(kernels.shape())};
  const T* u = input.raw();
  const T* b = kernels.raw();
  const T* dv = d_output.raw();
  T* du = g.d_input.raw();
  T* db = g.d_kernel.raw();

  parallel_for(ch, 2 * k * k * out_h * out_w, [&](std::size_t c) {
    const T* uc = u + c * in_h * in_w;
    const T* bc = b + c * k * k;
    const T* dvc = dv + c * out_h * out_w;
    T* duc = du + c * in_h * in_w;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        T acc{0};
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const TapRange ry = taps(oy, in_h, geom);
          if (i < ry.lo || i >= ry.hi) continue;
          const T* row = uc + input_coord(oy, i, geom) * in_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const TapRange rx = taps(ox, in_w, geom);
            if (j < rx.lo || j >= rx.hi) continue;
            acc += dvc[oy * out_w + ox] * row[input_coord(ox, j, geom)];
          }
        }
        db[(c * k + i) * k + j] = acc;
      }
    }
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const TapRange ry = taps(oy, in_h, geom);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const TapRange rx = taps(ox, in_w, geom);
        const T grad = dvc[oy * out_w + ox];
        for (std::size_t i = ry.lo; i < ry.hi; ++i) {
          T* row = duc + input_coord(oy, i, geom) * in_w;
          for (std::size_t j = rx.lo; j < rx.hi; ++j) row[input_coord(ox, j, geom)] += grad * bc[i * k + j];
        }
      }
    }
  });
  return g;
}

template <Scalar T>
Tensor<T> dsc_block(const Tensor<T>& input, const Tensor<T>& depthwise_kernels,
                    const Tensor<T>& pointwise_weights, const ConvGeometry& geom) {
  return conv2d_pointwise(conv2d_depthwise(input, depthwise_kernels, geom), pointwise_weights);
}

template <Scalar T>
DscGrads<T> dsc_block_backward(const Tensor<T>& input, const Tensor<T>& depthwise_kernels,
                               const Tensor<T>& pointwise_weights, const ConvGeometry& geom,
                               const Tensor<T>& d_output) {
  const Tensor<T> mid = conv2d_depthwise(input, depthwise_kernels, geom);
  ConvGrads<T> pw = pointwise_backward(mid, pointwise_weights, d_output);
  ConvGrads<T> dw = depthwise_backward(input, depthwise_kernels, geom, pw.d_input);
  return {std::move(dw.d_input), std::move(dw.d_kernel), std::move(pw.d_kernel)};
}

#define BSCONV_INSTANTIATE(T)                                                                          \
  template Tensor<T> conv2d_standard(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);         \
  template ConvGrads<T> conv2d_standard_backward(const Tensor<T>&, const Tensor<T>&,                   \
                                                 const ConvGeometry&, const Tensor<T>&);               \
  template Tensor<T> conv2d_pointwise(const Tensor<T>&, const Tensor<T>&);                             \
  template ConvGrads<T> pointwise_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> conv2d_depthwise(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&);        \
  template ConvGrads<T> depthwise_backward(const Tensor<T>&, const Tensor<T>&, const ConvGeometry&,    \
                                           const Tensor<T>&);                                          \
  template Tensor<T> dsc_block(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                   \
                               const ConvGeometry&);                                                   \
  template DscGrads<T> dsc_block_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                          const ConvGeometry&, const Tensor<T>&);

BSCONV_INSTANTIATE(float)
BSCONV_INSTANTIATE(double)

#undef BSCONV_INSTANTIATE

}  // namespace bsconv

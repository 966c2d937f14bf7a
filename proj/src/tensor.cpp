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

#include "bsconv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bsconv/rng.hpp"

namespace bsconv {

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32:
      return 4;
    case DType::kFloat64:
      return 8;
  }
  throw std::invalid_argument("unknown dtype");
}

std::string dtype_name(DType dtype) {
  return dtype == DType::kFloat32 ? "f32" : "f64";
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > kMaxRank) {
    throw ShapeError("tensor rank must be in [1, 4], got " + shape_string(shape));
  }
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape));
  }
}

template <Scalar T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

template <Scalar T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_volume(shape_), fill);
}

template <Scalar T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_volume(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

template <Scalar T>
Tensor<T> Tensor<T>::random_normal(Shape shape, std::uint64_t seed, T stddev) {
  if (!(stddev > T{0})) throw std::invalid_argument("random_normal: stddev must be > 0");
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (auto& v : t.data_) v = static_cast<T>(rng.normal() * static_cast<double>(stddev));
  return t;
}

template <Scalar T>
std::size_t Tensor<T>::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

template <Scalar T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  validate_shape(shape);
  if (shape_volume(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <Scalar T>
void Tensor<T>::fill(T value) noexcept {
  std::fill(data_.begin(), data_.end(), value);
}

template <Scalar T>
bool allclose(const Tensor<T>& a, const Tensor<T>& b, double rel_tol, double abs_tol) {
  require_same_shape(a, b, "allclose");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    if (!(std::abs(x - y) <= abs_tol + rel_tol * std::abs(y))) return false;
  }
  return true;
}

template <Scalar T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <Scalar T>
double max_abs(const Tensor<T>& a) {
  double m = 0.0;
  for (auto v : a.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

template <Scalar T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b) {
  const double diff = max_abs_diff(a, b);
  const double scale = max_abs(b);
  if (scale == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return diff / scale;
}

template <Scalar T>
double sum(const Tensor<T>& a) {
  double s = 0.0;
  for (auto v : a.data()) s += v;
  return s;
}

template <Scalar T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <Scalar T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <Scalar T>
Tensor<T> scaled(const Tensor<T>& a, T factor) {
  Tensor<T> out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

template <Scalar T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t rows = a.extent(0), inner = a.extent(1), cols = b.extent(1);
  if (b.extent(0) != inner) {
    throw ShapeError("matmul: inner extent mismatch " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor<T> out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      T acc{0};
      for (std::size_t k = 0; k < inner; ++k) acc += a(r, k) * b(k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

template <Scalar T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a, 2, "transpose");
  Tensor<T> out({a.extent(1), a.extent(0)});
  for (std::size_t r = 0; r < a.extent(0); ++r)
    for (std::size_t c = 0; c < a.extent(1); ++c) out(c, r) = a(r, c);
  return out;
}

template <Scalar T>
Tensor<T> identity(std::size_t n) {
  Tensor<T> out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
  return out;
}

#define BSCONV_INSTANTIATE(T)                                                   \
  template class Tensor<T>;                                                     \
  template bool allclose(const Tensor<T>&, const Tensor<T>&, double, double);   \
  template double relative_error(const Tensor<T>&, const Tensor<T>&);           \
  template double max_abs_diff(const Tensor<T>&, const Tensor<T>&);             \
  template double max_abs(const Tensor<T>&);                                    \
  template double sum(const Tensor<T>&);                                        \
  template double dot(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> scaled(const Tensor<T>&, T);                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> transpose(const Tensor<T>&);                               \
  template Tensor<T> identity<T>(std::size_t);

BSCONV_INSTANTIATE(float)
BSCONV_INSTANTIATE(double)

#undef BSCONV_INSTANTIATE

}  // namespace bsconv

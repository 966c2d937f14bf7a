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

#include <array>
#include <cassert>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace bsconv {

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
concept Scalar = std::same_as<T, float> || std::same_as<T, double>;

template <Scalar T>
inline constexpr DType kDTypeOf = std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;

std::size_t dtype_size(DType dtype);
std::string dtype_name(DType dtype);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;
inline constexpr std::size_t kMaxRank = 4;

std::string shape_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

// Dense row-major array of up to four axes; the last axis is contiguous.
// Activations are laid out [channels, height, width], conv kernels
// [out, in, k, k].
template <Scalar T>
class Tensor {
 public:
  using value_type = T;
  static constexpr DType kDType = kDTypeOf<T>;

  Tensor() : shape_{1}, data_(1, T{0}) {}
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  static Tensor random_normal(Shape shape, std::uint64_t seed, T stddev);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const T* raw() const noexcept { return data_.data(); }
  T* raw() noexcept { return data_.data(); }

  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }

  template <std::integral... I>
    requires(sizeof...(I) >= 1 && sizeof...(I) <= kMaxRank)
  const T& operator()(I... idx) const noexcept {
    return data_[offset<sizeof...(I)>({static_cast<std::size_t>(idx)...})];
  }
  template <std::integral... I>
    requires(sizeof...(I) >= 1 && sizeof...(I) <= kMaxRank)
  T& operator()(I... idx) noexcept {
    return data_[offset<sizeof...(I)>({static_cast<std::size_t>(idx)...})];
  }

  // Same data, new shape of equal volume.
  Tensor reshaped(Shape shape) const;

  template <Scalar U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T value) noexcept;

  bool operator==(const Tensor&) const = default;

 private:
  template <std::size_t R>
  std::size_t offset(const std::array<std::size_t, R>& idx) const noexcept {
    assert(R == shape_.size());
    std::size_t off = 0;
    for (std::size_t a = 0; a < R; ++a) {
      assert(idx[a] < shape_[a]);
      off = off * shape_[a] + idx[a];
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

// True iff |a_i - b_i| <= abs_tol + rel_tol * |b_i| for every i.
template <Scalar T>
bool allclose(const Tensor<T>& a, const Tensor<T>& b, double rel_tol, double abs_tol);

// max_i |a_i - b_i| / max_i |b_i|; zero when both are all-zero. This is the
// error measure used by every equivalence check in the library.
template <Scalar T>
double relative_error(const Tensor<T>& a, const Tensor<T>& b);

template <Scalar T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

// Ascending-index sum, accumulated in double.
template <Scalar T>
double sum(const Tensor<T>& a);

template <Scalar T>
double dot(const Tensor<T>& a, const Tensor<T>& b);

template <Scalar T>
double max_abs(const Tensor<T>& a);

template <Scalar T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <Scalar T>
Tensor<T> scaled(const Tensor<T>& a, T factor);

// [R, C] x [C, D] -> [R, D].
template <Scalar T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <Scalar T>
Tensor<T> transpose(const Tensor<T>& a);

template <Scalar T>
Tensor<T> identity(std::size_t n);

void require_shape(bool ok, const std::string& what);

template <Scalar T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* name) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(name) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

}  // namespace bsconv

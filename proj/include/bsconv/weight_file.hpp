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
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bsconv/tensor.hpp"

namespace bsconv {

// BSWT layout, all integers little-endian:
//   "BSWT" | u32 version | u32 entry_count
//   per entry: u16 name_len | name (UTF-8) | u8 dtype (0 f32, 1 f64)
//              | u8 ndim | u32 dims[ndim] | payload (LE scalars)
inline constexpr std::uint32_t kWeightFileVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

DType dtype_of(const AnyTensor& t);
const Shape& shape_of(const AnyTensor& t);

struct WeightEntry {
  std::string name;
  AnyTensor tensor;
};

// Malformed or truncated input. `offset()` is the byte position at which
// parsing failed.
class WeightFileError : public std::runtime_error {
 public:
  WeightFileError(const std::string& message, std::uint64_t offset)
      : std::runtime_error(message + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class WeightFile {
 public:
  // Throws std::invalid_argument on a duplicate or over-long name.
  void add(std::string name, AnyTensor tensor);

  const std::vector<WeightEntry>& entries() const noexcept { return entries_; }
  const WeightEntry* find(std::string_view name) const;

  void write(std::ostream& os) const;
  void save(const std::filesystem::path& path) const;

  // Throws WeightFileError.
  static WeightFile read(std::istream& is);
  static WeightFile load(const std::filesystem::path& path);

  bool operator==(const WeightFile&) const = default;

 private:
  std::vector<WeightEntry> entries_;
};

}  // namespace bsconv

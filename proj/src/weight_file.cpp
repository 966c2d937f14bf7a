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

#include "bsconv/weight_file.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace bsconv {


namespace {

constexpr std::array<char, 4> kMagic{'B', 'S', 'W', 'T'};

template <std::unsigned_integral U>
void put_le(std::ostream& os, U value) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <Scalar T>
void put_payload(std::ostream& os, const Tensor<T>& t) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (T v : t.data()) put_le(os, std::bit_cast<Bits>(v));
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void bytes(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(is_.gcount());
    if (got != n) {
      throw WeightFileError(std::string("truncated file while reading ") + what + ": needed " + std::to_string(n) +
                                " bytes, got " + std::to_string(got),
                            offset_ + got);
    }
    offset_ += n;
  }

  template <std::unsigned_integral U>
  U le(const char* what) {
    std::array<unsigned char, sizeof(U)> buf;
    bytes(reinterpret_cast<char*>(buf.data()), buf.size(), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  template <Scalar T>
  Tensor<T> payload(Shape shape, const char* what) {
    using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const std::size_t n = shape_volume(shape);
    std::vector<T> data;
    data.reserve(std::min<std::size_t>(n, 1 << 20));
    for (std::size_t i = 0; i < n; ++i) data.push_back(std::bit_cast<T>(le<Bits>(what)));
    return Tensor<T>(std::move(shape), std::move(data));
  }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

}  // namespace

DType dtype_of(const AnyTensor& t) {
  return std::holds_alternative<Tensor<float>>(t) ? DType::kFloat32 : DType::kFloat64;
}

const Shape& shape_of(const AnyTensor& t) {
  return std::visit([](const auto& x) -> const Shape& { return x.shape(); }, t);
}

void WeightFile::add(std::string name, AnyTensor tensor) {
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw std::invalid_argument("weight name longer than 65535 bytes");
  }
  if (find(name)) throw std::invalid_argument("duplicate weight name '" + name + "'");
  for (auto e : shape_of(tensor)) {
    if (e > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("extent exceeds u32");
  }
  entries_.push_back({std::move(name), std::move(tensor)});
}

const WeightEntry* WeightFile::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

void WeightFile::write(std::ostream& os) const {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kWeightFileVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(dtype_of(e.tensor)));
    const Shape& shape = shape_of(e.tensor);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    std::visit([&os](const auto& t) { put_payload(os, t); }, e.tensor);
  }
}

void WeightFile::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write(os);
  if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

WeightFile WeightFile::read(std::istream& is) {
  Reader r(is);
  std::array<char, 4> magic;
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw WeightFileError("bad magic, expected \"BSWT\"", 0);
  const auto version = r.le<std::uint32_t>("version");
  if (version != kWeightFileVersion) {
    throw WeightFileError("unsupported format version " + std::to_string(version) + " (expected " +
                              std::to_string(kWeightFileVersion) + ")",
                          4);
  }
  const auto count = r.le<std::uint32_t>("entry count");
  WeightFile wf;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t entry_start = r.offset();
    const auto name_len = r.le<std::uint16_t>("name length");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "name");
    const std::uint64_t dtype_at = r.offset();
    const auto dtype = r.le<std::uint8_t>("dtype");
    if (dtype > 1) throw WeightFileError("unknown dtype code " + std::to_string(dtype), dtype_at);
    const std::uint64_t ndim_at = r.offset();
    const auto ndim = r.le<std::uint8_t>("ndim");
    if (ndim < 1 || ndim > kMaxRank) {
      throw WeightFileError("entry '" + name + "' has unsupported rank " + std::to_string(ndim), ndim_at);
    }
    Shape shape;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const std::uint64_t dim_at = r.offset();
      const auto dim = r.le<std::uint32_t>("dims");
      if (dim == 0) throw WeightFileError("entry '" + name + "' has a zero extent", dim_at);
      shape.push_back(dim);
    }
    if (wf.find(name)) throw WeightFileError("duplicate entry name '" + name + "'", entry_start);
    if (dtype == 0) {
      wf.entries_.push_back({std::move(name), r.payload<float>(std::move(shape), "payload")});
    } else {
      wf.entries_.push_back({std::move(name), r.payload<double>(std::move(shape), "payload")});
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw WeightFileError("trailing bytes after last entry", r.offset());
  }
  return wf;
}

WeightFile WeightFile::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WeightFileError("cannot open '" + path.string() + "'", 0);
  return read(is);
}

}  // namespace bsconv

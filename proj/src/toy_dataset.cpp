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

#include "bsconv/toy_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bsconv/rng.hpp"

namespace bsconv {

namespace {

constexpr std::size_t kChannels = 3;
constexpr double kNoiseStd = 0.35;

Tensor<float> grating(std::size_t cls, std::size_t classes, std::size_t size, Rng& rng) {
  const double theta = std::numbers::pi * static_cast<double>(cls) / static_cast<double>(classes) +
                       rng.uniform(-0.12, 0.12);
  const double freq = (cls % 2 == 0 ? 0.14 : 0.24) * rng.uniform(0.9, 1.1);  // cycles per pixel
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amplitude = rng.uniform(0.7, 1.3);
  double gain[kChannels], offset[kChannels];
  for (std::size_t c = 0; c < kChannels; ++c) {
    gain[c] = rng.uniform(0.5, 1.0);
    offset[c] = 0.2 * rng.normal();
  }
  const double ct = std::cos(theta), st = std::sin(theta);
  const double center = 0.5 * static_cast<double>(size - 1);
  Tensor<float> img({kChannels, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (static_cast<double>(x) - center) * ct + (static_cast<double>(y) - center) * st;
      const double wave = amplitude * std::sin(2.0 * std::numbers::pi * freq * u + phase);
      for (std::size_t c = 0; c < kChannels; ++c) {
        img(c, y, x) = static_cast<float>(gain[c] * wave + offset[c] + kNoiseStd * rng.normal());
      }
    }
  }
  return img;
}

Dataset generate(std::size_t classes, std::size_t per_class, std::size_t size, Rng& rng) {
  Dataset d;
  d.classes = classes;
  d.images.reserve(classes * per_class);
  d.labels.reserve(classes * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      d.images.push_back(grating(c, classes, size, rng));
      d.labels.push_back(c);
    }
  }
  return d;
}

}  // namespace

ToyDataset make_toy_dataset(std::size_t classes, std::size_t per_class, std::size_t size, std::uint64_t seed,
                            std::size_t test_per_class) {
  if (classes < 2) throw std::invalid_argument("toy dataset needs at least 2 classes");
  if (per_class < 1) throw std::invalid_argument("toy dataset needs at least 1 sample per class");
  if (size < 4) throw std::invalid_argument("toy dataset images must be at least 4x4");
  if (test_per_class == 0) test_per_class = std::max<std::size_t>(1, per_class / 2);
  Rng rng(seed);
  ToyDataset out;
  out.train = generate(classes, per_class, size, rng);
  out.test = generate(classes, test_per_class, size, rng);
  return out;
}

}  // namespace bsconv

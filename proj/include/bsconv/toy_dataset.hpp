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
#include <vector>

#include "bsconv/tensor.hpp"

namespace bsconv {

struct Dataset {
  std::vector<Tensor<float>> images;  // each [3, size, size]
  std::vector<std::size_t> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return images.size(); }
};

struct ToyDataset {
  Dataset train;
  Dataset test;
};

// Noisy oriented sinusoidal gratings. Class c has orientation c*pi/classes
// and a class-specific spatial frequency; phase, amplitude, per-channel
// color gain and offset are drawn per sample, and iid Gaussian pixel noise
// is added. The random phase makes the class means nearly identical, so a
// linear classifier on raw pixels does poorly while a small CNN with
// rectification separates the classes. Samples are interleaved by class;
// test samples come from the same stream after all training samples.
// test_per_class == 0 selects max(1, per_class / 2).
ToyDataset make_toy_dataset(std::size_t classes, std::size_t per_class, std::size_t size, std::uint64_t seed,
                            std::size_t test_per_class = 0);

}  // namespace bsconv

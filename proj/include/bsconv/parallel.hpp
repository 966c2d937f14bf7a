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
#include <functional>

namespace bsconv {

// Upper bound on worker threads used inside kernels. Defaults to 1.
void set_thread_count(std::size_t threads);
std::size_t thread_count() noexcept;

// Runs body(i) for i in [0, count). Each index is processed by exactly one
// thread, so per-index reductions keep their sequential order and results
// are identical for any thread count. Falls back to a serial loop when the
// estimated work (count * work_per_item) is small.
void parallel_for(std::size_t count, std::size_t work_per_item,
                  const std::function<void(std::size_t)>& body);

}  // namespace bsconv

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

#include "bsconv/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace bsconv {

namespace {
std::atomic<std::size_t> g_threads{1};
constexpr std::size_t kMinParallelWork = 1 << 16;
}  // namespace

void set_thread_count(std::size_t threads) { g_threads.store(std::max<std::size_t>(1, threads)); }

std::size_t thread_count() noexcept { return g_threads.load(); }

void parallel_for(std::size_t count, std::size_t work_per_item,
                  const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min(thread_count(), count);
  if (threads <= 1 || count * work_per_item < kMinParallelWork) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads - 1);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&body, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (std::size_t i = 0; i < std::min(count, chunk); ++i) body(i);
}

}  // namespace bsconv

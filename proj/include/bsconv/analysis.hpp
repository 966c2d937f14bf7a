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
#include <span>
#include <string>
#include <vector>

#include "bsconv/tensor.hpp"

namespace bsconv {

// Thin SVD A = U diag(s) V^T with r = min(rows, cols); U: [rows, r],
// V: [cols, r], s descending and nonnegative.
struct SvdResult {
  Tensor<double> u;
  std::vector<double> singular_values;
  Tensor<double> v;
};

// One-sided (Hestenes) Jacobi SVD in double precision, intended for matrices
// up to about 1024 x 1024. Throws std::domain_error on non-finite input.
SvdResult svd_small(const Tensor<double>& matrix);

inline constexpr double kDegenerateVariance = 1e-12;

// PCA over the M depth slices (each a K*K sample) of one filter.
struct FilterPcaResult {
  // Set when total_variance < kDegenerateVariance; the remaining fields are
  // then left empty.
  bool degenerate = false;
  // min(M, K^2) ratios sigma_i^2 / sum sigma^2, descending.
  std::vector<double> explained_ratios;
  // Mean squared deviation per slice (sum of squares / M).
  double total_variance = 0.0;
  Tensor<double> pc1_blueprint;  // [K,K], unit norm
  Tensor<double> scores;         // [M], projections onto pc1
  Tensor<double> mean;           // [K,K]; zero when not centered

  double pc1_ratio() const { return explained_ratios.empty() ? 0.0 : explained_ratios.front(); }
};

template <Scalar T>
FilterPcaResult pca_filter(const Tensor<T>& kernel, bool center = true);

struct VarianceHistogram {
  std::string group;
  std::vector<double> bin_edges;  // bins + 1 uniform edges on [0, 1]
  std::vector<std::size_t> counts;
  std::size_t degenerate = 0;     // excluded filters
  std::vector<double> pc1_ratios; // the binned values, in filter order

  std::size_t total() const;
  double mean_ratio() const;
  double median_ratio() const;
};

// Bins PC1 ratios uniformly on [0, 1]; a ratio of exactly 1 lands in the
// last bin. Degenerate results are counted separately.
VarianceHistogram make_histogram(std::span<const FilterPcaResult> results, std::string group, std::size_t bins);

// One histogram per distinct label, in order of first appearance. `labels`
// assigns each of the N filters to a group; empty means a single "all"
// group.
template <Scalar T>
std::vector<VarianceHistogram> analyze_kernel_set(const Tensor<T>& kernels, std::span<const std::string> labels,
                                                  std::size_t bins, bool center = true);

template <Scalar T>
struct LowRankFactors {
  Tensor<T> weights_a;  // [N, rank] = U_r diag(s_r)
  Tensor<T> weights_b;  // [rank, M] = V_r^T, orthonormal rows
};

// Truncated SVD factorization, optimal in Frobenius norm.
template <Scalar T>
LowRankFactors<T> low_rank_factorize(const Tensor<T>& weights, std::size_t rank);

}  // namespace bsconv

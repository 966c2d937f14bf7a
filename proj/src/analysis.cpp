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

#include "bsconv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bsconv {

namespace {

constexpr int kMaxSweeps = 80;

// Columns of a column-major m x n matrix orthogonalized in place; v
// accumulates the rotations (n x n, column-major).
void jacobi_orthogonalize(std::vector<double>& a, std::size_t m, std::size_t n, std::vector<double>& v) {
  const double eps = 1e-15;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* ap = a.data() + p * m;
        double* aq = a.data() + q * m;
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += ap[i] * ap[i];
          beta += aq[i] * aq[i];
          gamma += ap[i] * aq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = ap[i], y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        double* vp = v.data() + p * n;
        double* vq = v.data() + q * n;
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i], y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) return;
  }
}

// Replaces column `col` of the column-major m x r matrix q with a unit vector
// orthogonal to columns [0, col), trying standard basis vectors in order.
void complete_column(std::vector<double>& q, std::size_t m, std::size_t col) {
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<double> cand(m, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < col; ++k) {
        const double* qk = q.data() + k * m;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += qk[i] * cand[i];
        for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * qk[i];
      }
    }
    double norm = 0.0;
    for (double x : cand) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.5) {
      for (std::size_t i = 0; i < m; ++i) q[col * m + i] = cand[i] / norm;
      return;
    }
  }
  throw std::logic_error("svd_small: failed to complete orthonormal basis");
}

// Tall case (m >= n).
SvdResult svd_tall(const Tensor<double>& a) {
  const std::size_t m = a.extent(0), n = a.extent(1);
  std::vector<double> work(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) work[j * m + i] = a(i, j);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

  jacobi_orthogonalize(work, m, n, v);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += work[j * m + i] * work[j * m + i];
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double smax = n ? norms[order[0]] : 0.0;
  const double tiny = std::max(smax * 1e-13 * static_cast<double>(m), std::numeric_limits<double>::min());
  std::vector<double> u(m * n, 0.0);
  SvdResult r{Tensor<double>({m, n}), std::vector<double>(n), Tensor<double>({n, n})};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    r.singular_values[k] = norms[j];
    if (norms[j] > tiny) {
      for (std::size_t i = 0; i < m; ++i) u[k * m + i] = work[j * m + i] / norms[j];
    } else {
      complete_column(u, m, k);
    }
    for (std::size_t i = 0; i < n; ++i) r.v(i, k) = v[j * n + i];
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) r.u(i, k) = u[k * m + i];
  return r;
}

}  // namespace

SvdResult svd_small(const Tensor<double>& matrix) {
  require_rank(matrix, 2, "svd_small");
  for (double x : matrix.data()) {
    if (!std::isfinite(x)) throw std::domain_error("svd_small: non-finite matrix entry");
  }
  if (matrix.extent(0) >= matrix.extent(1)) return svd_tall(matrix);
  SvdResult t = svd_tall(transpose(matrix));
  return {std::move(t.v), std::move(t.singular_values), std::move(t.u)};
}

template <Scalar T>
FilterPcaResult pca_filter(const Tensor<T>& kernel, bool center) {
  require_rank(kernel, 3, "pca_filter");
  const std::size_t m = kernel.extent(0), k = kernel.extent(1);
  require_shape(kernel.extent(2) == k, "pca_filter: kernel slices must be square");
  if (m < 2) throw std::invalid_argument("pca_filter: need at least 2 depth slices");
  const std::size_t dims = k * k;

  Tensor<double> samples({m, dims});
  for (std::size_t i = 0; i < m * dims; ++i) samples[i] = static_cast<double>(kernel[i]);

  FilterPcaResult res;
  res.mean = Tensor<double>({k, k});
  if (center) {
    for (std::size_t d = 0; d < dims; ++d) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += samples(i, d);
      res.mean[d] = s / static_cast<double>(m);
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t d = 0; d < dims; ++d) samples(i, d) -= res.mean[d];
  }

  double sumsq = 0.0;
  for (double x : samples.data()) sumsq += x * x;
  res.total_variance = sumsq / static_cast<double>(m);
  if (res.total_variance < kDegenerateVariance) {
    res.degenerate = true;
    return res;
  }

  const SvdResult svd = svd_small(samples);
  double energy = 0.0;
  for (double s : svd.singular_values) energy += s * s;
  res.explained_ratios.reserve(svd.singular_values.size());
  for (double s : svd.singular_values) res.explained_ratios.push_back(s * s / energy);

  // Sign convention: the largest-magnitude entry of pc1 is positive.
  std::size_t arg = 0;
  for (std::size_t d = 1; d < dims; ++d)
    if (std::abs(svd.v(d, 0)) > std::abs(svd.v(arg, 0))) arg = d;
  const double sign = svd.v(arg, 0) < 0.0 ? -1.0 : 1.0;

  res.pc1_blueprint = Tensor<double>({k, k});
  for (std::size_t d = 0; d < dims; ++d) res.pc1_blueprint[d] = sign * svd.v(d, 0);
  res.scores = Tensor<double>({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < dims; ++d) s += samples(i, d) * res.pc1_blueprint[d];
    res.scores[i] = s;
  }
  return res;
}

std::size_t VarianceHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

double VarianceHistogram::mean_ratio() const {
  if (pc1_ratios.empty()) return 0.0;
  return std::accumulate(pc1_ratios.begin(), pc1_ratios.end(), 0.0) / static_cast<double>(pc1_ratios.size());
}

double VarianceHistogram::median_ratio() const {
  if (pc1_ratios.empty()) return 0.0;
  std::vector<double> sorted = pc1_ratios;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

VarianceHistogram make_histogram(std::span<const FilterPcaResult> results, std::string group, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  VarianceHistogram h;
  h.group = std::move(group);
  h.counts.assign(bins, 0);
  h.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.bin_edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  for (const auto& r : results) {
    if (r.degenerate) {
      ++h.degenerate;
      continue;
    }
    const double ratio = std::clamp(r.pc1_ratio(), 0.0, 1.0);
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(ratio * static_cast<double>(bins)));
    ++h.counts[bin];
    h.pc1_ratios.push_back(ratio);
  }
  return h;
}

template <Scalar T>
std::vector<VarianceHistogram> analyze_kernel_set(const Tensor<T>& kernels, std::span<const std::string> labels,
                                                  std::size_t bins, bool center) {
  require_rank(kernels, 4, "analyze_kernel_set");
  const std::size_t n = kernels.extent(0), m = kernels.extent(1), k = kernels.extent(2);
  require_shape(labels.empty() || labels.size() == n,
                "analyze_kernel_set: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                    " filters");

  std::vector<std::string> groups;
  std::vector<std::vector<FilterPcaResult>> per_group;
  for (std::size_t f = 0; f < n; ++f) {
    const std::string& label = labels.empty() ? std::string("all") : labels[f];
    auto it = std::find(groups.begin(), groups.end(), label);
    std::size_t g = static_cast<std::size_t>(it - groups.begin());
    if (it == groups.end()) {
      groups.push_back(label);
      per_group.emplace_back();
    }
    const std::size_t slice = m * k * k;
    std::vector<T> data(kernels.raw() + f * slice, kernels.raw() + (f + 1) * slice);
    per_group[g].push_back(pca_filter(Tensor<T>({m, k, k}, std::move(data)), center));
  }

  std::vector<VarianceHistogram> out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) out.push_back(make_histogram(per_group[g], groups[g], bins));
  return out;
}

template <Scalar T>
LowRankFactors<T> low_rank_factorize(const Tensor<T>& weights, std::size_t rank) {
  require_rank(weights, 2, "low_rank_factorize");
  const std::size_t rows = weights.extent(0), cols = weights.extent(1);
  if (rank < 1 || rank > std::min(rows, cols)) {
    throw std::invalid_argument("low_rank_factorize: rank " + std::to_string(rank) + " outside [1, " +
                                std::to_string(std::min(rows, cols)) + "]");
  }
  const SvdResult svd = svd_small(weights.template cast<double>());
  LowRankFactors<T> f{Tensor<T>({rows, rank}), Tensor<T>({rank, cols})};
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t r = 0; r < rank; ++r) f.weights_a(i, r) = static_cast<T>(svd.u(i, r) * svd.singular_values[r]);
  for (std::size_t r = 0; r < rank; ++r)
    for (std::size_t j = 0; j < cols; ++j) f.weights_b(r, j) = static_cast<T>(svd.v(j, r));
  return f;
}

template FilterPcaResult pca_filter(const Tensor<float>&, bool);
template FilterPcaResult pca_filter(const Tensor<double>&, bool);
template std::vector<VarianceHistogram> analyze_kernel_set(const Tensor<float>&, std::span<const std::string>,
                                                           std::size_t, bool);
template std::vector<VarianceHistogram> analyze_kernel_set(const Tensor<double>&, std::span<const std::string>,
                                                           std::size_t, bool);
template LowRankFactors<float> low_rank_factorize(const Tensor<float>&, std::size_t);
template LowRankFactors<double> low_rank_factorize(const Tensor<double>&, std::size_t);

}  // namespace bsconv

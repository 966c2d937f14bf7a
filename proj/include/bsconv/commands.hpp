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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bsconv/complexity.hpp"
#include "bsconv/tensor.hpp"

namespace bsconv {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // assertion or numeric failure
inline constexpr int kExitUsage = 2;    // bad flags, malformed input

struct GlobalOptions {
  std::uint64_t seed = 0;
  DType dtype = DType::kFloat32;
  std::filesystem::path out_dir = ".";
  std::size_t threads = 1;
};

// ---- verify ---------------------------------------------------------------

struct VerifyOptions {
  std::size_t trials = 200;
  std::size_t max_channels = 64;
  std::size_t max_spatial = 16;
  double tolerance = 1e-5;
};

struct FamilyResult {
  std::string family;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
};

struct EquivalenceReport {
  std::vector<FamilyResult> families;  // bsconv_u, bsconv_s, dsc_duality
  // Trial index (0-based) of the first instance where pointwise-then-
  // depthwise and depthwise-then-pointwise disagree; unset if none within
  // the first 10 trials.
  std::optional<std::size_t> order_witness;
};

// Randomized factored-vs-materialized comparison. Kernel sizes cycle
// through {1,3,5}; bsconv_s ratios through {1/6,1/3,1}. The first trials of
// the bsconv_s family pin the M' edge cases (M=1, p*M integral, p*M
// fractional).
template <Scalar T>
EquivalenceReport run_equivalence_suite(std::size_t trials, std::size_t max_channels, std::size_t max_spatial,
                                        std::uint64_t seed);

// Parses "CxS" (max channels x max spatial extent), e.g. "64x16".
bool parse_verify_sizes(const std::string& text, std::size_t& max_channels, std::size_t& max_spatial);

int cmd_verify(const GlobalOptions& global, const VerifyOptions& options, std::ostream& out, std::ostream& err);

// ---- analyze --------------------------------------------------------------

struct AnalyzeOptions {
  std::filesystem::path weights;
  std::string entry;
  std::size_t bins = 20;
  bool centered = true;
  // Optional per-filter group labels; empty puts every filter in "all".
  std::vector<std::string> groups;
};

int cmd_analyze(const GlobalOptions& global, const AnalyzeOptions& options, std::ostream& out, std::ostream& err);

// ---- complexity -----------------------------------------------------------

struct ModelDescription {
  Shape input_shape;  // [C,Y,X]
  std::vector<LayerSpec> layers;
};

// Accepts {"input": [C,Y,X], "layers": [...]} or a bare layer array (input
// then defaults to [in_channels of the first layer, 32, 32], or [1,1,1] for
// an empty list). Throws SpecError naming the JSON path of the bad field.
ModelDescription parse_model_description(const std::string& json_text);

struct ComplexityOptions {
  std::filesystem::path model;
  double p = 1.0 / 6.0;  // ratio for the bsconv_s variant column
  bool flops = false;     // report 2 * MACs
  bool csv = false;       // CSV instead of the aligned table on stdout
};

int cmd_complexity(const GlobalOptions& global, const ComplexityOptions& options, std::ostream& out,
                   std::ostream& err);

// ---- train ----------------------------------------------------------------

struct TrainOptions {
  std::string dataset = "toy";
  LayerKind block = LayerKind::kBsconvU;
  double alpha = 0.0;
  double p = 1.0 / 6.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 0.02;
  std::string schedule = "step";  // step | linear
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t classes = 4;
  std::size_t per_class = 64;
  std::size_t size = 16;
  std::size_t width = 16;
};

// Accepts standard, dsc, bsconv-u, bsconv-s (underscores also accepted).
std::optional<LayerKind> parse_block_kind(const std::string& name);

int cmd_train(const GlobalOptions& global, const TrainOptions& options, std::ostream& out, std::ostream& err);

// ---- bench ----------------------------------------------------------------

struct BenchSize {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t spatial = 0;
};

// "M,N,K,S" entries separated by ';', e.g. "64,64,3,32;128,128,3,32".
std::optional<std::vector<BenchSize>> parse_bench_sizes(const std::string& text);

struct BenchOptions {
  std::vector<BenchSize> sizes{{64, 64, 3, 32}, {128, 128, 3, 32}};
  std::size_t repeats = 5;
  double p = 1.0 / 6.0;
};

int cmd_bench(const GlobalOptions& global, const BenchOptions& options, std::ostream& out, std::ostream& err);

}  // namespace bsconv

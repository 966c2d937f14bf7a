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

// Command-line front end: verify, analyze, complexity, train, bench.

#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bsconv/commands.hpp"

namespace {

const std::map<std::string, bsconv::DType> kDTypes{{"f32", bsconv::DType::kFloat32},
                                                   {"f64", bsconv::DType::kFloat64}};

}  // namespace

int main(int argc, char** argv) {
  using namespace bsconv;

  CLI::App app{"Blueprint separable convolution toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  std::string dtype = "f32";
  std::string out_dir = ".";
  app.add_option("--seed", global.seed, "RNG seed")->capture_default_str();
  app.add_option("--dtype", dtype, "Scalar type (f32|f64)")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  app.add_option("--out-dir", out_dir, "Directory for output files")->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads for conv kernels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  VerifyOptions verify;
  std::string verify_sizes = "64x16";
  auto* cmd_v = app.add_subcommand("verify", "Randomized factored-vs-materialized equivalence checks");
  cmd_v->add_option("--trials", verify.trials, "Random configurations per family")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_v->add_option("--sizes", verify_sizes, "Max channels x max spatial extent, e.g. 64x16")->capture_default_str();
  cmd_v->add_option("--tolerance", verify.tolerance, "Pass iff max relative error < tolerance")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  AnalyzeOptions analyze;
  std::string weights_path, groups;
  auto* cmd_a = app.add_subcommand("analyze", "Per-filter PC1 explained-variance histogram of a kernel entry");
  cmd_a->add_option("weights", weights_path, "BSWT weight file")->required();
  cmd_a->add_option("--entry", analyze.entry, "Entry holding an [N,M,K,K] kernel tensor")->required();
  cmd_a->add_option("--bins", analyze.bins, "Histogram bins on [0,1]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd_a->add_option("--centered", analyze.centered, "Mean-center the depth slices (true|false)")
      ->capture_default_str();
  cmd_a->add_option("--groups", groups, "Comma-separated group label per filter");

  ComplexityOptions complexity;
  std::string model_path;
  auto* cmd_c = app.add_subcommand("complexity", "Parameter and MAC accounting for a JSON model description");
  cmd_c->add_option("model", model_path, "Model JSON")->required();
  cmd_c->add_option("--p", complexity.p, "Subspace ratio for the bsconv_s variant columns")->capture_default_str();
  cmd_c->add_flag("--flops", complexity.flops, "Report FLOPs (2 x MACs)");
  cmd_c->add_flag("--csv", complexity.csv, "CSV output instead of an aligned table");

  TrainOptions train;
  std::string block = "bsconv-u";
  auto* cmd_t = app.add_subcommand("train", "Train the toy classifier; writes metrics.csv and weights.bswt");
  cmd_t->add_option("--dataset", train.dataset, "Dataset (toy)")->capture_default_str();
  cmd_t->add_option("--block", block, "standard|dsc|bsconv-u|bsconv-s")->capture_default_str();
  cmd_t->add_option("--alpha", train.alpha, "Orthonormal regularizer weight")->capture_default_str();
  cmd_t->add_option("--p", train.p, "Subspace ratio for bsconv-s")->capture_default_str();
  cmd_t->add_option("--epochs", train.epochs)->capture_default_str();
  cmd_t->add_option("--batch-size", train.batch_size)->capture_default_str();
  cmd_t->add_option("--lr", train.lr, "Initial learning rate")->capture_default_str();
  cmd_t->add_option("--schedule", train.schedule, "step|linear")->capture_default_str();
  cmd_t->add_option("--momentum", train.momentum)->capture_default_str();
  cmd_t->add_option("--weight-decay", train.weight_decay)->capture_default_str();
  cmd_t->add_option("--classes", train.classes)->capture_default_str();
  cmd_t->add_option("--per-class", train.per_class, "Training samples per class")->capture_default_str();
  cmd_t->add_option("--size", train.size, "Image height and width")->capture_default_str();
  cmd_t->add_option("--width", train.width, "Stem channel count")->capture_default_str();

  BenchOptions bench;
  std::string bench_sizes = "64,64,3,32;128,128,3,32";
  auto* cmd_b = app.add_subcommand("bench", "Median forward time per layer kind next to MAC counts");
  cmd_b->add_option("--sizes", bench_sizes, "M,N,K,S entries separated by ';'")->capture_default_str();
  cmd_b->add_option("--repeats", bench.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_b->add_option("--p", bench.p, "Subspace ratio for bsconv_s")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  global.dtype = kDTypes.at(dtype);
  global.out_dir = out_dir;

  try {
    if (*cmd_v) {
      if (!parse_verify_sizes(verify_sizes, verify.max_channels, verify.max_spatial)) {
        std::cerr << "error: --sizes expects CxS, e.g. 64x16\n";
        return kExitUsage;
      }
      return cmd_verify(global, verify, std::cout, std::cerr);
    }
    if (*cmd_a) {
      analyze.weights = weights_path;
      if (!groups.empty()) {
        std::stringstream ss(groups);
        for (std::string g; std::getline(ss, g, ',');) analyze.groups.push_back(g);
      }
      return cmd_analyze(global, analyze, std::cout, std::cerr);
    }
    if (*cmd_c) {
      complexity.model = model_path;
      return cmd_complexity(global, complexity, std::cout, std::cerr);
    }
    if (*cmd_t) {
      const auto kind = parse_block_kind(block);
      if (!kind) {
        std::cerr << "error: unknown --block '" << block << "'\n";
        return kExitUsage;
      }
      train.block = *kind;
      return cmd_train(global, train, std::cout, std::cerr);
    }
    if (*cmd_b) {
      const auto sizes = parse_bench_sizes(bench_sizes);
      if (!sizes) {
        std::cerr << "error: --sizes expects M,N,K,S entries separated by ';' (K odd)\n";
        return kExitUsage;
      }
      bench.sizes = *sizes;
      return cmd_bench(global, bench, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

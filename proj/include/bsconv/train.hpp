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
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "bsconv/complexity.hpp"
#include "bsconv/model.hpp"
#include "bsconv/toy_dataset.hpp"

namespace bsconv {

struct LrSchedule {
  enum class Kind { kStep, kLinear };
  Kind kind = Kind::kStep;
  std::vector<std::size_t> milestones;  // step: epochs at which lr is multiplied by factor
  double factor = 0.1;
  std::size_t total_epochs = 0;  // linear: lr reaches zero at this epoch

  static LrSchedule step(std::vector<std::size_t> milestones, double factor = 0.1) {
    return {Kind::kStep, std::move(milestones), factor, 0};
  }
  static LrSchedule linear(std::size_t total_epochs) { return {Kind::kLinear, {}, 0.0, total_epochs}; }
};

struct TrainConfig {
  double lr0 = 0.02;
  LrSchedule schedule = LrSchedule::step({15, 22, 27});
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double alpha = 0.0;  // weight of the orthonormal regularizer
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

// step:   lr0 * factor^(number of milestones <= epoch)
// linear: lr0 * (1 - epoch / total), floored at 0
double learning_rate(const TrainConfig& config, std::size_t epoch);

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mean softmax cross-entropy; throws std::out_of_range for bad labels.
template <Scalar T>
double cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

// Sum of ortho_loss(Wb) over every bsconv_s layer.
template <Scalar T>
double ortho_penalty(const Model<T>& model);

// Mean of ortho_loss(Wb) over bsconv_s layers; 0 when there are none.
template <Scalar T>
double mean_ortho_residual(const Model<T>& model);

// cross_entropy + alpha * ortho_penalty.
template <Scalar T>
double joint_loss(const Tensor<T>& logits, std::span<const std::size_t> labels, const Model<T>& model,
                  double alpha);

struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double ortho = 0.0;
  std::size_t correct = 0;
};

// Zeroes the grads, then fills them with d(joint_loss)/d(theta). Weight
// decay is not included; it belongs to the optimizer step.
template <Scalar T>
LossBreakdown compute_gradients(Model<T>& model, std::span<const Tensor<T>> batch,
                                std::span<const std::size_t> labels, double alpha);

struct StepMetrics {
  double loss = 0.0;
  double classification = 0.0;
  double ortho = 0.0;
  double lr = 0.0;
  std::size_t correct = 0;
};

// One SGD step with classic momentum:
//   g = dL/dtheta + wd * theta   (wd skipped for biases)
//   v = momentum * v + g
//   theta = theta - lr(epoch) * v
// Throws NonFiniteLossError before touching the parameters if the loss is
// not finite.
template <Scalar T>
StepMetrics backward_and_step(Model<T>& model, std::span<const Tensor<T>> batch,
                              std::span<const std::size_t> labels, const TrainConfig& config, std::size_t epoch);

template <Scalar T>
double accuracy(const Model<T>& model, const Dataset& data, std::size_t batch_size = 64);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double ortho_residual = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpochMetrics& m);

// Full training run. Batches are drawn from a per-epoch Fisher-Yates
// shuffle seeded from (config.seed, epoch); accuracies are measured after
// each epoch on the full train and test sets.
std::vector<EpochMetrics> train(Model<float>& model, const ToyDataset& data, const TrainConfig& config,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct AlphaRun {
  double alpha = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double ortho_residual = 0.0;
};

// Trains one model per alpha, all built from config.seed.
std::vector<AlphaRun> alpha_sweep(std::span<const LayerSpec> body, const ToyDataset& data,
                                  std::span<const double> alphas, const TrainConfig& config);

// Toy classifier body: a 3x3 standard stem with `width` channels, then two
// 3x3 blocks of `block` kind (the first with stride 2, doubling the width),
// each followed by ReLU. ReLU is only applied after complete blocks.
std::vector<LayerSpec> toy_body(LayerKind block, std::size_t width = 16, double p = 1.0 / 6.0,
                                std::size_t in_channels = 3);

struct GradientAuditResult {
  double max_abs_error = 0.0;
  double max_abs_gradient = 0.0;
  std::size_t checked = 0;
  // max |analytic - numeric| / max |numeric| over the flattened vector.
  double relative_error() const {
    return max_abs_gradient > 0.0 ? max_abs_error / max_abs_gradient : max_abs_error;
  }
};

// Central finite differences of joint_loss over every scalar of the
// flattened parameter vector, step h = rel_step * max(1, |theta|).
GradientAuditResult gradient_audit(Model<double>& model, std::span<const Tensor<double>> batch,
                                   std::span<const std::size_t> labels, double alpha, double rel_step = 1e-5);

}  // namespace bsconv

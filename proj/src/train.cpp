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

#include "bsconv/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bsconv/blueprint_conv.hpp"
#include "bsconv/rng.hpp"

namespace bsconv {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (schedule.kind == LrSchedule::Kind::kLinear && schedule.total_epochs < 1) {
    throw std::invalid_argument("linear schedule needs total_epochs >= 1");
  }
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  const auto& s = config.schedule;
  if (s.kind == LrSchedule::Kind::kLinear) {
    const double frac = static_cast<double>(epoch) / static_cast<double>(s.total_epochs);
    return config.lr0 * std::max(0.0, 1.0 - frac);
  }
  const auto passed = std::count_if(s.milestones.begin(), s.milestones.end(),
                                    [epoch](std::size_t m) { return epoch >= m; });
  return config.lr0 * std::pow(s.factor, static_cast<double>(passed));
}

namespace {

void check_labels(std::span<const std::size_t> labels, std::size_t batch, std::size_t classes) {
  if (labels.size() != batch) {
    throw std::invalid_argument("got " + std::to_string(labels.size()) + " labels for " + std::to_string(batch) +
                                " samples");
  }
  for (auto l : labels) {
    if (l >= classes) {
      throw std::out_of_range("label " + std::to_string(l) + " out of range for " + std::to_string(classes) +
                              " classes");
    }
  }
}

// Numerically stable log-softmax row.
template <Scalar T>
void log_softmax_row(const Tensor<T>& logits, std::size_t row, std::vector<double>& out) {
  const std::size_t classes = logits.extent(1);
  double mx = -INFINITY;
  for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, static_cast<double>(logits(row, c)));
  double z = 0.0;
  for (std::size_t c = 0; c < classes; ++c) z += std::exp(static_cast<double>(logits(row, c)) - mx);
  const double lz = mx + std::log(z);
  out.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) out[c] = static_cast<double>(logits(row, c)) - lz;
}

template <Scalar T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.extent(1); ++c)
    if (logits(row, c) > logits(row, best)) best = c;
  return best;
}

}  // namespace

template <Scalar T>
double cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  require_rank(logits, 2, "cross_entropy logits");
  check_labels(labels, logits.extent(0), logits.extent(1));
  std::vector<double> ls;
  double total = 0.0;
  for (std::size_t b = 0; b < logits.extent(0); ++b) {
    log_softmax_row(logits, b, ls);
    total -= ls[labels[b]];
  }
  return total / static_cast<double>(logits.extent(0));
}

template <Scalar T>
double ortho_penalty(const Model<T>& model) {
  double s = 0.0;
  for (const auto* wb : model.subspace_bases()) s += ortho_loss(*wb);
  return s;
}

template <Scalar T>
double mean_ortho_residual(const Model<T>& model) {
  const auto bases = model.subspace_bases();
  return bases.empty() ? 0.0 : ortho_penalty(model) / static_cast<double>(bases.size());
}

template <Scalar T>
double joint_loss(const Tensor<T>& logits, std::span<const std::size_t> labels, const Model<T>& model,
                  double alpha) {
  const double ce = cross_entropy(logits, labels);
  return alpha == 0.0 ? ce : ce + alpha * ortho_penalty(model);
}

template <Scalar T>
LossBreakdown compute_gradients(Model<T>& model, std::span<const Tensor<T>> batch,
                                std::span<const std::size_t> labels, double alpha) {
  check_labels(labels, batch.size(), model.classes());
  model.zero_grad();
  ForwardResult<T> fr = forward(model, batch);
  const std::size_t n = batch.size(), classes = model.classes();

  LossBreakdown out;
  Tensor<T> d_logits({n, classes});
  std::vector<double> ls;
  for (std::size_t b = 0; b < n; ++b) {
    log_softmax_row(fr.logits, b, ls);
    out.classification -= ls[labels[b]];
    if (argmax_row(fr.logits, b) == labels[b]) ++out.correct;
    for (std::size_t c = 0; c < classes; ++c) {
      const double prob = std::exp(ls[c]);
      d_logits(b, c) = static_cast<T>((prob - (c == labels[b] ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  out.classification /= static_cast<double>(n);
  backward(model, fr.cache, d_logits);

  out.ortho = ortho_penalty(model);
  out.total = out.classification + alpha * out.ortho;
  if (alpha != 0.0) {
    for (auto& layer : model.layers()) {
      if (layer.spec.kind != LayerKind::kBsconvS) continue;
      auto& wb = layer.param("weights_b");
      const Tensor<T> g = ortho_loss_grad(wb.value);
      for (std::size_t i = 0; i < g.size(); ++i) wb.grad[i] += static_cast<T>(alpha) * g[i];
    }
  }
  return out;
}

template <Scalar T>
StepMetrics backward_and_step(Model<T>& model, std::span<const Tensor<T>> batch,
                              std::span<const std::size_t> labels, const TrainConfig& config, std::size_t epoch) {
  config.validate();
  const LossBreakdown loss = compute_gradients(model, batch, labels, config.alpha);
  if (!std::isfinite(loss.total)) {
    std::ostringstream os;
    os << "non-finite loss at epoch " << epoch << ": classification=" << loss.classification
       << " ortho=" << loss.ortho;
    throw NonFiniteLossError(os.str());
  }
  const double lr = learning_rate(config, epoch);
  const T mu = static_cast<T>(config.momentum), wd = static_cast<T>(config.weight_decay), step = static_cast<T>(lr);
  for (auto* p : model.parameters()) {
    T* theta = p->value.raw();
    T* v = p->velocity.raw();
    const T* g = p->grad.raw();
    const T decay = p->decay ? wd : T{0};
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      v[i] = mu * v[i] + (g[i] + decay * theta[i]);
      theta[i] -= step * v[i];
    }
  }
  return {loss.total, loss.classification, loss.ortho, lr, loss.correct};
}

template <Scalar T>
double accuracy(const Model<T>& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<Tensor<T>> batch;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < end; ++i) {
      if constexpr (std::is_same_v<T, float>) {
        batch.push_back(data.images[i]);
      } else {
        batch.push_back(data.images[i].template cast<T>());
      }
    }
    const ForwardResult<T> fr = forward(model, std::span<const Tensor<T>>(batch));
    for (std::size_t b = 0; b < batch.size(); ++b)
      if (argmax_row(fr.logits, b) == data.labels[start + b]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void write_metrics_header(std::ostream& os) { os << "epoch,lr,train_loss,train_acc,test_acc,ortho_residual\n"; }

void write_metrics_row(std::ostream& os, const EpochMetrics& m) {
  const auto old = os.precision(10);
  os << m.epoch << ',' << m.lr << ',' << m.train_loss << ',' << m.train_acc << ',' << m.test_acc << ','
     << m.ortho_residual << '\n';
  os.precision(old);
}

std::vector<EpochMetrics> train(Model<float>& model, const ToyDataset& data, const TrainConfig& config,
                                const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  if (data.train.size() == 0) throw std::invalid_argument("train: empty training set");
  std::vector<EpochMetrics> history;
  std::vector<std::size_t> order(data.train.size());
  std::vector<Tensor<float>> batch;
  std::vector<std::size_t> labels;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(config.seed * 0x9e3779b97f4a7c15ULL + epoch + 1);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(data.train.images[order[i]]);
        labels.push_back(data.train.labels[order[i]]);
      }
      try {
        const StepMetrics sm = backward_and_step(model, std::span<const Tensor<float>>(batch), labels, config, epoch);
        loss_sum += sm.loss;
      } catch (const NonFiniteLossError& e) {
        throw NonFiniteLossError(std::string(e.what()) + ", batch " + std::to_string(steps));
      }
      ++steps;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = learning_rate(config, epoch);
    m.train_loss = loss_sum / static_cast<double>(steps);
    m.train_acc = accuracy(model, data.train);
    m.test_acc = accuracy(model, data.test);
    m.ortho_residual = mean_ortho_residual(model);
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

std::vector<AlphaRun> alpha_sweep(std::span<const LayerSpec> body, const ToyDataset& data,
                                  std::span<const double> alphas, const TrainConfig& config) {
  if (alphas.empty()) throw std::invalid_argument("alpha_sweep: no alphas given");
  if (data.train.size() == 0) throw std::invalid_argument("alpha_sweep: empty training set");
  std::vector<AlphaRun> runs;
  for (double a : alphas) {
    TrainConfig c = config;
    c.alpha = a;
    auto model = Model<float>::build(body, data.train.images.front().shape(), data.train.classes, config.seed);
    const auto history = train(model, data, c);
    AlphaRun r{a, 0.0, 0.0, mean_ortho_residual(model)};
    if (!history.empty()) {
      r.train_acc = history.back().train_acc;
      r.test_acc = history.back().test_acc;
    } else {
      r.train_acc = accuracy(model, data.train);
      r.test_acc = accuracy(model, data.test);
    }
    runs.push_back(r);
  }
  return runs;
}

std::vector<LayerSpec> toy_body(LayerKind block, std::size_t width, double p, std::size_t in_channels) {
  if (!is_conv_block(block)) throw std::invalid_argument("toy_body: block must be a conv block kind");
  const LayerSpec stem{
      .kind = LayerKind::kStandardConv, .in_channels = in_channels, .out_channels = width, .kernel = 3};
  const LayerSpec down{
      .kind = block, .in_channels = width, .out_channels = 2 * width, .kernel = 3, .stride = 2, .p = p};
  const LayerSpec mid{.kind = block, .in_channels = 2 * width, .out_channels = 2 * width, .kernel = 3, .p = p};
  const LayerSpec relu{.kind = LayerKind::kRelu};
  return {stem, relu, down, relu, mid, relu};
}

GradientAuditResult gradient_audit(Model<double>& model, std::span<const Tensor<double>> batch,
                                   std::span<const std::size_t> labels, double alpha, double rel_step) {
  compute_gradients(model, batch, labels, alpha);
  const auto loss_at = [&] {
    const ForwardResult<double> fr = forward(model, batch);
    return joint_loss(fr.logits, labels, model, alpha);
  };
  GradientAuditResult r;
  for (auto* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double theta = p->value[i];
      const double h = rel_step * std::max(1.0, std::abs(theta));
      p->value[i] = theta + h;
      const double up = loss_at();
      p->value[i] = theta - h;
      const double down = loss_at();
      p->value[i] = theta;
      const double numeric = (up - down) / (2.0 * h);
      r.max_abs_error = std::max(r.max_abs_error, std::abs(numeric - p->grad[i]));
      r.max_abs_gradient = std::max(r.max_abs_gradient, std::abs(numeric));
      ++r.checked;
    }
  }
  return r;
}

#define BSCONV_INSTANTIATE(T)                                                                                 \
  template double cross_entropy(const Tensor<T>&, std::span<const std::size_t>);                              \
  template double ortho_penalty(const Model<T>&);                                                             \
  template double mean_ortho_residual(const Model<T>&);                                                       \
  template double joint_loss(const Tensor<T>&, std::span<const std::size_t>, const Model<T>&, double);        \
  template LossBreakdown compute_gradients(Model<T>&, std::span<const Tensor<T>>, std::span<const std::size_t>, \
                                           double);                                                           \
  template StepMetrics backward_and_step(Model<T>&, std::span<const Tensor<T>>, std::span<const std::size_t>, \
                                         const TrainConfig&, std::size_t);                                    \
  template double accuracy(const Model<T>&, const Dataset&, std::size_t);

BSCONV_INSTANTIATE(float)
BSCONV_INSTANTIATE(double)

#undef BSCONV_INSTANTIATE

}  // namespace bsconv

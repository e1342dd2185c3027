// Copyright 2026 The otprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "otprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "otprune/complexity.hpp"
#include "otprune/errors.hpp"
#include "otprune/presets.hpp"

namespace otprune {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::SparseTrain: return "sparse_train";
    case TrainMode::FineTune: return "fine_tune";
    case TrainMode::TrainFromScratch: return "train_from_scratch";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (mode == TrainMode::FineTune && lambda != 0.0) {
    throw ConfigError("fine_tune mode requires lambda = 0");
  }
  for (const auto& s : lr_steps) {
    if (s.epoch < 0 || !(s.factor > 0.0)) throw ConfigError("invalid lr step");
  }
}

double TrainConfig::lr_at(int epoch) const {
  double rate = lr;
  for (const auto& s : lr_steps) {
    if (epoch >= s.epoch) rate *= s.factor;
  }
  return rate;
}

TrainConfig TrainConfig::cifar_sparse(double lambda) {
  TrainConfig c;
  c.lambda = lambda;
  return c;
}

TrainConfig TrainConfig::cifar_fine_tune() {
  TrainConfig c;
  c.mode = TrainMode::FineTune;
  c.epochs = 40;
  c.lr = 0.001;
  c.lr_steps.clear();
  return c;
}

TrainConfig TrainConfig::toy_sparse(double lambda) {
  TrainConfig c;
  c.lambda = lambda;
  c.epochs = 30;
  c.batch_size = 32;
  c.lr = 0.1;
  c.lr_steps = {{15, 0.1}, {22, 0.1}, {27, 0.1}};
  c.weight_decay = 5e-3;
  return c;
}

TrainConfig TrainConfig::toy_fine_tune() {
  TrainConfig c = toy_sparse(0.0);
  c.mode = TrainMode::FineTune;
  c.epochs = 5;
  c.lr = 0.001;
  c.lr_steps.clear();
  return c;
}

std::string TrainTrace::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,l1_penalty,test_acc\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.l1_penalty << ',' << e.test_acc << '\n';
  }
  return out.str();
}

namespace {

double evaluate(Executor& ex, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  constexpr std::size_t kBatch = 256;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> x;
  std::vector<int> labels;
  const int K = ex.output_shape().numel();
  std::size_t correct = 0;
  for (std::size_t first = 0; first < data.size(); first += kBatch) {
    const std::size_t count = std::min(kBatch, data.size() - first);
    gather_batch(data, order, first, count, nullptr, x, labels);
    const auto logits = ex.forward(x, static_cast<int>(count));
    for (std::size_t n = 0; n < count; ++n) {
      const double* z = logits.data() + n * K;
      const int pred = static_cast<int>(std::max_element(z, z + K) - z);
      if (pred == labels[n]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

double gamma_l1(const Executor& ex) {
  double s = 0.0;
  for (const auto& p : ex.parameters()) {
    if (p.role != ParamRole::BnGamma) continue;
    for (double v : p.value) s += std::abs(v);
  }
  return s;
}

void check_data(const NetworkGraph& graph, const Dataset& d) {
  if (d.size() == 0) return;
  if (!(d.shape == graph.input_shape())) {
    throw ShapeError("dataset sample shape does not match graph input");
  }
  if (d.images.size() != d.size() * d.sample_size()) {
    throw DatasetError("dataset image buffer size mismatch");
  }
}

}  // namespace

TrainResult train(const NetworkGraph& graph, const DataSplits& data,
                  const TrainConfig& cfg) {
  cfg.validate();
  require_valid(graph);
  check_data(graph, data.train);
  check_data(graph, data.test);
  TrainResult result{graph, {}};
  if (cfg.epochs == 0) {
    for (const auto& name : graph.batchnorm_names()) {
      result.trace.gammas.emplace_back(name, graph.at(name).as<BatchNormParams>().gamma);
    }
    return result;
  }
  if (data.train.size() == 0) throw DatasetError("training split is empty");

  Executor ex(graph);
  const int K = ex.output_shape().numel();
  const bool sparse = cfg.mode == TrainMode::SparseTrain && cfg.lambda > 0.0;
  auto& params = ex.parameters();
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.value.size(), 0.0);

  Rng order_rng(cfg.seed, "data-order");
  Rng augment_rng(cfg.seed, "augment");
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> x, dlogits;
  std::vector<int> labels;
  const ForwardOptions train_opts{BnMode::Training, true, 0.1};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count =
          std::min<std::size_t>(cfg.batch_size, order.size() - first);
      // A lone sample has no batch statistics to normalize with.
      if (count < 2 && order.size() >= 2) continue;
      gather_batch(data.train, order, first, count,
                   cfg.augment ? &augment_rng : nullptr, x, labels);
      const auto logits = ex.forward(x, static_cast<int>(count), train_opts);
      const double loss =
          compute_loss(LossKind::CrossEntropy, logits, labels, K, &dlogits);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch + 1);
      loss_sum += loss * static_cast<double>(count);
      seen += count;
      ex.backward(dlogits);
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto& v = velocity[pi];
        const bool is_weight =
            p.role == ParamRole::ConvWeight || p.role == ParamRole::LinearWeight;
        const bool is_gamma = p.role == ParamRole::BnGamma;
        const bool decayed = is_weight || (is_gamma && cfg.decay_bn_scale) ||
                             (p.role == ParamRole::BnBeta && cfg.decay_bn_shift);
        const double wd = decayed ? cfg.weight_decay : 0.0;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
          double g = p.grad[j] + wd * p.value[j];
          if (sparse && is_gamma) {
            const double w = p.value[j];
            g += cfg.lambda * static_cast<double>((w > 0.0) - (w < 0.0));
          }
          v[j] = cfg.momentum * v[j] + g;
          const double step = cfg.nesterov ? g + cfg.momentum * v[j] : v[j];
          p.value[j] -= lr * step;
        }
      }
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.l1_penalty = cfg.lambda * gamma_l1(ex);
    rec.test_acc = evaluate(ex, data.test);
    if (!std::isfinite(rec.loss) || !std::isfinite(rec.l1_penalty)) {
      throw TrainingDiverged(epoch + 1);
    }
    result.trace.epochs.push_back(rec);
  }
  ex.write_back(result.graph);
  for (const auto& [name, g] : ex.gammas()) {
    result.trace.gammas.emplace_back(name, result.graph.at(name).as<BatchNormParams>().gamma);
  }
  return result;
}

TrainResult fine_tune(const NetworkGraph& graph, const DataSplits& data,
                      TrainConfig cfg) {
  cfg.mode = TrainMode::FineTune;
  cfg.lambda = 0.0;
  cfg.lr_steps.clear();
  return train(graph, data, cfg);
}

int scratch_epochs(int epochs, std::int64_t flops_before, std::int64_t flops_after) {
  if (flops_after <= 0) return 2 * epochs;
  const double ratio = std::min(
      2.0, static_cast<double>(flops_before) / static_cast<double>(flops_after));
  return static_cast<int>(std::ceil(epochs * std::max(1.0, ratio) - 1e-9));
}

TrainResult train_from_scratch(const NetworkGraph& pruned,
                               std::int64_t original_flops,
                               const DataSplits& data, TrainConfig cfg) {
  NetworkGraph fresh = pruned;
  initialize_weights(fresh, cfg.seed);
  const int epochs =
      scratch_epochs(cfg.epochs, original_flops, count_complexity(fresh).flops);
  // The decay points stretch with the budget.
  if (cfg.epochs > 0) {
    for (auto& s : cfg.lr_steps) {
      s.epoch = static_cast<int>(std::lround(
          static_cast<double>(s.epoch) * epochs / cfg.epochs));
    }
  }
  cfg.epochs = epochs;
  cfg.mode = TrainMode::TrainFromScratch;
  cfg.lambda = 0.0;
  return train(fresh, data, cfg);
}

double accuracy(const NetworkGraph& graph, const Dataset& data) {
  check_data(graph, data);
  Executor ex(graph);
  return evaluate(ex, data);
}

double gradient_check(const NetworkGraph& graph, const Tensor& input,
                      std::span<const int> labels, const GradCheckOptions& opts) {
  if (!(input.shape == graph.input_shape())) {
    throw ShapeError("gradient_check: input shape mismatch");
  }
  Executor ex(graph);
  const int K = ex.output_shape().numel();
  const ForwardOptions fwd{opts.bn_mode, false, 0.1};
  std::vector<double> dlogits;
  auto loss_at = [&](std::vector<double>* grad) {
    const auto logits = ex.forward(input.data, input.batch, fwd);
    return compute_loss(opts.loss, logits, labels, K, grad);
  };
  loss_at(&dlogits);
  ex.backward(dlogits);
  auto& params = ex.parameters();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad);

  const auto base_signature = ex.branch_signature();
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (std::size_t j = 0; j < params[pi].value.size(); ++j) {
      double& w = params[pi].value[j];
      const double saved = w;
      // A step that crosses a ReLU or max-pool switch does not estimate the
      // derivative; shrink it until both probes stay on the base piece.
      double numeric = 0.0;
      for (double h = opts.step;; h *= 0.1) {
        w = saved + h;
        const double up = loss_at(nullptr);
        const bool up_same = ex.branch_signature() == base_signature;
        w = saved - h;
        const double down = loss_at(nullptr);
        const bool down_same = ex.branch_signature() == base_signature;
        numeric = (up - down) / (2.0 * h);
        if ((up_same && down_same) || h * 0.1 < opts.min_step) break;
      }
      w = saved;
      const double a = analytic[pi][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace otprune

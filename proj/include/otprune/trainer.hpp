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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otprune/dataset.hpp"
#include "otprune/engine.hpp"
#include "otprune/graph.hpp"

namespace otprune {

enum class TrainMode { SparseTrain, FineTune, TrainFromScratch };

std::string_view to_string(TrainMode mode);

struct LrStep {
  int epoch;      // decay applies from this (0-based) epoch on
  double factor;  // multiplier
};

struct TrainConfig {
  double lambda = 0.0;
  int epochs = 160;
  int batch_size = 64;
  double lr = 0.1;
  std::vector<LrStep> lr_steps{{80, 0.1}, {120, 0.1}};
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 1e-4;
  /// Also apply weight decay to batch-norm scales.
  bool decay_bn_scale = false;
  /// Also apply weight decay to batch-norm shifts.
  bool decay_bn_shift = false;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::SparseTrain;
  /// Pad-and-crop + mirror augmentation on training batches.
  bool augment = false;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
  double lr_at(int epoch) const;

  /// 160 epochs, lr 0.1 decayed 10x at epochs 80 and 120, batch 64.
  static TrainConfig cifar_sparse(double lambda);
  /// 40 epochs at a flat lr of 0.001.
  static TrainConfig cifar_fine_tune();
  /// Short schedule sized for the toy presets on synthetic data.
  static TrainConfig toy_sparse(double lambda);
  static TrainConfig toy_fine_tune();
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;        // mean training task loss
  double l1_penalty = 0.0;  // lambda * sum |gamma| at epoch end
  double test_acc = 0.0;    // percent
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  /// Batch-norm scales after the last epoch, in topological order.
  std::vector<std::pair<std::string, std::vector<float>>> gammas;

  std::string to_csv() const;
};

struct TrainResult {
  NetworkGraph graph;
  TrainTrace trace;
};

/// Mini-batch SGD (Nesterov momentum) on softmax cross-entropy. In
/// SparseTrain mode lambda*sign(gamma) is added to every batch-norm scale
/// gradient. Throws TrainingDiverged on a non-finite loss.
TrainResult train(const NetworkGraph& graph, const DataSplits& data,
                  const TrainConfig& cfg);

/// train() with lambda = 0 and a flat learning rate.
TrainResult fine_tune(const NetworkGraph& graph, const DataSplits& data,
                      TrainConfig cfg);

/// Epoch budget for re-training a pruned model from scratch: the original
/// epoch count scaled by flops_before / flops_after, capped at 2x.
int scratch_epochs(int epochs, std::int64_t flops_before, std::int64_t flops_after);

/// Re-initializes `pruned` from cfg.seed and trains it with lambda = 0 for
/// scratch_epochs(cfg.epochs, ...) epochs.
TrainResult train_from_scratch(const NetworkGraph& pruned,
                               std::int64_t original_flops,
                               const DataSplits& data, TrainConfig cfg);

/// Top-1 accuracy in percent, batch-norm in inference mode.
double accuracy(const NetworkGraph& graph, const Dataset& data);

struct GradCheckOptions {
  LossKind loss = LossKind::CrossEntropy;
  BnMode bn_mode = BnMode::Inference;
  double step = 1e-4;
  /// A probe pair that flips a ReLU or max-pool decision is repeated with a
  /// tenth of the step, down to this size.
  double min_step = 1e-8;
  /// Denominator floor of the relative error, for near-zero gradients.
  double floor = 1e-6;
};

/// Maximum over all parameters of |analytic - numeric| /
/// max(|analytic|, |numeric|, floor), with numeric gradients from central
/// differences. Probes stay on the same side of every ReLU and max-pool
/// switch as the unperturbed pass (see GradCheckOptions::min_step).
double gradient_check(const NetworkGraph& graph, const Tensor& input,
                      std::span<const int> labels, const GradCheckOptions& opts = {});

}  // namespace otprune

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
#include <vector>

#include "otprune/graph.hpp"

namespace otprune {

/// A batch of activations, NCHW contiguous.
struct Tensor {
  int batch = 1;
  Shape shape;
  std::vector<double> data;

  std::size_t sample_size() const {
    return static_cast<std::size_t>(shape.numel());
  }
};

enum class BnMode {
  /// Normalize with running statistics.
  Inference,
  /// Normalize with per-batch statistics.
  Training,
};

enum class ParamRole { ConvWeight, ConvBias, LinearWeight, LinearBias, BnGamma, BnBeta };

struct Parameter {
  std::string node;
  ParamRole role;
  std::vector<double> value;
  std::vector<double> grad;
};

struct ForwardOptions {
  BnMode bn_mode = BnMode::Inference;
  /// Update batch-norm running statistics (Training mode only).
  bool update_running_stats = false;
  double bn_momentum = 0.1;
};

/// Double-precision working copy of a graph that runs batched forward and
/// reverse-mode backward passes. Parameters are copied in on construction and
/// written back (rounded to float32) with write_back().
class Executor {
 public:
  explicit Executor(const NetworkGraph& graph);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_[output_]; }

  /// Runs the graph on `batch` samples laid out NCHW. The returned span views
  /// an internal buffer valid until the next call.
  std::span<const double> forward(std::span<const double> input, int batch,
                                  const ForwardOptions& opts = {});

  /// Back-propagates d(loss)/d(output) from the most recent forward pass and
  /// overwrites every parameter's grad.
  void backward(std::span<const double> grad_output);

  /// Hash of the piecewise-linear choices made by the most recent forward
  /// pass (ReLU on/off per element, max-pool argmax). Two passes with equal
  /// signatures lie on the same smooth piece.
  std::uint64_t branch_signature() const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  /// Current gamma values of each batch-norm node, in topological order.
  std::vector<std::pair<std::string, std::vector<double>>> gammas() const;

  /// Copies parameters and running statistics back into `graph`, which must
  /// be the graph this executor was built from (or structurally identical).
  void write_back(NetworkGraph& graph) const;

 private:
  struct BnState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double eps = 1e-5;
    std::vector<double> xhat;
    std::vector<double> invstd;
    BnMode last_mode = BnMode::Inference;
  };
  struct NodeRt {
    LayerKind kind;
    std::vector<std::size_t> inputs;
    int weight = -1;  // index into params_
    int bias = -1;
    int bn = -1;  // index into bn_
    // conv/pool geometry
    int out_channels = 0, kernel_h = 1, kernel_w = 1, stride = 1, padding = 0;
    std::vector<int> select;  // ChannelSelect: kept input channel indices
    std::vector<std::int32_t> argmax;  // MaxPool
  };

  void resize(int batch);
  void forward_node(std::size_t i, const ForwardOptions& opts);
  void backward_node(std::size_t i);

  Shape input_shape_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> order_;
  std::vector<NodeRt> nodes_;
  std::vector<std::string> names_;
  std::vector<Parameter> params_;
  std::vector<BnState> bn_;
  std::vector<bool> needs_grad_;
  std::size_t input_ = 0;
  std::size_t output_ = 0;
  int batch_ = 0;
  std::vector<std::vector<double>> act_;
  std::vector<std::vector<double>> grad_;
  std::vector<double> col_;
  std::vector<double> dcol_;
};

enum class LossKind { CrossEntropy, Quadratic };

/// Mean loss over the batch. When `grad` is non-null it receives
/// d(mean loss)/d(logits). Quadratic loss is 0.5 * ||logits - onehot||^2.
double compute_loss(LossKind kind, std::span<const double> logits,
                    std::span<const int> labels, int num_classes,
                    std::vector<double>* grad);

/// Deterministic inference pass (batch-norm uses running statistics).
/// Throws ShapeError when the input shape differs from graph.input_shape().
Tensor forward(const NetworkGraph& graph, const Tensor& input);

}  // namespace otprune

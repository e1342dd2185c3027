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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace otprune {

enum class LayerKind {
  Input,
  Conv2D,
  Linear,
  BatchNorm,
  ReLU,
  AvgPool,
  MaxPool,
  GlobalAvgPool,
  Add,
  Concat,
  ChannelSelect,
  Output,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> layer_kind_from_string(std::string_view name);

/// Activation shape of a single sample, channel-major.
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::int64_t numel() const {
    return static_cast<std::int64_t>(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct InputParams {
  friend bool operator==(const InputParams&, const InputParams&) = default;
};
struct OutputParams {
  friend bool operator==(const OutputParams&, const OutputParams&) = default;
};
struct ReluParams {
  friend bool operator==(const ReluParams&, const ReluParams&) = default;
};
struct GlobalAvgPoolParams {
  friend bool operator==(const GlobalAvgPoolParams&, const GlobalAvgPoolParams&) = default;
};
struct AddParams {
  friend bool operator==(const AddParams&, const AddParams&) = default;
};
struct ConcatParams {
  friend bool operator==(const ConcatParams&, const ConcatParams&) = default;
};

struct Conv2DParams {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  // [out][in][kh][kw]
  std::vector<float> weight;
  // Empty when the convolution has no bias.
  std::vector<float> bias;

  friend bool operator==(const Conv2DParams&, const Conv2DParams&) = default;
  std::size_t filter_size() const {
    return static_cast<std::size_t>(in_channels) * kernel_h * kernel_w;
  }
};

/// Fully connected layer over the flattened (channel-major) input.
struct LinearParams {
  int in_features = 0;
  int out_features = 0;
  // [out][in]
  std::vector<float> weight;
  std::vector<float> bias;

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float eps = 1e-5f;

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
  int channels() const { return static_cast<int>(gamma.size()); }
};

struct PoolParams {
  int kernel = 2;
  int stride = 2;

  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

/// Keeps the input channels whose mask bit is set, in order.
struct ChannelSelectParams {
  std::vector<std::uint8_t> mask;

  friend bool operator==(const ChannelSelectParams&, const ChannelSelectParams&) = default;
  int kept() const;
};

using LayerParams =
    std::variant<InputParams, OutputParams, Conv2DParams, LinearParams,
                 BatchNormParams, ReluParams, PoolParams, GlobalAvgPoolParams,
                 AddParams, ConcatParams, ChannelSelectParams>;

struct LayerNode {
  std::string name;
  LayerKind kind = LayerKind::ReLU;
  std::vector<std::string> inputs;
  LayerParams params;

  template <typename T>
  T& as() {
    return std::get<T>(params);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(params);
  }
};

/// Returns a default-constructed parameter block of the right alternative.
LayerParams default_params(LayerKind kind);

/// Dataflow graph of layers. Every node produces exactly one tensor; edges
/// are the `inputs` references.
class NetworkGraph {
 public:
  NetworkGraph() = default;
  NetworkGraph(std::string name, Shape input_shape);

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  const Shape& input_shape() const { return input_shape_; }
  void set_input_shape(Shape s) { input_shape_ = s; }

  const std::vector<LayerNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  const LayerNode& node(std::size_t i) const { return nodes_[i]; }
  LayerNode& node(std::size_t i) { return nodes_[i]; }

  /// Appends a node; throws GraphError on a duplicate name.
  std::size_t add(LayerNode node);

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  const LayerNode& at(std::string_view name) const;
  LayerNode& at(std::string_view name);

  /// For each node, the indices of nodes consuming its output (one entry per
  /// edge, so a node consuming the same tensor twice appears twice).
  std::vector<std::vector<std::size_t>> consumers() const;

  /// Indices of each node's inputs. Throws GraphError on a dangling name.
  std::vector<std::vector<std::size_t>> producer_indices() const;

  /// Kahn order; nullopt when the graph has a cycle.
  std::optional<std::vector<std::size_t>> topological_order() const;

  /// Output shapes per node in node-index order. Throws GraphError if shapes
  /// cannot be propagated; use validate() for a full diagnosis.
  std::vector<Shape> infer_shapes() const;

  std::size_t input_index() const;
  std::size_t output_index() const;

  /// Names of BatchNorm nodes in topological order.
  std::vector<std::string> batchnorm_names() const;

  friend bool operator==(const NetworkGraph& a, const NetworkGraph& b);

 private:
  std::string name_;
  Shape input_shape_;
  std::vector<LayerNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool operator==(const LayerNode& a, const LayerNode& b);

struct Violation {
  std::string node;
  std::string message;
};

/// Returns every violated invariant; empty means the graph is valid.
std::vector<Violation> validate(const NetworkGraph& graph);

/// Throws GraphError listing the violations when the graph is invalid.
void require_valid(const NetworkGraph& graph);

}  // namespace otprune

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
#include <vector>

#include "otprune/graph.hpp"

namespace otprune {

/// Incrementally assembles a NetworkGraph, tracking activation shapes so
/// layer widths can be derived from the producer. Parameters are allocated
/// zero-filled; call initialize_weights() afterwards.
class GraphBuilder {
 public:
  GraphBuilder(std::string name, Shape input_shape);

  const std::string& input() const { return input_name_; }
  const Shape& shape(const std::string& node) const;

  std::string conv(const std::string& in, int out_channels, int kernel,
                   int stride = 1, int padding = 0, bool bias = false,
                   std::string name = {});
  std::string linear(const std::string& in, int out_features,
                     bool bias = true, std::string name = {});
  std::string batchnorm(const std::string& in, std::string name = {});
  std::string relu(const std::string& in, std::string name = {});
  std::string maxpool(const std::string& in, int kernel, int stride,
                      std::string name = {});
  std::string avgpool(const std::string& in, int kernel, int stride,
                      std::string name = {});
  std::string global_avgpool(const std::string& in, std::string name = {});
  std::string add(const std::vector<std::string>& ins, std::string name = {});
  std::string concat(const std::vector<std::string>& ins,
                     std::string name = {});
  std::string channel_select(const std::string& in,
                             std::vector<std::uint8_t> mask,
                             std::string name = {});

  /// conv -> batch-norm -> ReLU; returns the ReLU node.
  std::string conv_bn_relu(const std::string& in, int out_channels, int kernel,
                           int stride, int padding, const std::string& prefix);

  /// Adds the Output node fed by `out` and returns the finished graph.
  NetworkGraph finish(const std::string& out);

 private:
  std::string push(LayerKind kind, std::vector<std::string> inputs,
                   LayerParams params, std::string name);

  NetworkGraph graph_;
  std::string input_name_;
  std::unordered_map<std::string, Shape> shapes_;
  std::unordered_map<std::string, int> counters_;
};

/// Re-initializes every trainable tensor: conv/linear weights and biases from
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); batch-norm gamma = gamma_init, beta = 0,
/// running mean 0, running variance 1. Deterministic in `seed`.
void initialize_weights(NetworkGraph& graph, std::uint64_t seed,
                        float gamma_init = 0.5f);

struct PresetOptions {
  int num_classes = 10;
  /// Overrides the preset's default input shape (toy presets only need this).
  std::optional<Shape> input_shape;
  std::uint64_t seed = 0;
  float gamma_init = 0.5f;
};

/// Names accepted by build_preset.
std::vector<std::string> preset_names();

/// Builds one of: vgg14, resnet50_cifar, densenet121_cifar, toy_cnn, toy_mlp.
/// Throws ConfigError on an unknown name.
NetworkGraph build_preset(std::string_view name, const PresetOptions& opts);
NetworkGraph build_preset(std::string_view name, int num_classes);

}  // namespace otprune

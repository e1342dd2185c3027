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

#include "otprune/presets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "otprune/errors.hpp"
#include "otprune/rng.hpp"

namespace otprune {

GraphBuilder::GraphBuilder(std::string name, Shape input_shape)
    : graph_(std::move(name), input_shape), input_name_("input") {
  graph_.add(LayerNode{input_name_, LayerKind::Input, {}, InputParams{}});
  shapes_[input_name_] = input_shape;
}

const Shape& GraphBuilder::shape(const std::string& node) const {
  auto it = shapes_.find(node);
  if (it == shapes_.end()) throw GraphError("builder: unknown node " + node);
  return it->second;
}

std::string GraphBuilder::push(LayerKind kind, std::vector<std::string> inputs,
                               LayerParams params, std::string name) {
  if (name.empty()) {
    std::string base(to_string(kind));
    for (auto& c : base) c = static_cast<char>(std::tolower(c));
    name = base + std::to_string(++counters_[base]);
  }
  LayerNode node{name, kind, std::move(inputs), std::move(params)};
  std::vector<Shape> in;
  for (const auto& i : node.inputs) in.push_back(shape(i));
  graph_.add(node);
  Shape s{};
  switch (kind) {
    case LayerKind::Conv2D: {
      const auto& p = std::get<Conv2DParams>(node.params);
      s = {p.out_channels,
           (in[0].height + 2 * p.padding - p.kernel_h) / p.stride + 1,
           (in[0].width + 2 * p.padding - p.kernel_w) / p.stride + 1};
      break;
    }
    case LayerKind::Linear:
      s = {std::get<LinearParams>(node.params).out_features, 1, 1};
      break;
    case LayerKind::AvgPool:
    case LayerKind::MaxPool: {
      const auto& p = std::get<PoolParams>(node.params);
      s = {in[0].channels, (in[0].height - p.kernel) / p.stride + 1,
           (in[0].width - p.kernel) / p.stride + 1};
      break;
    }
    case LayerKind::GlobalAvgPool:
      s = {in[0].channels, 1, 1};
      break;
    case LayerKind::Concat:
      s = in[0];
      s.channels = 0;
      for (const auto& x : in) s.channels += x.channels;
      break;
    case LayerKind::ChannelSelect:
      s = in[0];
      s.channels = std::get<ChannelSelectParams>(node.params).kept();
      break;
    default:
      s = in.at(0);
      break;
  }
  shapes_[name] = s;
  return name;
}

std::string GraphBuilder::conv(const std::string& in, int out_channels,
                               int kernel, int stride, int padding, bool bias,
                               std::string name) {
  Conv2DParams p;
  p.in_channels = shape(in).channels;
  p.out_channels = out_channels;
  p.kernel_h = p.kernel_w = kernel;
  p.stride = stride;
  p.padding = padding;
  p.weight.assign(static_cast<std::size_t>(out_channels) * p.filter_size(),
                  0.0f);
  if (bias) p.bias.assign(static_cast<std::size_t>(out_channels), 0.0f);
  return push(LayerKind::Conv2D, {in}, std::move(p), std::move(name));
}

std::string GraphBuilder::linear(const std::string& in, int out_features,
                                 bool bias, std::string name) {
  LinearParams p;
  p.in_features = static_cast<int>(shape(in).numel());
  p.out_features = out_features;
  p.weight.assign(static_cast<std::size_t>(out_features) * p.in_features,
                  0.0f);
  if (bias) p.bias.assign(static_cast<std::size_t>(out_features), 0.0f);
  return push(LayerKind::Linear, {in}, std::move(p), std::move(name));
}

std::string GraphBuilder::batchnorm(const std::string& in, std::string name) {
  const auto c = static_cast<std::size_t>(shape(in).channels);
  BatchNormParams p;
  p.gamma.assign(c, 1.0f);
  p.beta.assign(c, 0.0f);
  p.running_mean.assign(c, 0.0f);
  p.running_var.assign(c, 1.0f);
  return push(LayerKind::BatchNorm, {in}, std::move(p), std::move(name));
}

std::string GraphBuilder::relu(const std::string& in, std::string name) {
  return push(LayerKind::ReLU, {in}, ReluParams{}, std::move(name));
}

std::string GraphBuilder::maxpool(const std::string& in, int kernel,
                                  int stride, std::string name) {
  return push(LayerKind::MaxPool, {in}, PoolParams{kernel, stride},
              std::move(name));
}

std::string GraphBuilder::avgpool(const std::string& in, int kernel,
                                  int stride, std::string name) {
  return push(LayerKind::AvgPool, {in}, PoolParams{kernel, stride},
              std::move(name));
}

std::string GraphBuilder::global_avgpool(const std::string& in,
                                         std::string name) {
  return push(LayerKind::GlobalAvgPool, {in}, GlobalAvgPoolParams{},
              std::move(name));
}

std::string GraphBuilder::add(const std::vector<std::string>& ins,
                              std::string name) {
  return push(LayerKind::Add, ins, AddParams{}, std::move(name));
}

std::string GraphBuilder::concat(const std::vector<std::string>& ins,
                                 std::string name) {
  return push(LayerKind::Concat, ins, ConcatParams{}, std::move(name));
}

std::string GraphBuilder::channel_select(const std::string& in,
                                         std::vector<std::uint8_t> mask,
                                         std::string name) {
  return push(LayerKind::ChannelSelect, {in},
              ChannelSelectParams{std::move(mask)}, std::move(name));
}

std::string GraphBuilder::conv_bn_relu(const std::string& in,
                                       int out_channels, int kernel,
                                       int stride, int padding,
                                       const std::string& prefix) {
  auto c = conv(in, out_channels, kernel, stride, padding, false,
                prefix + ".conv");
  auto b = batchnorm(c, prefix + ".bn");
  return relu(b, prefix + ".relu");
}

NetworkGraph GraphBuilder::finish(const std::string& out) {
  graph_.add(LayerNode{"output", LayerKind::Output, {out}, OutputParams{}});
  return std::move(graph_);
}

void initialize_weights(NetworkGraph& graph, std::uint64_t seed,
                        float gamma_init) {
  Rng rng(seed, "init");
  for (std::size_t i = 0; i < graph.size(); ++i) {
    auto& node = graph.node(i);
    if (auto* c = std::get_if<Conv2DParams>(&node.params)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(c->filter_size()));
      for (auto& w : c->weight) w = static_cast<float>(rng.uniform(-bound, bound));
      for (auto& b : c->bias) b = static_cast<float>(rng.uniform(-bound, bound));
    } else if (auto* l = std::get_if<LinearParams>(&node.params)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l->in_features));
      for (auto& w : l->weight) w = static_cast<float>(rng.uniform(-bound, bound));
      for (auto& b : l->bias) b = static_cast<float>(rng.uniform(-bound, bound));
    } else if (auto* b = std::get_if<BatchNormParams>(&node.params)) {
      std::fill(b->gamma.begin(), b->gamma.end(), gamma_init);
      std::fill(b->beta.begin(), b->beta.end(), 0.0f);
      std::fill(b->running_mean.begin(), b->running_mean.end(), 0.0f);
      std::fill(b->running_var.begin(), b->running_var.end(), 1.0f);
    }
  }
}

namespace {

NetworkGraph make_vgg14(const PresetOptions& o) {
  // 13 conv layers with BN before ReLU, then one FC layer.
  static constexpr int kCfg[] = {64,  64,  0,   128, 128, 0,   256, 256, 256,
                                 0,   512, 512, 512, 0,   512, 512, 512};
  GraphBuilder b("vgg14", o.input_shape.value_or(Shape{3, 32, 32}));
  std::string x = b.input();
  int conv_idx = 0;
  int pool_idx = 0;
  for (int width : kCfg) {
    if (width == 0) {
      x = b.maxpool(x, 2, 2, "pool" + std::to_string(++pool_idx));
    } else {
      x = b.conv_bn_relu(x, width, 3, 1, 1,
                         "features." + std::to_string(++conv_idx));
    }
  }
  x = b.avgpool(x, 2, 2, "avgpool");
  x = b.linear(x, o.num_classes, true, "classifier");
  return b.finish(x);
}

NetworkGraph make_resnet50(const PresetOptions& o) {
  GraphBuilder b("resnet50_cifar", o.input_shape.value_or(Shape{3, 32, 32}));
  // CIFAR stem: 3x3/1/1 convolution, no max-pooling.
  std::string x = b.conv_bn_relu(b.input(), 64, 3, 1, 1, "stem");
  static constexpr int kBlocks[] = {3, 4, 6, 3};
  static constexpr int kWidth[] = {64, 128, 256, 512};
  constexpr int kExpansion = 4;
  for (int stage = 0; stage < 4; ++stage) {
    for (int blk = 0; blk < kBlocks[stage]; ++blk) {
      const std::string p = "layer" + std::to_string(stage + 1) + "." +
                            std::to_string(blk);
      const int stride = (blk == 0 && stage > 0) ? 2 : 1;
      const int width = kWidth[stage];
      const int in_ch = b.shape(x).channels;
      // Canonical bottleneck: the first 1x1 convolution carries the stride.
      auto y = b.conv_bn_relu(x, width, 1, stride, 0, p + ".1");
      y = b.conv_bn_relu(y, width, 3, 1, 1, p + ".2");
      y = b.conv(y, width * kExpansion, 1, 1, 0, false, p + ".3.conv");
      y = b.batchnorm(y, p + ".3.bn");
      std::string skip = x;
      if (stride != 1 || in_ch != width * kExpansion) {
        skip = b.conv(x, width * kExpansion, 1, stride, 0, false,
                      p + ".downsample.conv");
        skip = b.batchnorm(skip, p + ".downsample.bn");
      }
      x = b.add({y, skip}, p + ".add");
      x = b.relu(x, p + ".relu");
    }
  }
  x = b.global_avgpool(x, "avgpool");
  x = b.linear(x, o.num_classes, true, "fc");
  return b.finish(x);
}

NetworkGraph make_densenet121(const PresetOptions& o) {
  GraphBuilder b("densenet121_cifar",
                 o.input_shape.value_or(Shape{3, 32, 32}));
  constexpr int kGrowth = 32;
  constexpr int kBottleneck = 4;
  static constexpr int kLayers[] = {6, 12, 24, 16};
  std::string x = b.conv(b.input(), 2 * kGrowth, 3, 1, 1, false, "conv0");
  x = b.batchnorm(x, "norm0");
  x = b.relu(x, "relu0");
  for (int block = 0; block < 4; ++block) {
    const std::string bp = "denseblock" + std::to_string(block + 1);
    for (int l = 0; l < kLayers[block]; ++l) {
      const std::string p = bp + ".layer" + std::to_string(l + 1);
      auto y = b.batchnorm(x, p + ".norm1");
      y = b.relu(y, p + ".relu1");
      y = b.conv(y, kBottleneck * kGrowth, 1, 1, 0, false, p + ".conv1");
      y = b.batchnorm(y, p + ".norm2");
      y = b.relu(y, p + ".relu2");
      y = b.conv(y, kGrowth, 3, 1, 1, false, p + ".conv2");
      x = b.concat({x, y}, p + ".concat");
    }
    if (block != 3) {
      const std::string tp = "transition" + std::to_string(block + 1);
      auto y = b.batchnorm(x, tp + ".norm");
      y = b.relu(y, tp + ".relu");
      y = b.conv(y, b.shape(y).channels / 2, 1, 1, 0, false, tp + ".conv");
      x = b.avgpool(y, 2, 2, tp + ".pool");
    }
  }
  x = b.batchnorm(x, "norm5");
  x = b.relu(x, "relu5");
  x = b.global_avgpool(x, "avgpool");
  x = b.linear(x, o.num_classes, true, "classifier");
  return b.finish(x);
}

NetworkGraph make_toy_cnn(const PresetOptions& o) {
  GraphBuilder b("toy_cnn", o.input_shape.value_or(Shape{3, 8, 8}));
  auto x = b.conv_bn_relu(b.input(), 16, 3, 1, 1, "block1");
  x = b.conv_bn_relu(x, 16, 3, 1, 1, "block2");
  x = b.maxpool(x, 2, 2, "pool");
  x = b.conv_bn_relu(x, 32, 3, 1, 1, "block3");
  x = b.global_avgpool(x, "gap");
  x = b.linear(x, o.num_classes, true, "fc");
  return b.finish(x);
}

NetworkGraph make_toy_mlp(const PresetOptions& o) {
  GraphBuilder b("toy_mlp", o.input_shape.value_or(Shape{3, 8, 8}));
  auto x = b.linear(b.input(), 16, true, "fc1");
  x = b.batchnorm(x, "bn1");
  x = b.relu(x, "relu1");
  x = b.linear(x, 16, true, "fc2");
  x = b.batchnorm(x, "bn2");
  x = b.relu(x, "relu2");
  x = b.linear(x, o.num_classes, true, "fc3");
  return b.finish(x);
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"vgg14", "resnet50_cifar", "densenet121_cifar", "toy_cnn", "toy_mlp"};
}

NetworkGraph build_preset(std::string_view name, const PresetOptions& opts) {
  if (opts.num_classes < 1) throw ConfigError("num_classes must be >= 1");
  NetworkGraph g;
  if (name == "vgg14") {
    g = make_vgg14(opts);
  } else if (name == "resnet50_cifar") {
    g = make_resnet50(opts);
  } else if (name == "densenet121_cifar") {
    g = make_densenet121(opts);
  } else if (name == "toy_cnn") {
    g = make_toy_cnn(opts);
  } else if (name == "toy_mlp") {
    g = make_toy_mlp(opts);
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  initialize_weights(g, opts.seed, opts.gamma_init);
  return g;
}

NetworkGraph build_preset(std::string_view name, int num_classes) {
  PresetOptions o;
  o.num_classes = num_classes;
  return build_preset(name, o);
}

}  // namespace otprune

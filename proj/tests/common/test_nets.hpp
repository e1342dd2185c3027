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
#include <string>
#include <vector>

#include "otprune/engine.hpp"
#include "otprune/graph.hpp"
#include "otprune/presets.hpp"
#include "otprune/rng.hpp"

namespace otprune::testing {

/// conv(8)-BN-ReLU-conv(4)-BN-ReLU-GAP-linear.
inline NetworkGraph sequential_net(std::uint64_t seed, int width = 8) {
  GraphBuilder b("sequential", {3, 6, 6});
  auto x = b.conv_bn_relu(b.input(), width, 3, 1, 1, "a");
  x = b.conv_bn_relu(x, 4, 3, 1, 1, "b");
  x = b.global_avgpool(x);
  x = b.linear(x, 3, true, "fc");
  auto g = b.finish(x);
  initialize_weights(g, seed);
  return g;
}

/// Stem, one residual block with an identity skip, one with a projection.
inline NetworkGraph residual_net(std::uint64_t seed) {
  GraphBuilder b("residual", {3, 6, 6});
  auto stem = b.conv_bn_relu(b.input(), 6, 3, 1, 1, "stem");
  auto r = b.conv_bn_relu(stem, 5, 3, 1, 1, "block1.1");
  r = b.conv(r, 6, 3, 1, 1, false, "block1.2.conv");
  r = b.batchnorm(r, "block1.2.bn");
  auto x = b.relu(b.add({r, stem}, "block1.add"), "block1.relu");
  auto m = b.conv_bn_relu(x, 4, 3, 2, 1, "block2.1");
  m = b.conv(m, 8, 1, 1, 0, false, "block2.2.conv");
  m = b.batchnorm(m, "block2.2.bn");
  auto d = b.conv(x, 8, 1, 2, 0, false, "block2.down.conv");
  d = b.batchnorm(d, "block2.down.bn");
  x = b.relu(b.add({m, d}, "block2.add"), "block2.relu");
  x = b.global_avgpool(x);
  x = b.linear(x, 3, true, "fc");
  auto g = b.finish(x);
  initialize_weights(g, seed);
  return g;
}

/// Pre-activation dense block of two layers, a transition and a head.
inline NetworkGraph dense_net(std::uint64_t seed) {
  GraphBuilder b("dense", {3, 6, 6});
  auto x = b.conv(b.input(), 6, 3, 1, 1, false, "conv0");
  for (int l = 1; l <= 2; ++l) {
    const std::string p = "dense" + std::to_string(l);
    auto y = b.relu(b.batchnorm(x, p + ".norm1"), p + ".relu1");
    y = b.conv(y, 8, 1, 1, 0, false, p + ".conv1");
    y = b.relu(b.batchnorm(y, p + ".norm2"), p + ".relu2");
    y = b.conv(y, 4, 3, 1, 1, false, p + ".conv2");
    x = b.concat({x, y}, p + ".cat");
  }
  x = b.relu(b.batchnorm(x, "trans.norm"), "trans.relu");
  x = b.conv(x, 7, 1, 1, 0, false, "trans.conv");
  x = b.avgpool(x, 2, 2, "trans.pool");
  x = b.relu(b.batchnorm(x, "norm5"), "relu5");
  x = b.global_avgpool(x);
  x = b.linear(x, 3, true, "fc");
  auto g = b.finish(x);
  initialize_weights(g, seed);
  return g;
}

/// Gives every batch-norm random statistics and affine parameters.
inline void randomize_batchnorms(NetworkGraph& g, std::uint64_t seed) {
  Rng rng(seed, "bn");
  for (const auto& name : g.batchnorm_names()) {
    auto& bn = g.at(name).as<BatchNormParams>();
    for (std::size_t c = 0; c < bn.gamma.size(); ++c) {
      bn.gamma[c] = static_cast<float>(rng.uniform(0.2, 1.5) * (rng.below(2) ? 1 : -1));
      bn.beta[c] = static_cast<float>(rng.uniform(-0.5, 0.5));
      bn.running_mean[c] = static_cast<float>(rng.uniform(-0.3, 0.3));
      bn.running_var[c] = static_cast<float>(rng.uniform(0.5, 2.0));
    }
  }
}

inline Tensor random_input(const Shape& shape, int batch, std::uint64_t seed) {
  Rng rng(seed, "input");
  Tensor t{batch, shape, {}};
  for (std::int64_t i = 0; i < batch * shape.numel(); ++i) t.data.push_back(rng.uniform(-1, 1));
  return t;
}

/// Small random conv graph: one or two conv-BN(-ReLU) stages, a max or
/// average pool, global pooling and a linear head. Stays under 5k params.
inline NetworkGraph random_small_graph(std::uint64_t seed) {
  Rng rng(seed, "random-graph");
  const int in_ch = 1 + static_cast<int>(rng.below(3));
  const int size = 5 + static_cast<int>(rng.below(3));
  GraphBuilder b("random", {in_ch, size, size});
  std::string x = b.input();
  const int stages = 1 + static_cast<int>(rng.below(2));
  for (int s = 0; s < stages; ++s) {
    const int width = 2 + static_cast<int>(rng.below(5));
    const int kernel = rng.below(2) ? 3 : 1;
    x = b.conv(x, width, kernel, 1, kernel / 2, rng.below(2) == 1);
    x = b.batchnorm(x);
    if (rng.below(3) != 0) x = b.relu(x);
  }
  x = rng.below(2) ? b.maxpool(x, 2, 2) : b.avgpool(x, 2, 2);
  x = b.global_avgpool(x);
  x = b.linear(x, 2 + static_cast<int>(rng.below(3)), true);
  auto g = b.finish(x);
  initialize_weights(g, seed);
  randomize_batchnorms(g, seed);
  return g;
}

/// Sets gamma and beta of the listed channels to zero.
inline void zero_channels(NetworkGraph& g, const std::string& bn, const std::vector<int>& channels) {
  auto& p = g.at(bn).as<BatchNormParams>();
  for (int c : channels) {
    p.gamma[c] = 0.0f;
    p.beta[c] = 0.0f;
  }
}

}  // namespace otprune::testing

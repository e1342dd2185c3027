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

#include "otprune/graph.hpp"

namespace otprune {

/// FLOPs are multiply-accumulates (1 MAC = 1 FLOP): convolution and linear
/// layers, plus one folded scale-and-shift per batch-norm output element.
/// Params counts every stored scalar: weights, biases, and batch-norm
/// gamma/beta/running mean/running variance.
struct ComplexityCount {
  std::int64_t flops = 0;
  std::int64_t params = 0;

  ComplexityCount& operator+=(const ComplexityCount& o) {
    flops += o.flops;
    params += o.params;
    return *this;
  }
  friend bool operator==(const ComplexityCount&, const ComplexityCount&) =
      default;
};

struct NodeComplexity {
  std::string node;
  LayerKind kind;
  ComplexityCount count;
};

/// Per-node contributions, in node order. Requires a valid graph.
std::vector<NodeComplexity> complexity_breakdown(const NetworkGraph& graph);

/// Sum of complexity_breakdown().
ComplexityCount count_complexity(const NetworkGraph& graph);

}  // namespace otprune

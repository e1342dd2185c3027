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

#include "otprune/complexity.hpp"

namespace otprune {

std::vector<NodeComplexity> complexity_breakdown(const NetworkGraph& graph) {
  require_valid(graph);
  const auto shapes = graph.infer_shapes();
  std::vector<NodeComplexity> out;
  out.reserve(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& n = graph.node(i);
    ComplexityCount c;
    if (const auto* conv = std::get_if<Conv2DParams>(&n.params)) {
      const Shape& s = shapes[i];
      c.flops = static_cast<std::int64_t>(s.height) * s.width *
                conv->out_channels * static_cast<std::int64_t>(conv->filter_size());
      c.params = static_cast<std::int64_t>(conv->weight.size() + conv->bias.size());
    } else if (const auto* lin = std::get_if<LinearParams>(&n.params)) {
      c.flops = static_cast<std::int64_t>(lin->in_features) * lin->out_features;
      c.params = static_cast<std::int64_t>(lin->weight.size() + lin->bias.size());
    } else if (const auto* bn = std::get_if<BatchNormParams>(&n.params)) {
      c.flops = shapes[i].numel();
      c.params = 4 * static_cast<std::int64_t>(bn->channels());
    }
    out.push_back({n.name, n.kind, c});
  }
  return out;
}

ComplexityCount count_complexity(const NetworkGraph& graph) {
  ComplexityCount total;
  for (const auto& nc : complexity_breakdown(graph)) total += nc.count;
  return total;
}

}  // namespace otprune

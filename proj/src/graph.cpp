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

#include "otprune/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <sstream>

#include "otprune/errors.hpp"

namespace otprune {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 12> kKindNames{{
    {LayerKind::Input, "Input"},
    {LayerKind::Conv2D, "Conv2D"},
    {LayerKind::Linear, "Linear"},
    {LayerKind::BatchNorm, "BatchNorm"},
    {LayerKind::ReLU, "ReLU"},
    {LayerKind::AvgPool, "AvgPool"},
    {LayerKind::MaxPool, "MaxPool"},
    {LayerKind::GlobalAvgPool, "GlobalAvgPool"},
    {LayerKind::Add, "Add"},
    {LayerKind::Concat, "Concat"},
    {LayerKind::ChannelSelect, "ChannelSelect"},
    {LayerKind::Output, "Output"},
}};

bool params_match_kind(const LayerNode& n) {
  switch (n.kind) {
    case LayerKind::Input:
      return std::holds_alternative<InputParams>(n.params);
    case LayerKind::Output:
      return std::holds_alternative<OutputParams>(n.params);
    case LayerKind::Conv2D:
      return std::holds_alternative<Conv2DParams>(n.params);
    case LayerKind::Linear:
      return std::holds_alternative<LinearParams>(n.params);
    case LayerKind::BatchNorm:
      return std::holds_alternative<BatchNormParams>(n.params);
    case LayerKind::ReLU:
      return std::holds_alternative<ReluParams>(n.params);
    case LayerKind::AvgPool:
    case LayerKind::MaxPool:
      return std::holds_alternative<PoolParams>(n.params);
    case LayerKind::GlobalAvgPool:
      return std::holds_alternative<GlobalAvgPoolParams>(n.params);
    case LayerKind::Add:
      return std::holds_alternative<AddParams>(n.params);
    case LayerKind::Concat:
      return std::holds_alternative<ConcatParams>(n.params);
    case LayerKind::ChannelSelect:
      return std::holds_alternative<ChannelSelectParams>(n.params);
  }
  return false;
}

bool is_junction(LayerKind k) {
  return k == LayerKind::Add || k == LayerKind::Concat;
}

// Computes the output shape of one node, or an error message.
std::variant<Shape, std::string> output_shape(const NetworkGraph& g,
                                              const LayerNode& n,
                                              const std::vector<Shape>& in) {
  auto single = [&]() -> const Shape& { return in.front(); };
  switch (n.kind) {
    case LayerKind::Input:
      return g.input_shape();
    case LayerKind::Output:
    case LayerKind::ReLU:
      return single();
    case LayerKind::Conv2D: {
      const auto& p = n.as<Conv2DParams>();
      const Shape& s = single();
      if (p.in_channels != s.channels) {
        return "channel mismatch: conv expects " +
               std::to_string(p.in_channels) + " input channels, got " +
               std::to_string(s.channels);
      }
      if (p.out_channels < 1 || p.kernel_h < 1 || p.kernel_w < 1 ||
          p.stride < 1 || p.padding < 0) {
        return std::string("invalid conv geometry");
      }
      const int oh = (s.height + 2 * p.padding - p.kernel_h) / p.stride + 1;
      const int ow = (s.width + 2 * p.padding - p.kernel_w) / p.stride + 1;
      if (s.height + 2 * p.padding < p.kernel_h ||
          s.width + 2 * p.padding < p.kernel_w || oh < 1 || ow < 1) {
        return std::string("conv kernel larger than padded input");
      }
      return Shape{p.out_channels, oh, ow};
    }
    case LayerKind::Linear: {
      const auto& p = n.as<LinearParams>();
      if (p.in_features != single().numel()) {
        return "feature mismatch: linear expects " +
               std::to_string(p.in_features) + " inputs, got " +
               std::to_string(single().numel());
      }
      if (p.out_features < 1) return std::string("invalid linear geometry");
      return Shape{p.out_features, 1, 1};
    }
    case LayerKind::BatchNorm: {
      const auto& p = n.as<BatchNormParams>();
      if (p.channels() != single().channels) {
        return "channel mismatch: batch-norm has " +
               std::to_string(p.channels()) + " channels, input has " +
               std::to_string(single().channels);
      }
      return single();
    }
    case LayerKind::AvgPool:
    case LayerKind::MaxPool: {
      const auto& p = n.as<PoolParams>();
      const Shape& s = single();
      if (p.kernel < 1 || p.stride < 1 || s.height < p.kernel ||
          s.width < p.kernel) {
        return std::string("invalid pooling geometry");
      }
      return Shape{s.channels, (s.height - p.kernel) / p.stride + 1,
                   (s.width - p.kernel) / p.stride + 1};
    }
    case LayerKind::GlobalAvgPool:
      return Shape{single().channels, 1, 1};
    case LayerKind::Add: {
      for (const auto& s : in) {
        if (!(s == in.front())) {
          return std::string(
              "channel mismatch: add inputs must have identical shapes");
        }
      }
      return in.front();
    }
    case LayerKind::Concat: {
      Shape out = in.front();
      out.channels = 0;
      for (const auto& s : in) {
        if (s.height != out.height || s.width != out.width) {
          return std::string("concat inputs differ in spatial size");
        }
        out.channels += s.channels;
      }
      return out;
    }
    case LayerKind::ChannelSelect: {
      const auto& p = n.as<ChannelSelectParams>();
      if (static_cast<int>(p.mask.size()) != single().channels) {
        return "channel mismatch: channel-select mask has " +
               std::to_string(p.mask.size()) + " entries, input has " +
               std::to_string(single().channels);
      }
      if (p.kept() == 0) return std::string("channel-select keeps no channel");
      return Shape{p.kept(), single().height, single().width};
    }
  }
  return std::string("unknown kind");
}

// Checks per-node parameter invariants that do not depend on shapes.
void check_params(const LayerNode& n, std::vector<Violation>& out) {
  auto bad = [&](std::string msg) { out.push_back({n.name, std::move(msg)}); };
  if (const auto* c = std::get_if<Conv2DParams>(&n.params)) {
    const std::size_t expect = static_cast<std::size_t>(c->out_channels) *
                               c->filter_size();
    if (c->weight.size() != expect) {
      bad("conv weight has " + std::to_string(c->weight.size()) +
          " entries, expected " + std::to_string(expect));
    }
    if (!c->bias.empty() &&
        c->bias.size() != static_cast<std::size_t>(c->out_channels)) {
      bad("conv bias length differs from out_channels");
    }
  } else if (const auto* l = std::get_if<LinearParams>(&n.params)) {
    const std::size_t expect =
        static_cast<std::size_t>(l->out_features) * l->in_features;
    if (l->weight.size() != expect) bad("linear weight size mismatch");
    if (!l->bias.empty() &&
        l->bias.size() != static_cast<std::size_t>(l->out_features)) {
      bad("linear bias length differs from out_features");
    }
  } else if (const auto* b = std::get_if<BatchNormParams>(&n.params)) {
    const std::size_t c = b->gamma.size();
    if (c == 0) bad("batch-norm has no channels");
    if (b->beta.size() != c || b->running_mean.size() != c ||
        b->running_var.size() != c) {
      bad("batch-norm parameter vectors differ in length");
    }
    if (!(b->eps > 0.0f)) bad("batch-norm eps must be positive");
    for (float v : b->running_var) {
      if (!(v >= 0.0f)) {
        bad("batch-norm running variance must be non-negative");
        break;
      }
    }
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

int ChannelSelectParams::kept() const {
  return static_cast<int>(std::count_if(mask.begin(), mask.end(),
                                        [](std::uint8_t m) { return m != 0; }));
}

LayerParams default_params(LayerKind kind) {
  switch (kind) {
    case LayerKind::Input:
      return InputParams{};
    case LayerKind::Output:
      return OutputParams{};
    case LayerKind::Conv2D:
      return Conv2DParams{};
    case LayerKind::Linear:
      return LinearParams{};
    case LayerKind::BatchNorm:
      return BatchNormParams{};
    case LayerKind::ReLU:
      return ReluParams{};
    case LayerKind::AvgPool:
    case LayerKind::MaxPool:
      return PoolParams{};
    case LayerKind::GlobalAvgPool:
      return GlobalAvgPoolParams{};
    case LayerKind::Add:
      return AddParams{};
    case LayerKind::Concat:
      return ConcatParams{};
    case LayerKind::ChannelSelect:
      return ChannelSelectParams{};
  }
  return ReluParams{};
}

NetworkGraph::NetworkGraph(std::string name, Shape input_shape)
    : name_(std::move(name)), input_shape_(input_shape) {}

std::size_t NetworkGraph::add(LayerNode node) {
  if (index_.count(node.name) != 0) {
    throw GraphError("duplicate node name '" + node.name + "'");
  }
  const std::size_t idx = nodes_.size();
  index_.emplace(node.name, idx);
  nodes_.push_back(std::move(node));
  return idx;
}

std::optional<std::size_t> NetworkGraph::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t NetworkGraph::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw GraphError("no node named '" + std::string(name) + "'");
  return *idx;
}

const LayerNode& NetworkGraph::at(std::string_view name) const {
  return nodes_[index_of(name)];
}

LayerNode& NetworkGraph::at(std::string_view name) {
  return nodes_[index_of(name)];
}

std::vector<std::vector<std::size_t>> NetworkGraph::producer_indices() const {
  std::vector<std::vector<std::size_t>> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& in : nodes_[i].inputs) out[i].push_back(index_of(in));
  }
  return out;
}

std::vector<std::vector<std::size_t>> NetworkGraph::consumers() const {
  std::vector<std::vector<std::size_t>> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& in : nodes_[i].inputs) {
      if (auto p = find(in)) out[*p].push_back(i);
    }
  }
  return out;
}

std::optional<std::vector<std::size_t>> NetworkGraph::topological_order()
    const {
  const std::size_t n = nodes_.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& in : nodes_[i].inputs) {
      auto p = find(in);
      if (!p) continue;
      succ[*p].push_back(i);
      ++indegree[i];
    }
  }
  // Stable: among ready nodes, lowest index first.
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    const std::size_t u = *it;
    ready.erase(it);
    order.push_back(u);
    for (std::size_t v : succ[u]) {
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

std::vector<Shape> NetworkGraph::infer_shapes() const {
  auto order = topological_order();
  if (!order) throw GraphError("graph is not acyclic");
  const auto producers = producer_indices();
  std::vector<Shape> shapes(nodes_.size());
  for (std::size_t i : *order) {
    const auto& n = nodes_[i];
    std::vector<Shape> in;
    for (std::size_t p : producers[i]) in.push_back(shapes[p]);
    if (in.empty() && n.kind != LayerKind::Input) {
      throw GraphError("node '" + n.name + "' has no inputs");
    }
    auto r = output_shape(*this, n, in);
    if (auto* msg = std::get_if<std::string>(&r)) {
      throw GraphError(n.name + ": " + *msg);
    }
    shapes[i] = std::get<Shape>(r);
  }
  return shapes;
}

std::size_t NetworkGraph::input_index() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == LayerKind::Input) return i;
  }
  throw GraphError("graph has no Input node");
}

std::size_t NetworkGraph::output_index() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == LayerKind::Output) return i;
  }
  throw GraphError("graph has no Output node");
}

std::vector<std::string> NetworkGraph::batchnorm_names() const {
  std::vector<std::string> out;
  auto order = topological_order();
  if (!order) throw GraphError("graph is not acyclic");
  for (std::size_t i : *order) {
    if (nodes_[i].kind == LayerKind::BatchNorm) out.push_back(nodes_[i].name);
  }
  return out;
}

bool operator==(const LayerNode& a, const LayerNode& b) {
  return a.name == b.name && a.kind == b.kind && a.inputs == b.inputs &&
         a.params == b.params;
}

bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
  return a.name_ == b.name_ && a.input_shape_ == b.input_shape_ &&
         a.nodes_ == b.nodes_;
}

std::vector<Violation> validate(const NetworkGraph& g) {
  std::vector<Violation> out;
  const auto& nodes = g.nodes();

  int inputs = 0;
  int outputs = 0;
  for (const auto& n : nodes) {
    if (n.kind == LayerKind::Input) ++inputs;
    if (n.kind == LayerKind::Output) ++outputs;
  }
  if (inputs != 1) {
    out.push_back({"", "graph must have exactly one Input node, found " +
                           std::to_string(inputs)});
  }
  if (outputs != 1) {
    out.push_back({"", "graph must have exactly one Output node, found " +
                           std::to_string(outputs)});
  }
  const Shape& is = g.input_shape();
  if (is.channels < 1 || is.height < 1 || is.width < 1) {
    out.push_back({"", "input shape must be positive"});
  }

  bool references_ok = true;
  for (const auto& n : nodes) {
    if (!params_match_kind(n)) {
      out.push_back({n.name, "parameters do not match layer kind " +
                                 std::string(to_string(n.kind))});
      references_ok = false;
      continue;
    }
    for (const auto& in : n.inputs) {
      if (!g.find(in)) {
        out.push_back({n.name, "unknown input '" + in + "'"});
        references_ok = false;
      }
    }
    const std::size_t arity = n.inputs.size();
    if (n.kind == LayerKind::Input) {
      if (arity != 0) out.push_back({n.name, "Input node must not have inputs"});
    } else if (is_junction(n.kind)) {
      if (arity < 1) out.push_back({n.name, "junction has no inputs"});
    } else if (arity != 1) {
      out.push_back({n.name, std::string(to_string(n.kind)) +
                                 " must have exactly one input, has " +
                                 std::to_string(arity)});
      references_ok = false;
    }
    check_params(n, out);
  }
  if (!references_ok) return out;

  const auto consumers = g.consumers();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.kind == LayerKind::Output) {
      if (!consumers[i].empty()) {
        out.push_back({n.name, "Output node must not have consumers"});
      }
    } else if (consumers[i].empty()) {
      out.push_back({n.name, "output is never consumed"});
    }
  }

  auto order = g.topological_order();
  if (!order) {
    out.push_back({"", "not acyclic: graph contains a cycle"});
    return out;
  }

  const auto producers = g.producer_indices();
  std::vector<std::optional<Shape>> shapes(nodes.size());
  for (std::size_t i : *order) {
    const auto& n = nodes[i];
    std::vector<Shape> in;
    bool ready = true;
    for (std::size_t p : producers[i]) {
      if (!shapes[p]) {
        ready = false;
        break;
      }
      in.push_back(*shapes[p]);
    }
    if (!ready || (in.empty() && n.kind != LayerKind::Input)) continue;
    auto r = output_shape(g, n, in);
    if (auto* msg = std::get_if<std::string>(&r)) {
      out.push_back({n.name, *msg});
    } else {
      shapes[i] = std::get<Shape>(r);
    }
  }
  return out;
}

void require_valid(const NetworkGraph& graph) {
  auto v = validate(graph);
  if (v.empty()) return;
  std::ostringstream msg;
  msg << "invalid graph '" << graph.name() << "':";
  for (const auto& x : v) {
    msg << "\n  " << (x.node.empty() ? "<graph>" : x.node) << ": "
        << x.message;
  }
  throw GraphError(msg.str());
}

}  // namespace otprune

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

#include "otprune/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "otprune/complexity.hpp"
#include "otprune/errors.hpp"

namespace otprune {

using Mask = std::vector<std::uint8_t>;

std::string_view to_string(PruneMethod method) {
  return method == PruneMethod::OT ? "OT" : "NS";
}

PruneMethod prune_method_from_string(std::string_view name) {
  std::string up(name);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "OT") return PruneMethod::OT;
  if (up == "NS") return PruneMethod::NS;
  throw ConfigError("unknown prune method '" + std::string(name) + "' (expected OT or NS)");
}

std::string_view to_string(BnPruneMode mode) {
  switch (mode) {
    case BnPruneMode::Structural: return "structural";
    case BnPruneMode::ChannelSelect: return "channel_select";
    case BnPruneMode::Pinned: return "pinned";
  }
  return "?";
}

namespace {

BnPruneMode mode_from_string(std::string_view s) {
  if (s == "structural") return BnPruneMode::Structural;
  if (s == "channel_select") return BnPruneMode::ChannelSelect;
  if (s == "pinned") return BnPruneMode::Pinned;
  throw SerializationError("unknown batch-norm prune mode '" + std::string(s) + "'");
}

bool is_weighted(LayerKind k) { return k == LayerKind::Conv2D || k == LayerKind::Linear; }

bool passes_channels(LayerKind k) {
  return k == LayerKind::ReLU || k == LayerKind::MaxPool || k == LayerKind::AvgPool ||
         k == LayerKind::GlobalAvgPool;
}

bool all_set(const Mask& m) {
  return std::all_of(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; });
}

int count_set(const Mask& m) {
  return static_cast<int>(std::count_if(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; }));
}

template <typename T>
std::vector<T> select(const std::vector<T>& v, const Mask& m) {
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (m[i]) out.push_back(v[i]);
  }
  return out;
}

std::vector<BnPruneMode> bn_modes(const NetworkGraph& g,
                                  const std::vector<std::vector<std::size_t>>& consumers,
                                  const std::vector<std::vector<std::size_t>>& producers) {
  std::vector<BnPruneMode> modes(g.size(), BnPruneMode::Structural);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.node(i).kind != LayerKind::BatchNorm) continue;
    std::vector<std::size_t> stack{i};
    std::set<std::size_t> seen;
    bool pinned = false;
    while (!stack.empty() && !pinned) {
      const std::size_t n = stack.back();
      stack.pop_back();
      for (std::size_t c : consumers[n]) {
        const LayerKind k = g.node(c).kind;
        if (k == LayerKind::Add || k == LayerKind::Output) pinned = true;
        if (passes_channels(k) && seen.insert(c).second) stack.push_back(c);
      }
    }
    const std::size_t p = producers[i].front();
    if (pinned) {
      modes[i] = BnPruneMode::Pinned;
    } else if (is_weighted(g.node(p).kind) && consumers[p].size() == 1) {
      modes[i] = BnPruneMode::Structural;
    } else {
      modes[i] = BnPruneMode::ChannelSelect;
    }
  }
  return modes;
}

}  // namespace

std::vector<std::pair<std::string, BnPruneMode>> classify_batchnorms(const NetworkGraph& graph) {
  require_valid(graph);
  const auto modes = bn_modes(graph, graph.consumers(), graph.producer_indices());
  std::vector<std::pair<std::string, BnPruneMode>> out;
  const auto order = *graph.topological_order();
  for (std::size_t i : order) {
    if (graph.node(i).kind == LayerKind::BatchNorm) out.emplace_back(graph.node(i).name, modes[i]);
  }
  return out;
}

std::vector<Branch> find_branches(const NetworkGraph& graph) {
  require_valid(graph);
  const auto consumers = graph.consumers();
  const auto producers = graph.producer_indices();
  std::vector<Branch> out;
  const auto order = *graph.topological_order();
  for (std::size_t j : order) {
    const auto& junction = graph.node(j);
    if (junction.kind != LayerKind::Add && junction.kind != LayerKind::Concat) continue;
    if (producers[j].size() < 2) continue;
    for (std::size_t q : producers[j]) {
      Branch b{graph.node(q).name, junction.name, {}, {}};
      while (graph.node(q).kind != LayerKind::Input && consumers[q].size() == 1 &&
             producers[q].size() == 1) {
        b.nodes.push_back(graph.node(q).name);
        if (b.last_bn.empty() && graph.node(q).kind == LayerKind::BatchNorm) {
          b.last_bn = graph.node(q).name;
        }
        q = producers[q].front();
      }
      if (!b.last_bn.empty()) out.push_back(std::move(b));
    }
  }
  return out;
}

int LayerPlan::kept() const { return count_set(keep); }

const LayerPlan* PrunePlan::find(std::string_view bn) const {
  for (const auto& l : layers) {
    if (l.bn == bn) return &l;
  }
  return nullptr;
}

std::size_t PrunePlan::pruned_channels(const NetworkGraph& graph) const {
  std::set<std::string> removed;
  for (const auto& b : find_branches(graph)) {
    if (std::find(branches_to_remove.begin(), branches_to_remove.end(), b.id) !=
        branches_to_remove.end()) {
      removed.insert(b.nodes.begin(), b.nodes.end());
    }
  }
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += removed.count(l.bn) ? l.keep.size() : l.keep.size() - l.kept();
  }
  return n;
}

namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_nan(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

nlohmann::json stats_json(const SeparationStats& s) {
  return {{"alpha", number_or_null(s.alpha)},
          {"beta", number_or_null(s.beta)},
          {"ratio_n_i", number_or_null(s.ratio_n_i)},
          {"lower_bound", number_or_null(s.lower_bound)},
          {"upper_bound", number_or_null(s.upper_bound)},
          {"negligible", s.negligible},
          {"important", s.important},
          {"one_sided", s.one_sided}};
}

SeparationStats stats_from_json(const nlohmann::json& j) {
  SeparationStats s;
  s.alpha = number_or_nan(j.at("alpha"));
  s.beta = number_or_nan(j.at("beta"));
  s.ratio_n_i = number_or_nan(j.at("ratio_n_i"));
  s.lower_bound = number_or_nan(j.at("lower_bound"));
  s.upper_bound = number_or_nan(j.at("upper_bound"));
  s.negligible = j.at("negligible").get<std::size_t>();
  s.important = j.at("important").get<std::size_t>();
  s.one_sided = j.at("one_sided").get<bool>();
  return s;
}

}  // namespace

nlohmann::json PrunePlan::to_json() const {
  nlohmann::json j;
  j["method"] = std::string(to_string(method));
  j["delta"] = threshold.delta;
  j["p"] = threshold.p;
  j["ns_percent"] = ns_percent;
  j["shift_log10"] = shift_log10;
  j["lambda"] = lambda;
  j["gamma_g"] = number_or_null(gamma_g);
  j["branches_to_remove"] = branches_to_remove;
  j["warnings"] = warnings;
  auto& arr = j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) {
    std::vector<int> keep(l.keep.begin(), l.keep.end());
    arr.push_back({{"bn", l.bn},
                   {"mode", std::string(to_string(l.mode))},
                   {"threshold", number_or_null(l.threshold)},
                   {"kept", l.kept()},
                   {"total", l.total()},
                   {"keep", keep},
                   {"stats", stats_json(l.stats)}});
  }
  return j;
}

PrunePlan PrunePlan::from_json(const nlohmann::json& j) {
  try {
    PrunePlan p;
    p.method = prune_method_from_string(j.at("method").get<std::string>());
    p.threshold.delta = j.at("delta").get<double>();
    p.threshold.p = j.at("p").get<double>();
    p.ns_percent = j.at("ns_percent").get<double>();
    p.shift_log10 = j.at("shift_log10").get<double>();
    p.lambda = j.at("lambda").get<double>();
    p.gamma_g = number_or_nan(j.at("gamma_g"));
    p.branches_to_remove = j.at("branches_to_remove").get<std::vector<std::string>>();
    p.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& l : j.at("layers")) {
      LayerPlan lp;
      lp.bn = l.at("bn").get<std::string>();
      lp.mode = mode_from_string(l.at("mode").get<std::string>());
      lp.threshold = number_or_nan(l.at("threshold"));
      for (int b : l.at("keep").get<std::vector<int>>()) lp.keep.push_back(b ? 1 : 0);
      lp.stats = stats_from_json(l.at("stats"));
      p.layers.push_back(std::move(lp));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("malformed prune plan: ") + e.what());
  }
}

PrunePlan plan_prune(const NetworkGraph& graph, const PlanOptions& opts) {
  require_valid(graph);
  opts.threshold.validate();
  const auto modes = classify_batchnorms(graph);
  if (modes.empty()) throw ConfigError("graph has no batch-norm layers to prune");

  PrunePlan plan;
  plan.method = opts.method;
  plan.threshold = opts.threshold;
  plan.ns_percent = opts.method == PruneMethod::NS ? opts.ns_percent : 0.0;
  plan.shift_log10 = opts.method == PruneMethod::OT ? opts.shift_log10 : 0.0;
  plan.lambda = opts.lambda;

  std::vector<GammaSet> sets;
  for (const auto& [name, mode] : modes) {
    sets.push_back(GammaSet::from_scales(
        std::span<const float>(graph.at(name).as<BatchNormParams>().gamma), name));
  }
  const double scale = std::pow(10.0, plan.shift_log10);
  if (opts.method == PruneMethod::OT) {
    plan.gamma_g = global_threshold(sets, opts.threshold) * scale;
  } else {
    plan.gamma_g = ns_threshold(merge(sets), opts.ns_percent);
  }

  for (std::size_t li = 0; li < modes.size(); ++li) {
    const auto& set = sets[li];
    LayerPlan lp;
    lp.bn = modes[li].first;
    lp.mode = modes[li].second;
    lp.threshold = opts.method == PruneMethod::OT
                       ? find_threshold(set, opts.threshold) * scale
                       : plan.gamma_g;
    lp.keep.resize(set.size());
    for (std::size_t c = 0; c < set.size(); ++c) lp.keep[c] = set.values[c] >= lp.threshold;
    if (opts.method == PruneMethod::NS && opts.ns_layer_cap) {
      const auto cap = static_cast<std::size_t>(std::floor(*opts.ns_layer_cap * set.size()));
      std::vector<std::size_t> order(set.size());
      for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return set.values[a] < set.values[b]; });
      for (std::size_t r = cap; r < order.size(); ++r) lp.keep[order[r]] = 1;
    }
    lp.stats = separation_stats(set, lp.threshold, opts.threshold.p);
    if (lp.mode == BnPruneMode::Pinned) std::fill(lp.keep.begin(), lp.keep.end(), 1);
    plan.layers.push_back(std::move(lp));
  }

  if (opts.method == PruneMethod::OT) {
    std::map<std::string, std::vector<const Branch*>> by_junction;
    const auto branches = find_branches(graph);
    for (const auto& b : branches) by_junction[b.junction].push_back(&b);
    const auto producers = graph.producer_indices();
    for (const auto& [junction, list] : by_junction) {
      std::vector<const Branch*> doomed;
      for (const Branch* b : list) {
        const auto& gamma = graph.at(b->last_bn).as<BatchNormParams>().gamma;
        const bool below = std::all_of(gamma.begin(), gamma.end(), [&](float v) {
          return std::abs(static_cast<double>(v)) < plan.gamma_g;
        });
        if (below) doomed.push_back(b);
      }
      const std::size_t inputs = producers[graph.index_of(junction)].size();
      if (!doomed.empty() && doomed.size() == inputs) {
        // Keep the branch whose last BN has the largest scale.
        auto best = std::max_element(doomed.begin(), doomed.end(), [&](const Branch* a, const Branch* b) {
          auto peak = [&](const Branch* x) {
            double m = 0.0;
            for (float v : graph.at(x->last_bn).as<BatchNormParams>().gamma) m = std::max(m, std::abs(static_cast<double>(v)));
            return m;
          };
          return peak(a) < peak(b);
        });
        plan.warnings.push_back("every branch into '" + junction +
                                "' is below the global threshold; keeping '" + (*best)->id + "'");
        doomed.erase(best);
      }
      for (const Branch* b : doomed) plan.branches_to_remove.push_back(b->id);
    }
  }
  return plan;
}

PrunePlan identity_plan(const NetworkGraph& graph) {
  PrunePlan plan;
  plan.gamma_g = 0.0;
  for (const auto& [name, mode] : classify_batchnorms(graph)) {
    LayerPlan lp;
    lp.bn = name;
    lp.mode = mode;
    lp.threshold = 0.0;
    lp.keep.assign(graph.at(name).as<BatchNormParams>().channels(), 1);
    lp.stats = separation_stats(
        GammaSet::from_scales(std::span<const float>(graph.at(name).as<BatchNormParams>().gamma), name),
        0.0);
    plan.layers.push_back(std::move(lp));
  }
  return plan;
}

namespace {

// Keeps the largest-|gamma| channel among `alive` when `keep` drops them all.
bool guard_min_channel(const std::vector<float>& gamma, const Mask& alive, Mask& keep) {
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (alive[c] && keep[c]) return false;
  }
  int best = -1;
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (alive[c] && (best < 0 || std::abs(gamma[c]) > std::abs(gamma[best]))) best = static_cast<int>(c);
  }
  if (best < 0) return false;
  keep[best] = 1;
  return true;
}

}  // namespace

PruneResult apply_prune(const NetworkGraph& graph, const PrunePlan& plan) {
  require_valid(graph);
  const auto consumers = graph.consumers();
  const auto producers = graph.producer_indices();
  const auto modes = bn_modes(graph, consumers, producers);
  const auto shapes = graph.infer_shapes();
  const auto order = *graph.topological_order();
  const std::size_t N = graph.size();

  std::vector<Mask> keep(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& node = graph.node(i);
    if (node.kind != LayerKind::BatchNorm) continue;
    const LayerPlan* lp = plan.find(node.name);
    if (!lp) throw PlanMismatch("plan has no entry for batch-norm '" + node.name + "'");
    const int channels = node.as<BatchNormParams>().channels();
    if (lp->total() != channels) {
      throw PlanMismatch("plan mask for '" + node.name + "' has " + std::to_string(lp->total()) +
                         " entries, layer has " + std::to_string(channels) + " channels");
    }
    if (modes[i] == BnPruneMode::Pinned && !all_set(lp->keep)) {
      throw PlanMismatch("'" + node.name + "' feeds an add or the output; its channels cannot be pruned");
    }
    keep[i] = lp->keep;
  }
  for (const auto& l : plan.layers) {
    if (!graph.find(l.bn)) throw PlanMismatch("plan names unknown batch-norm '" + l.bn + "'");
  }

  std::vector<bool> removed(N, false);
  {
    const auto branches = find_branches(graph);
    for (const auto& id : plan.branches_to_remove) {
      auto it = std::find_if(branches.begin(), branches.end(), [&](const Branch& b) { return b.id == id; });
      if (it == branches.end()) throw PlanMismatch("plan removes unknown branch '" + id + "'");
      for (const auto& n : it->nodes) removed[graph.index_of(n)] = true;
    }
  }

  PruneResult result{NetworkGraph(graph.name(), graph.input_shape()), {}};
  NetworkGraph& out = result.graph;
  std::vector<Mask> alive(N);
  std::vector<std::string> tensor(N);  // name of the new tensor carrying node i's output

  auto guard_warning = [&](std::size_t bn) {
    result.warnings.push_back("min-channel guard: '" + graph.node(bn).name +
                              "' would lose every channel; kept its largest-scale channel");
  };

  for (std::size_t i : order) {
    if (removed[i]) continue;
    const LayerNode& node = graph.node(i);
    LayerNode emitted{node.name, node.kind, {}, node.params};
    for (std::size_t p : producers[i]) {
      if (!removed[p]) emitted.inputs.push_back(tensor[p]);
    }
    const int out_channels = shapes[i].channels;
    const Mask* in = producers[i].empty() ? nullptr : &alive[producers[i].front()];

    switch (node.kind) {
      case LayerKind::Input:
        alive[i].assign(out_channels, 1);
        break;
      case LayerKind::Conv2D:
      case LayerKind::Linear: {
        Mask out_mask(out_channels, 1);
        if (consumers[i].size() == 1) {
          const std::size_t c = consumers[i].front();
          if (graph.node(c).kind == LayerKind::BatchNorm && modes[c] == BnPruneMode::Structural &&
              !removed[c]) {
            if (guard_min_channel(graph.node(c).as<BatchNormParams>().gamma, out_mask, keep[c])) {
              guard_warning(c);
            }
            out_mask = keep[c];
          }
        }
        if (node.kind == LayerKind::Conv2D) {
          const auto& src = node.as<Conv2DParams>();
          Conv2DParams dst = src;
          const std::size_t ksz = static_cast<std::size_t>(src.kernel_h) * src.kernel_w;
          dst.in_channels = count_set(*in);
          dst.out_channels = count_set(out_mask);
          dst.weight.clear();
          for (int o = 0; o < src.out_channels; ++o) {
            if (!out_mask[o]) continue;
            for (int c = 0; c < src.in_channels; ++c) {
              if (!(*in)[c]) continue;
              const auto* w = src.weight.data() + (static_cast<std::size_t>(o) * src.in_channels + c) * ksz;
              dst.weight.insert(dst.weight.end(), w, w + ksz);
            }
          }
          if (!src.bias.empty()) dst.bias = select(src.bias, out_mask);
          emitted.params = std::move(dst);
        } else {
          const auto& src = node.as<LinearParams>();
          const Shape& ins = shapes[producers[i].front()];
          const std::size_t hw = static_cast<std::size_t>(ins.height) * ins.width;
          Mask features(src.in_features);
          for (int f = 0; f < src.in_features; ++f) features[f] = (*in)[f / hw];
          LinearParams dst = src;
          dst.in_features = count_set(features);
          dst.out_features = count_set(out_mask);
          dst.weight.clear();
          for (int o = 0; o < src.out_features; ++o) {
            if (!out_mask[o]) continue;
            for (int f = 0; f < src.in_features; ++f) {
              if (features[f]) dst.weight.push_back(src.weight[static_cast<std::size_t>(o) * src.in_features + f]);
            }
          }
          if (!src.bias.empty()) dst.bias = select(src.bias, out_mask);
          emitted.params = std::move(dst);
        }
        alive[i] = std::move(out_mask);
        break;
      }
      case LayerKind::BatchNorm: {
        const auto& src = node.as<BatchNormParams>();
        Mask mask = *in;
        if (modes[i] == BnPruneMode::ChannelSelect) {
          if (guard_min_channel(src.gamma, *in, keep[i])) guard_warning(i);
          Mask selected;  // over the alive input channels
          for (int c = 0; c < out_channels; ++c) {
            if ((*in)[c]) selected.push_back(keep[i][c]);
            mask[c] = (*in)[c] && keep[i][c];
          }
          if (!all_set(selected)) {
            const std::size_t p = producers[i].front();
            auto existing = out.find(tensor[p]);
            if (graph.node(p).kind == LayerKind::ChannelSelect && consumers[p].size() == 1 &&
                existing) {
              // Narrow the select that already feeds this BN.
              auto& cs = out.node(*existing).as<ChannelSelectParams>();
              std::size_t k = 0;
              for (auto& bit : cs.mask) {
                if (bit) bit = selected[k++];
              }
            } else {
              std::string name = node.name + ".select";
              while (graph.find(name) || out.find(name)) name += "_";
              out.add({name, LayerKind::ChannelSelect, emitted.inputs, ChannelSelectParams{selected}});
              emitted.inputs = {name};
            }
          }
        }
        BatchNormParams dst;
        dst.gamma = select(src.gamma, mask);
        dst.beta = select(src.beta, mask);
        dst.running_mean = select(src.running_mean, mask);
        dst.running_var = select(src.running_var, mask);
        dst.eps = src.eps;
        emitted.params = std::move(dst);
        alive[i] = std::move(mask);
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
      case LayerKind::GlobalAvgPool:
        alive[i] = *in;
        break;
      case LayerKind::ChannelSelect: {
        const auto& src = node.as<ChannelSelectParams>();
        Mask restricted;
        Mask out_mask;
        for (std::size_t c = 0; c < src.mask.size(); ++c) {
          if ((*in)[c]) restricted.push_back(src.mask[c]);
          if (src.mask[c]) out_mask.push_back((*in)[c]);
        }
        alive[i] = std::move(out_mask);
        if (all_set(restricted)) {
          tensor[i] = emitted.inputs.front();
          continue;
        }
        emitted.params = ChannelSelectParams{std::move(restricted)};
        break;
      }
      case LayerKind::Add: {
        std::vector<std::size_t> live;
        for (std::size_t p : producers[i]) {
          if (!removed[p]) live.push_back(p);
        }
        if (live.empty()) throw PlanMismatch("every input of '" + node.name + "' is removed");
        for (std::size_t p : live) {
          if (alive[p] != alive[live.front()]) {
            throw PlanMismatch("inputs of '" + node.name + "' keep different channels");
          }
        }
        alive[i] = alive[live.front()];
        if (live.size() == 1) {
          tensor[i] = emitted.inputs.front();
          continue;
        }
        break;
      }
      case LayerKind::Concat: {
        Mask m;
        std::size_t live = 0;
        for (std::size_t p : producers[i]) {
          if (removed[p]) {
            m.insert(m.end(), shapes[p].channels, 0);
          } else {
            m.insert(m.end(), alive[p].begin(), alive[p].end());
            ++live;
          }
        }
        if (live == 0) throw PlanMismatch("every input of '" + node.name + "' is removed");
        alive[i] = std::move(m);
        if (live == 1) {
          tensor[i] = emitted.inputs.front();
          continue;
        }
        break;
      }
      case LayerKind::Output:
        if (!all_set(*in)) throw PlanMismatch("plan removes channels of the network output");
        alive[i] = *in;
        break;
    }
    tensor[i] = node.name;
    out.add(std::move(emitted));
  }
  const auto violations = validate(out);
  if (!violations.empty()) {
    throw PlanMismatch("pruned graph is invalid: " + violations.front().node + ": " +
                       violations.front().message);
  }
  return result;
}

double PruneReport::pruned_flops_pct() const {
  return flops_before > 0 ? 100.0 * (1.0 - static_cast<double>(flops_after) / flops_before) : 0.0;
}

double PruneReport::pruned_params_pct() const {
  return params_before > 0 ? 100.0 * (1.0 - static_cast<double>(params_after) / params_before) : 0.0;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string opt_csv(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

}  // namespace

nlohmann::json PruneReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["lambda"] = lambda;
  j["delta"] = opt_json(delta);
  j["ns_percent"] = opt_json(ns_percent);
  j["flops_before"] = flops_before;
  j["flops_after"] = flops_after;
  j["params_before"] = params_before;
  j["params_after"] = params_after;
  j["pruned_flops_pct"] = pruned_flops_pct();
  j["pruned_params_pct"] = pruned_params_pct();
  j["acc_base"] = opt_json(acc_base);
  j["acc_pre"] = opt_json(acc_pre);
  j["acc_post"] = opt_json(acc_post);
  j["seed"] = seed;
  j["pruned_channels"] = pruned_channels;
  j["removed_branches"] = removed_branches;
  auto& arr = j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) arr.push_back({{"bn", l.bn}, {"kept", l.kept}, {"total", l.total}});
  return j;
}

PruneReport PruneReport::from_json(const nlohmann::json& j) {
  try {
    PruneReport r;
    r.method = j.at("method").get<std::string>();
    r.lambda = j.at("lambda").get<double>();
    r.delta = opt_from(j.at("delta"));
    r.ns_percent = opt_from(j.at("ns_percent"));
    r.flops_before = j.at("flops_before").get<std::int64_t>();
    r.flops_after = j.at("flops_after").get<std::int64_t>();
    r.params_before = j.at("params_before").get<std::int64_t>();
    r.params_after = j.at("params_after").get<std::int64_t>();
    r.acc_base = opt_from(j.at("acc_base"));
    r.acc_pre = opt_from(j.at("acc_pre"));
    r.acc_post = opt_from(j.at("acc_post"));
    r.seed = j.at("seed").get<std::uint64_t>();
    r.pruned_channels = j.at("pruned_channels").get<std::int64_t>();
    r.removed_branches = j.at("removed_branches").get<std::vector<std::string>>();
    for (const auto& l : j.at("layers")) {
      r.layers.push_back({l.at("bn").get<std::string>(), l.at("kept").get<int>(), l.at("total").get<int>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SerializationError(std::string("malformed prune report: ") + e.what());
  }
}

std::string PruneReport::csv_header() {
  return "method,lambda,delta,flops_before,flops_after,params_before,params_after,acc_pre,acc_post,seed";
}

std::string PruneReport::csv_row() const {
  std::ostringstream s;
  s.precision(17);
  s << method << ',' << lambda << ',' << opt_csv(delta) << ',' << flops_before << ',' << flops_after
    << ',' << params_before << ',' << params_after << ',' << opt_csv(acc_pre) << ','
    << opt_csv(acc_post) << ',' << seed;
  return s.str();
}

PruneReport make_report(const NetworkGraph& before, const NetworkGraph& after,
                        const PrunePlan& plan, const Accuracies& acc, std::uint64_t seed) {
  require_valid(before);
  require_valid(after);
  PruneReport r;
  r.method = std::string(to_string(plan.method));
  r.lambda = plan.lambda;
  if (plan.method == PruneMethod::OT) {
    r.delta = plan.threshold.delta;
  } else {
    r.ns_percent = plan.ns_percent;
  }
  const auto cb = count_complexity(before);
  const auto ca = count_complexity(after);
  r.flops_before = cb.flops;
  r.flops_after = ca.flops;
  r.params_before = cb.params;
  r.params_after = ca.params;
  r.acc_base = acc.base;
  r.acc_pre = acc.pre;
  r.acc_post = acc.post;
  r.seed = seed;
  r.removed_branches = plan.branches_to_remove;
  for (const auto& name : before.batchnorm_names()) {
    LayerCount lc{name, 0, before.at(name).as<BatchNormParams>().channels()};
    if (auto idx = after.find(name); idx && after.node(*idx).kind == LayerKind::BatchNorm) {
      lc.kept = after.node(*idx).as<BatchNormParams>().channels();
    }
    r.pruned_channels += lc.total - lc.kept;
    r.layers.push_back(std::move(lc));
  }
  return r;
}

}  // namespace otprune

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
#include <vector>

#include "json.hpp"
#include "otprune/graph.hpp"
#include "otprune/thresholding.hpp"

namespace otprune {

enum class PruneMethod { OT, NS };

std::string_view to_string(PruneMethod method);
PruneMethod prune_method_from_string(std::string_view name);

/// How channels of a batch-norm layer can be removed.
enum class BnPruneMode {
  /// The producing conv/linear feeds only this BN: filters are deleted.
  Structural,
  /// The BN input is shared or not produced by conv/linear: a ChannelSelect
  /// node is inserted in front of the BN.
  ChannelSelect,
  /// The BN output reaches an element-wise Add or the network output, so
  /// channel counts are fixed; only whole-branch removal applies.
  Pinned,
};

std::string_view to_string(BnPruneMode mode);

struct LayerPlan {
  std::string bn;
  BnPruneMode mode = BnPruneMode::Structural;
  /// Threshold applied to this layer (after any shift).
  double threshold = 0.0;
  std::vector<std::uint8_t> keep;
  SeparationStats stats;

  int kept() const;
  int total() const { return static_cast<int>(keep.size()); }
};

/// A single-input chain of nodes that ends in a junction input.
struct Branch {
  /// Name of the node that feeds the junction.
  std::string id;
  std::string junction;
  /// Chain nodes, junction side first.
  std::vector<std::string> nodes;
  /// Batch-norm node closest to the junction.
  std::string last_bn;
};

/// Every branch of every Add/Concat junction that contains a batch-norm.
std::vector<Branch> find_branches(const NetworkGraph& graph);

/// Mode of each batch-norm node, keyed by name.
std::vector<std::pair<std::string, BnPruneMode>> classify_batchnorms(const NetworkGraph& graph);

struct PlanOptions {
  PruneMethod method = PruneMethod::OT;
  ThresholdConfig threshold;
  /// NS: fraction of all channels to prune.
  double ns_percent = 0.5;
  /// Multiplies every OT threshold by 10^shift_log10.
  double shift_log10 = 0.0;
  /// NS: at most this fraction of any one layer is pruned.
  std::optional<double> ns_layer_cap;
  /// Recorded in the plan; not used for planning.
  double lambda = 0.0;
};

struct PrunePlan {
  PruneMethod method = PruneMethod::OT;
  ThresholdConfig threshold;
  double ns_percent = 0.0;
  double shift_log10 = 0.0;
  double lambda = 0.0;
  /// Global threshold (OT) or percentile threshold (NS).
  double gamma_g = 0.0;
  std::vector<LayerPlan> layers;
  std::vector<std::string> branches_to_remove;
  std::vector<std::string> warnings;

  const LayerPlan* find(std::string_view bn) const;
  /// Channels dropped by masks plus every channel of removed branches' BNs.
  std::size_t pruned_channels(const NetworkGraph& graph) const;

  nlohmann::json to_json() const;
  static PrunePlan from_json(const nlohmann::json& j);
};

/// OT: per-layer optimal thresholds plus branch removal against the
/// global threshold. NS: one global percentile threshold.
PrunePlan plan_prune(const NetworkGraph& graph, const PlanOptions& opts = {});

/// Plan that keeps every channel and branch.
PrunePlan identity_plan(const NetworkGraph& graph);

struct PruneResult {
  NetworkGraph graph;
  std::vector<std::string> warnings;
};

/// Builds the pruned network. Throws PlanMismatch when the plan does not
/// fit the graph.
PruneResult apply_prune(const NetworkGraph& graph, const PrunePlan& plan);

struct LayerCount {
  std::string bn;
  int kept = 0;
  int total = 0;
};

struct PruneReport {
  std::string method;
  double lambda = 0.0;
  std::optional<double> delta;
  std::optional<double> ns_percent;
  std::int64_t flops_before = 0, flops_after = 0;
  std::int64_t params_before = 0, params_after = 0;
  std::optional<double> acc_base, acc_pre, acc_post;
  std::uint64_t seed = 0;
  std::vector<LayerCount> layers;
  std::vector<std::string> removed_branches;
  std::int64_t pruned_channels = 0;

  double pruned_flops_pct() const;
  double pruned_params_pct() const;

  nlohmann::json to_json() const;
  static PruneReport from_json(const nlohmann::json& j);
  static std::string csv_header();
  std::string csv_row() const;
};

struct Accuracies {
  std::optional<double> base, pre, post;
};

PruneReport make_report(const NetworkGraph& before, const NetworkGraph& after,
                        const PrunePlan& plan, const Accuracies& acc,
                        std::uint64_t seed);

}  // namespace otprune

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

#include <filesystem>

#include "json.hpp"
#include "otprune/graph.hpp"

namespace otprune {

inline constexpr int kFormatVersion = 1;

/// `<stem>.otg.json` (structure) and `<stem>.otg.bin` (weights).
struct ModelPaths {
  std::filesystem::path json;
  std::filesystem::path bin;
};

/// Accepts either a stem or a path ending in `.otg.json` / `.otg.bin`.
ModelPaths model_paths(const std::filesystem::path& path);

/// Structure-only JSON document (no weights).
nlohmann::json graph_structure_to_json(const NetworkGraph& graph);

/// Writes the JSON document and the weight sidecar, creating missing parent
/// directories. The graph must be valid.
/// Sidecar layout: for each node in document order, for each tensor of that
/// node (conv/linear: weight, bias; batch-norm: gamma, beta, running mean,
/// running variance), a little-endian uint64 byte length followed by that
/// many bytes of little-endian float32 values, row-major.
void save_graph(const NetworkGraph& graph, const std::filesystem::path& path);

/// Throws SerializationError on I/O failure, version mismatch, unknown layer
/// kinds or weight-blob length mismatch.
NetworkGraph load_graph(const std::filesystem::path& path);

}  // namespace otprune

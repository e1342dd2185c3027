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

#include "otprune/serialization.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "otprune/errors.hpp"

namespace otprune {

namespace {

using nlohmann::json;

constexpr std::string_view kJsonSuffix = ".otg.json";
constexpr std::string_view kBinSuffix = ".otg.bin";

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void write_tensor(std::ostream& os, const std::vector<float>& t) {
  const std::uint64_t bytes =
      byteswap_if_big(static_cast<std::uint64_t>(t.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(&bytes), sizeof(bytes));
  for (float v : t) {
    const float le = byteswap_if_big(v);
    os.write(reinterpret_cast<const char*>(&le), sizeof(le));
  }
}

class BlobReader {
 public:
  BlobReader(std::vector<char> data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  std::vector<float> read(std::size_t expected_count, const std::string& what) {
    std::uint64_t bytes = 0;
    if (pos_ + sizeof(bytes) > data_.size()) {
      throw SerializationError(path_ + ": weight blob length mismatch: missing "
                               "length header for " + what);
    }
    std::memcpy(&bytes, data_.data() + pos_, sizeof(bytes));
    bytes = byteswap_if_big(bytes);
    pos_ += sizeof(bytes);
    if (bytes != expected_count * sizeof(float)) {
      throw SerializationError(
          path_ + ": weight blob length mismatch for " + what + ": header says " +
          std::to_string(bytes) + " bytes, structure needs " +
          std::to_string(expected_count * sizeof(float)));
    }
    if (pos_ + bytes > data_.size()) {
      throw SerializationError(path_ + ": weight blob length mismatch: " +
                               what + " is truncated");
    }
    std::vector<float> out(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) {
      float v;
      std::memcpy(&v, data_.data() + pos_ + i * sizeof(float), sizeof(float));
      out[i] = byteswap_if_big(v);
    }
    pos_ += bytes;
    return out;
  }

  void expect_end() const {
    if (pos_ != data_.size()) {
      throw SerializationError(path_ + ": weight blob length mismatch: " +
                               std::to_string(data_.size() - pos_) +
                               " trailing bytes");
    }
  }

 private:
  std::vector<char> data_;
  std::string path_;
  std::size_t pos_ = 0;
};

json node_to_json(const LayerNode& n) {
  json j;
  j["name"] = n.name;
  j["kind"] = std::string(to_string(n.kind));
  j["inputs"] = n.inputs;
  if (const auto* c = std::get_if<Conv2DParams>(&n.params)) {
    j["in_channels"] = c->in_channels;
    j["out_channels"] = c->out_channels;
    j["kernel_h"] = c->kernel_h;
    j["kernel_w"] = c->kernel_w;
    j["stride"] = c->stride;
    j["padding"] = c->padding;
    j["bias"] = !c->bias.empty();
  } else if (const auto* l = std::get_if<LinearParams>(&n.params)) {
    j["in_features"] = l->in_features;
    j["out_features"] = l->out_features;
    j["bias"] = !l->bias.empty();
  } else if (const auto* b = std::get_if<BatchNormParams>(&n.params)) {
    j["channels"] = b->channels();
    j["eps"] = b->eps;
  } else if (const auto* p = std::get_if<PoolParams>(&n.params)) {
    j["kernel"] = p->kernel;
    j["stride"] = p->stride;
  } else if (const auto* s = std::get_if<ChannelSelectParams>(&n.params)) {
    j["mask"] = s->mask;
  }
  return j;
}

template <typename T>
T field(const json& j, const char* key, const std::string& node) {
  if (!j.contains(key)) {
    throw SerializationError("node '" + node + "' is missing field '" + key +
                             "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SerializationError("node '" + node + "' field '" + key +
                             "': " + e.what());
  }
}

int positive_field(const json& j, const char* key, const std::string& node) {
  const int v = field<int>(j, key, node);
  if (v < 0) {
    throw SerializationError("node '" + node + "' field '" + key +
                             "' must be non-negative");
  }
  return v;
}

LayerNode node_from_json(const json& j, BlobReader& blob) {
  const auto name = field<std::string>(j, "name", "?");
  const auto kind_name = field<std::string>(j, "kind", name);
  const auto kind = layer_kind_from_string(kind_name);
  if (!kind) {
    throw SerializationError("schema error: unknown layer kind '" + kind_name +
                             "' in node '" + name + "'");
  }
  LayerNode n{name, *kind, field<std::vector<std::string>>(j, "inputs", name),
              default_params(*kind)};
  switch (*kind) {
    case LayerKind::Conv2D: {
      Conv2DParams p;
      p.in_channels = positive_field(j, "in_channels", name);
      p.out_channels = positive_field(j, "out_channels", name);
      p.kernel_h = positive_field(j, "kernel_h", name);
      p.kernel_w = positive_field(j, "kernel_w", name);
      p.stride = positive_field(j, "stride", name);
      p.padding = positive_field(j, "padding", name);
      const bool bias = field<bool>(j, "bias", name);
      p.weight = blob.read(p.out_channels * p.filter_size(), name + ".weight");
      p.bias = blob.read(bias ? p.out_channels : 0, name + ".bias");
      n.params = std::move(p);
      break;
    }
    case LayerKind::Linear: {
      LinearParams p;
      p.in_features = positive_field(j, "in_features", name);
      p.out_features = positive_field(j, "out_features", name);
      const bool bias = field<bool>(j, "bias", name);
      p.weight = blob.read(static_cast<std::size_t>(p.in_features) *
                               p.out_features,
                           name + ".weight");
      p.bias = blob.read(bias ? p.out_features : 0, name + ".bias");
      n.params = std::move(p);
      break;
    }
    case LayerKind::BatchNorm: {
      BatchNormParams p;
      const auto c = static_cast<std::size_t>(positive_field(j, "channels", name));
      p.eps = field<float>(j, "eps", name);
      p.gamma = blob.read(c, name + ".gamma");
      p.beta = blob.read(c, name + ".beta");
      p.running_mean = blob.read(c, name + ".running_mean");
      p.running_var = blob.read(c, name + ".running_var");
      n.params = std::move(p);
      break;
    }
    case LayerKind::AvgPool:
    case LayerKind::MaxPool:
      n.params = PoolParams{positive_field(j, "kernel", name),
                            positive_field(j, "stride", name)};
      break;
    case LayerKind::ChannelSelect:
      n.params = ChannelSelectParams{
          field<std::vector<std::uint8_t>>(j, "mask", name)};
      break;
    default:
      break;
  }
  return n;
}

}  // namespace

ModelPaths model_paths(const std::filesystem::path& path) {
  std::string s = path.string();
  if (ends_with(s, kJsonSuffix)) {
    s.resize(s.size() - kJsonSuffix.size());
  } else if (ends_with(s, kBinSuffix)) {
    s.resize(s.size() - kBinSuffix.size());
  }
  return {s + std::string(kJsonSuffix), s + std::string(kBinSuffix)};
}

nlohmann::json graph_structure_to_json(const NetworkGraph& graph) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["name"] = graph.name();
  const Shape& s = graph.input_shape();
  doc["input_shape"] = {s.channels, s.height, s.width};
  json nodes = json::array();
  for (const auto& n : graph.nodes()) nodes.push_back(node_to_json(n));
  doc["nodes"] = std::move(nodes);
  return doc;
}

void save_graph(const NetworkGraph& graph, const std::filesystem::path& path) {
  require_valid(graph);
  const auto paths = model_paths(path);
  json doc = graph_structure_to_json(graph);
  doc["weights_file"] = paths.bin.filename().string();

  std::error_code ec;
  if (paths.json.has_parent_path()) std::filesystem::create_directories(paths.json.parent_path(), ec);
  std::ofstream js(paths.json);
  if (!js) throw SerializationError("cannot write " + paths.json.string());
  js << doc.dump(1) << '\n';
  if (!js) throw SerializationError("write failed: " + paths.json.string());

  std::ofstream bin(paths.bin, std::ios::binary);
  if (!bin) throw SerializationError("cannot write " + paths.bin.string());
  for (const auto& n : graph.nodes()) {
    if (const auto* c = std::get_if<Conv2DParams>(&n.params)) {
      write_tensor(bin, c->weight);
      write_tensor(bin, c->bias);
    } else if (const auto* l = std::get_if<LinearParams>(&n.params)) {
      write_tensor(bin, l->weight);
      write_tensor(bin, l->bias);
    } else if (const auto* b = std::get_if<BatchNormParams>(&n.params)) {
      write_tensor(bin, b->gamma);
      write_tensor(bin, b->beta);
      write_tensor(bin, b->running_mean);
      write_tensor(bin, b->running_var);
    }
  }
  if (!bin) throw SerializationError("write failed: " + paths.bin.string());
}

NetworkGraph load_graph(const std::filesystem::path& path) {
  const auto paths = model_paths(path);
  std::ifstream js(paths.json);
  if (!js) throw SerializationError("cannot open " + paths.json.string());
  json doc;
  try {
    js >> doc;
  } catch (const json::exception& e) {
    throw SerializationError(paths.json.string() + ": " + e.what());
  }
  if (!doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    throw SerializationError(paths.json.string() + ": missing format_version");
  }
  const int version = doc["format_version"].get<int>();
  if (version != kFormatVersion) {
    throw SerializationError(paths.json.string() +
                             ": schema version mismatch: file has " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kFormatVersion));
  }

  std::filesystem::path bin_path = paths.bin;
  if (doc.contains("weights_file")) {
    bin_path = paths.json.parent_path() / doc["weights_file"].get<std::string>();
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw SerializationError("cannot open " + bin_path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(bin)),
                         std::istreambuf_iterator<char>());
  BlobReader blob(std::move(data), bin_path.string());

  const auto shape = field<std::vector<int>>(doc, "input_shape", "<graph>");
  if (shape.size() != 3) {
    throw SerializationError("input_shape must have three entries");
  }
  NetworkGraph g(doc.value("name", std::string{}),
                 Shape{shape[0], shape[1], shape[2]});
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw SerializationError(paths.json.string() + ": missing nodes array");
  }
  for (const auto& jn : doc["nodes"]) {
    try {
      g.add(node_from_json(jn, blob));
    } catch (const GraphError& e) {
      throw SerializationError(e.what());
    }
  }
  blob.expect_end();
  return g;
}

}  // namespace otprune

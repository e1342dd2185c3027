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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "otprune/dataset.hpp"
#include "otprune/errors.hpp"
#include "otprune/surgery.hpp"
#include "otprune/trainer.hpp"

namespace otprune {

/// An error annotated with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class PostMode { FineTune, TrainFromScratch, None };

std::string_view to_string(PostMode mode);
PostMode post_mode_from_string(std::string_view name);

struct DataSource {
  /// "synthetic" or a CIFAR-10 binary directory.
  std::string source = "synthetic";
  int num_classes = 4;
  int samples_per_class = 500;
  int image_size = 8;

  bool synthetic() const { return source == "synthetic"; }
};

/// Writes files under a root directory and records them for manifest.json.
/// A writer with an empty root discards everything.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root);

  bool enabled() const { return !root_.empty(); }
  const std::vector<std::string>& files() const { return files_; }

  void text(const std::string& rel, const std::string& content);
  void json(const std::string& rel, const nlohmann::json& j);
  /// Saves `rel`.otg.json/.otg.bin and checks the stored copy reloads valid.
  void model(const std::string& rel, const NetworkGraph& g);
  /// manifest.json: the resolved config plus every file written so far.
  void manifest(const nlohmann::json& config);

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

/// Per-layer log10 gamma histograms: `layer,bin_low,bin_high,count`.
std::string histogram_csv(const NetworkGraph& graph);

/// Loads the data named by `src`; synthetic data is generated from `seed`.
DataSplits load_data(const DataSource& src, std::uint64_t seed);

/// Default sparsity sweep for the toy presets on synthetic data.
inline constexpr std::array<double, 4> kToyLambdaSweep{1e-3, 3e-3, 1e-2, 3e-2};

struct PipelineConfig {
  std::string preset = "toy_cnn";
  DataSource data;
  PruneMethod method = PruneMethod::OT;
  /// Sparsity coefficients; run_pipeline and the shift sweep use the first.
  std::vector<double> lambdas{kToyLambdaSweep.back()};
  ThresholdConfig threshold;
  double ns_percent = 0.5;
  /// Per-layer cap for NS when iterating (at most this fraction per layer).
  double ns_layer_cap = 0.5;
  int iterations = 1;
  PostMode post = PostMode::FineTune;
  std::vector<double> shifts;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  /// Seeds for compare_methods: seed, seed+1, ...
  int seeds = 1;
  TrainConfig sparse = TrainConfig::toy_sparse(kToyLambdaSweep.back());
  TrainConfig recover = TrainConfig::toy_fine_tune();

  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Builds the preset for `cfg` with initialization seeded by `seed`.
NetworkGraph initial_model(const PipelineConfig& cfg, const DataSplits& data,
                           std::uint64_t seed);

/// Sparsity training of `graph` at `lambda`, seeded by `seed`.
TrainResult sparse_train(const NetworkGraph& graph, const DataSplits& data,
                         const PipelineConfig& cfg, double lambda,
                         std::uint64_t seed);

/// Train, prune, recover; repeated `iterations` times. Every artifact goes
/// under cfg.out when it is non-empty.
std::vector<PruneReport> run_pipeline(const PipelineConfig& cfg);

struct ShiftPoint {
  double shift = 0.0;
  double pruned_flops_pct = 0.0;
  double pruned_params_pct = 0.0;
  double acc_pre = 0.0;
  std::optional<double> acc_post;
  std::size_t pruned_channels = 0;
};

/// Prunes `trained` with every OT threshold scaled by 10^shift for each shift.
/// Recovers each pruned model when cfg.post is not None.
std::vector<ShiftPoint> shift_sweep(const NetworkGraph& trained, const DataSplits& data,
                                    const PipelineConfig& cfg);

/// Sparsity-trains the preset, then runs shift_sweep and writes
/// shift_sweep.csv under cfg.out.
std::vector<ShiftPoint> run_shift_sweep(const PipelineConfig& cfg);

/// `shift,pruned_flops_pct,pruned_params_pct,acc_pre,acc_post`
std::string shift_csv(const std::vector<ShiftPoint>& points);

/// NS percent that prunes the same number of channels OT pruned.
double matched_ns_percent(std::size_t ot_pruned, std::size_t total_channels);

/// For each lambda and seed: sparsity-train, prune with OT, prune the same
/// model with NS at the matched channel budget, recover both. Rows are
/// ordered (lambda, seed, OT then NS).
std::vector<PruneReport> compare_methods(const PipelineConfig& cfg);

/// Header plus one csv_row per report.
std::string reports_csv(const std::vector<PruneReport>& reports);

}  // namespace otprune

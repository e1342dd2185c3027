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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace otprune {

/// Magnitudes of batch-norm scales for one layer or for the whole network.
struct GammaSet {
  std::vector<double> values;
  std::string origin;

  /// Takes absolute values of `scales`.
  static GammaSet from_scales(std::span<const float> scales, std::string origin);
  static GammaSet from_scales(std::span<const double> scales, std::string origin);

  /// Throws ConfigError if empty, negative or non-finite.
  void validate() const;
  std::size_t size() const { return values.size(); }
};

/// Concatenation of several sets, labelled "network-global".
GammaSet merge(const std::vector<GammaSet>& sets);

struct ThresholdConfig {
  double delta = 1e-3;
  double p = 2.0;

  void validate() const;
};

/// Smallest member g of the set such that the p-th powers of all members up to
/// and including g (in ascending order) reach delta * sum of p-th powers. The
/// prune set is {x : x < g}. Throws DegenerateDistribution when the sum is 0.
double find_threshold(const GammaSet& gammas, const ThresholdConfig& cfg = {});

/// find_threshold over the union of all layers.
double global_threshold(const std::vector<GammaSet>& layers,
                        const ThresholdConfig& cfg = {});

/// Percentile threshold: the value at index floor(percent * n) of the sorted
/// magnitudes. `percent` must lie in [0, 1).
double ns_threshold(const GammaSet& gammas, double percent);

/// Number of members strictly below `threshold`.
std::size_t count_below(const GammaSet& gammas, double threshold);

/// Separation of the negligible side N = {x < threshold} from the important
/// side I = {x >= threshold}.
struct SeparationStats {
  double alpha = 0.0;  // min(I) / max(N)
  double beta = 0.0;   // max(I) / min(I)
  double ratio_n_i = 0.0;
  double lower_bound = 0.0;  // ratio_n_i * alpha^-p
  double upper_bound = 0.0;  // beta^-p / n
  std::size_t negligible = 0;
  std::size_t important = 0;
  /// One side is empty; fields that need both sides are NaN.
  bool one_sided = false;
};

SeparationStats separation_stats(const GammaSet& gammas, double threshold,
                                 double p = 2.0);

struct Histogram {
  /// bins + 1 edges in value units (log-spaced in log10 mode).
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  bool log10_scale = false;
  /// Zero values in log10 mode.
  std::size_t underflow = 0;

  std::size_t total() const;
  /// `bin_low,bin_high,count`; the log10 underflow bin is written as 0,0.
  std::string to_csv() const;
};

Histogram histogram(const GammaSet& gammas, int bins, bool log10_scale);

}  // namespace otprune

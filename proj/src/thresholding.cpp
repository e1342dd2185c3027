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

#include "otprune/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "otprune/errors.hpp"

namespace otprune {

namespace {

double power(double x, double p) { return p == 2.0 ? x * x : std::pow(x, p); }

template <typename T>
GammaSet magnitudes(std::span<const T> scales, std::string origin) {
  GammaSet g{{}, std::move(origin)};
  g.values.reserve(scales.size());
  for (T v : scales) g.values.push_back(std::abs(static_cast<double>(v)));
  return g;
}

std::vector<double> sorted_values(const GammaSet& g) {
  g.validate();
  std::vector<double> v = g.values;
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

GammaSet GammaSet::from_scales(std::span<const float> scales, std::string origin) {
  return magnitudes(scales, std::move(origin));
}

GammaSet GammaSet::from_scales(std::span<const double> scales, std::string origin) {
  return magnitudes(scales, std::move(origin));
}

void GammaSet::validate() const {
  if (values.empty()) throw ConfigError("empty scale set '" + origin + "'");
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("scale set '" + origin + "' has a negative or non-finite value");
    }
  }
}

GammaSet merge(const std::vector<GammaSet>& sets) {
  GammaSet out{{}, "network-global"};
  for (const auto& s : sets) out.values.insert(out.values.end(), s.values.begin(), s.values.end());
  return out;
}

void ThresholdConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(p >= 1.0) || !std::isfinite(p)) throw ConfigError("p must be >= 1");
}

double find_threshold(const GammaSet& gammas, const ThresholdConfig& cfg) {
  cfg.validate();
  const auto v = sorted_values(gammas);
  double total = 0.0;
  for (double x : v) total += power(x, cfg.p);
  if (!(total > 0.0)) throw DegenerateDistribution(gammas.origin);
  const double target = cfg.delta * total;
  double cum = 0.0;
  for (double x : v) {
    cum += power(x, cfg.p);
    if (cum >= target) return x;
  }
  return v.back();
}

double global_threshold(const std::vector<GammaSet>& layers, const ThresholdConfig& cfg) {
  return find_threshold(merge(layers), cfg);
}

double ns_threshold(const GammaSet& gammas, double percent) {
  if (!(percent >= 0.0 && percent < 1.0)) throw ConfigError("percent must lie in [0, 1)");
  const auto v = sorted_values(gammas);
  const auto idx = static_cast<std::size_t>(std::floor(percent * static_cast<double>(v.size())));
  return v[std::min(idx, v.size() - 1)];
}

std::size_t count_below(const GammaSet& gammas, double threshold) {
  return static_cast<std::size_t>(std::count_if(
      gammas.values.begin(), gammas.values.end(), [&](double x) { return x < threshold; }));
}

SeparationStats separation_stats(const GammaSet& gammas, double threshold, double p) {
  gammas.validate();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double max_n = -1.0;
  double min_i = std::numeric_limits<double>::infinity();
  double max_i = -1.0;
  SeparationStats s;
  for (double x : gammas.values) {
    if (x < threshold) {
      ++s.negligible;
      max_n = std::max(max_n, x);
    } else {
      ++s.important;
      min_i = std::min(min_i, x);
      max_i = std::max(max_i, x);
    }
  }
  const double n = static_cast<double>(gammas.size());
  s.one_sided = s.negligible == 0 || s.important == 0;
  if (s.important == 0) {
    s.alpha = s.beta = s.ratio_n_i = s.lower_bound = s.upper_bound = nan;
    return s;
  }
  s.beta = max_i / min_i;
  s.upper_bound = power(s.beta, -p) / n;
  s.ratio_n_i = static_cast<double>(s.negligible) / static_cast<double>(s.important);
  if (s.negligible == 0) {
    s.alpha = nan;
    s.lower_bound = nan;
    return s;
  }
  s.alpha = max_n > 0.0 ? min_i / max_n : std::numeric_limits<double>::infinity();
  s.lower_bound = s.ratio_n_i * power(s.alpha, -p);
  return s;
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), underflow);
}

std::string Histogram::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "bin_low,bin_high,count\n";
  if (log10_scale) out << "0,0," << underflow << '\n';
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out << edges[b] << ',' << edges[b + 1] << ',' << counts[b] << '\n';
  }
  return out.str();
}

Histogram histogram(const GammaSet& gammas, int bins, bool log10_scale) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  gammas.validate();
  Histogram h;
  h.log10_scale = log10_scale;
  h.counts.assign(bins, 0);
  std::vector<double> xs;
  for (double v : gammas.values) {
    if (log10_scale && v == 0.0) {
      ++h.underflow;
      continue;
    }
    xs.push_back(log10_scale ? std::log10(v) : v);
  }
  double lo = 0.0, hi = 1.0;
  if (!xs.empty()) {
    lo = *std::min_element(xs.begin(), xs.end());
    hi = *std::max_element(xs.begin(), xs.end());
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  for (double x : xs) {
    const auto b = static_cast<int>((x - lo) / width);
    ++h.counts[std::clamp(b, 0, bins - 1)];
  }
  for (int b = 0; b <= bins; ++b) {
    const double e = b == bins ? hi : lo + b * width;
    h.edges.push_back(log10_scale ? std::pow(10.0, e) : e);
  }
  return h;
}

}  // namespace otprune

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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include "otprune/errors.hpp"
#include "otprune/rng.hpp"
#include "otprune/thresholding.hpp"

namespace otprune {
namespace {

GammaSet set_of(std::vector<double> v) { return {std::move(v), "layer"}; }

// Exhaustive evaluation of the defining double inequality: the members g with
// sum_{x<g} x^2 < delta*S <= sum_{x<g} x^2 + g^2.
std::vector<double> exhaustive_solutions(const std::vector<double>& v, double delta) {
  long double total = 0;
  for (double x : v) total += static_cast<long double>(x) * x;
  std::vector<double> out;
  for (double g : v) {
    long double before = 0;
    for (double x : v) {
      if (x < g) before += static_cast<long double>(x) * x;
    }
    const long double target = delta * total;
    if (before < target && target <= before + static_cast<long double>(g) * g) {
      if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
    }
  }
  return out;
}

std::vector<double> random_set(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = std::pow(10.0, rng.uniform(-7.0, 0.5));
  return v;
}

TEST(FindThreshold, PrunesTinyPair) {
  EXPECT_EQ(find_threshold(set_of({0.001, 0.002, 0.5, 0.6})), 0.5);
}

TEST(FindThreshold, UniformSetPrunesNothing) {
  const auto g = set_of({1, 1, 1, 1});
  const double th = find_threshold(g);
  EXPECT_EQ(th, 1.0);
  EXPECT_EQ(count_below(g, th), 0u);
}

TEST(FindThreshold, PrunesMicroMode) {
  const auto g = set_of({1e-6, 1e-6, 1e-6, 0.1, 0.2});
  const double th = find_threshold(g);
  EXPECT_EQ(th, 0.1);
  EXPECT_EQ(count_below(g, th), 3u);
}

TEST(FindThreshold, AllZeroIsDegenerate) {
  try {
    find_threshold({{0, 0, 0}, "block7.bn"});
    FAIL();
  } catch (const DegenerateDistribution& e) {
    EXPECT_EQ(e.origin(), "block7.bn");
  }
}

TEST(FindThreshold, RejectsBadInput) {
  EXPECT_THROW(find_threshold(set_of({})), ConfigError);
  EXPECT_THROW(find_threshold(set_of({-1.0, 2.0})), ConfigError);
  EXPECT_THROW(find_threshold(set_of({1.0}), {1.5, 2.0}), ConfigError);
}

TEST(FindThreshold, TakesMagnitudes) {
  const std::vector<float> scales{-0.5f, 1e-6f, -1e-6f, 0.4f};
  const auto g = GammaSet::from_scales(std::span<const float>(scales), "bn");
  EXPECT_FLOAT_EQ(static_cast<float>(find_threshold(g)), 0.4f);
}

TEST(FindThreshold, TiedCrossingReturnsTiedValue) {
  // delta*S falls strictly inside the tied pair's contribution, so no member
  // satisfies the inequality exactly; the tied value is returned and kept.
  const auto g = set_of({0.1, 0.1, 10.0});
  const double th = find_threshold(g, {0.00015, 2.0});
  EXPECT_EQ(th, 0.1);
  EXPECT_EQ(count_below(g, th), 0u);
}

TEST(FindThresholdProperty, MatchesExhaustiveOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto v = random_set(rng, 1 + rng.below(12));
    const double delta = std::pow(10.0, rng.uniform(-5, -0.5));
    const auto sols = exhaustive_solutions(v, delta);
    ASSERT_EQ(sols.size(), 1u) << "trial " << trial;
    ASSERT_EQ(find_threshold(set_of(v), {delta, 2.0}), sols[0]) << "trial " << trial;
  }
}

TEST(FindThresholdProperty, PermutationInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = random_set(rng, 2 + rng.below(40));
    const double th = find_threshold(set_of(v));
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
    ASSERT_EQ(find_threshold(set_of(v)), th);
  }
}

TEST(FindThresholdProperty, ScaleEquivariant) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = random_set(rng, 2 + rng.below(40));
    const double c = std::pow(10.0, rng.uniform(-3, 3));
    std::vector<double> scaled;
    for (double x : v) scaled.push_back(c * x);
    const double th = find_threshold(set_of(v));
    const double th_scaled = find_threshold(set_of(scaled));
    ASSERT_DOUBLE_EQ(th_scaled, c * th);
    for (std::size_t i = 0; i < v.size(); ++i) {
      ASSERT_EQ(v[i] < th, scaled[i] < th_scaled);
    }
  }
}

TEST(FindThresholdProperty, MonotoneInDelta) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = set_of(random_set(rng, 2 + rng.below(40)));
    double prev = 0.0;
    for (double delta : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.5}) {
      const double th = find_threshold(g, {delta, 2.0});
      ASSERT_GE(th, prev);
      prev = th;
    }
  }
}

TEST(FindThresholdProperty, SplitsAtGapInsideBoundBand) {
  Rng rng(10);
  int checked = 0;
  while (checked < 300) {
    const std::size_t n_neg = 1 + rng.below(20), n_imp = 1 + rng.below(20);
    const double alpha = std::pow(10.0, rng.uniform(3, 6));
    const double beta = std::pow(10.0, rng.uniform(std::log10(2.0), 2));
    const double min_i = rng.uniform(0.05, 1.0);
    std::vector<double> v;
    for (std::size_t i = 0; i < n_neg; ++i) v.push_back(min_i / alpha * rng.uniform(0.0, 1.0));
    v.push_back(min_i / alpha);
    v.push_back(min_i);
    v.push_back(min_i * beta);
    for (std::size_t i = 3; i < n_imp + 2; ++i) v.push_back(min_i * rng.uniform(1.0, beta));
    const auto g = set_of(v);
    const auto stats = separation_stats(g, min_i);
    if (!(stats.lower_bound < 1e-3 && 1e-3 <= stats.upper_bound)) continue;
    ++checked;
    ASSERT_EQ(find_threshold(g), min_i);
  }
}

TEST(GlobalThreshold, DuplicationInvariant) {
  const auto layer = set_of({1e-5, 1e-5, 0.3, 0.4});
  EXPECT_EQ(global_threshold({layer, layer}), find_threshold(layer));
  EXPECT_EQ(global_threshold({layer}), find_threshold(layer));
  EXPECT_EQ(merge({layer, layer}).origin, "network-global");
}

TEST(NsThreshold, IndexArithmetic) {
  const auto g = set_of({0.5, 0.1, 0.9, 0.3, 1.0, 0.2, 0.7, 0.4, 0.8, 0.6});
  EXPECT_DOUBLE_EQ(ns_threshold(g, 0.3), 0.4);
  EXPECT_EQ(count_below(g, ns_threshold(g, 0.3)), 3u);
  EXPECT_DOUBLE_EQ(ns_threshold(g, 0.0), 0.1);
  EXPECT_EQ(count_below(g, ns_threshold(g, 0.0)), 0u);
  EXPECT_THROW(ns_threshold(g, 1.0), ConfigError);
}

TEST(NsThreshold, OverPrunesMisalignedLayer) {
  // Layer A has a large important mode, layer B a small one that sits below
  // a high global percentile.
  const std::vector<double> a{1e-6, 2e-6, 3e-6, 1.0, 1.1, 1.2, 1.3, 1.4};
  const std::vector<double> b{1e-7, 2e-7, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1};
  const double ot_b = find_threshold(set_of(b));
  const double ns = ns_threshold(merge({set_of(a), set_of(b)}), 0.73);
  EXPECT_EQ(count_below(set_of(b), ot_b), 2u);
  EXPECT_GT(count_below(set_of(b), ns), count_below(set_of(b), ot_b));
}

TEST(SeparationStats, DirectFormula) {
  const auto s = separation_stats(set_of({1e-6, 1e-6, 1e-6, 0.1, 0.2}), 0.1);
  EXPECT_FALSE(s.one_sided);
  EXPECT_NEAR(s.alpha, 1e5, 1e-6);
  EXPECT_DOUBLE_EQ(s.beta, 2.0);
  EXPECT_DOUBLE_EQ(s.ratio_n_i, 1.5);
  EXPECT_NEAR(s.lower_bound, 1.5e-10, 1e-20);
  EXPECT_DOUBLE_EQ(s.upper_bound, 0.05);
}

TEST(SeparationStats, OneSided) {
  const auto s = separation_stats(set_of({0.1, 0.2}), 0.1);
  EXPECT_TRUE(s.one_sided);
  EXPECT_EQ(s.negligible, 0u);
  EXPECT_TRUE(std::isnan(s.alpha));
  EXPECT_DOUBLE_EQ(s.beta, 2.0);
}

TEST(Histogram, SingleBin) {
  const auto h = histogram(set_of({1, 1, 1}), 1, false);
  ASSERT_EQ(h.counts.size(), 1u);
  EXPECT_EQ(h.counts[0], 3u);
}

TEST(Histogram, CountsConserved) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = random_set(rng, 1 + rng.below(100));
    if (trial % 3 == 0) v.push_back(0.0);
    const int bins = 1 + static_cast<int>(rng.below(30));
    for (bool log_scale : {false, true}) {
      const auto h = histogram(set_of(v), bins, log_scale);
      ASSERT_EQ(h.total(), v.size());
      ASSERT_EQ(h.edges.size(), h.counts.size() + 1);
    }
  }
}

TEST(Histogram, LogModeUnderflowAndCsv) {
  const auto h = histogram(set_of({0.0, 1e-6, 1e-6, 0.5, 0.6}), 6, true);
  EXPECT_EQ(h.underflow, 1u);
  EXPECT_EQ(h.counts.front(), 2u);
  EXPECT_EQ(h.counts.back(), 2u);
  const auto csv = h.to_csv();
  EXPECT_EQ(csv.rfind("bin_low,bin_high,count\n0,0,1\n", 0), 0u);
}

}  // namespace
}  // namespace otprune

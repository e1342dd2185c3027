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

#include <cmath>

#include "otprune/complexity.hpp"
#include "otprune/engine.hpp"
#include "otprune/errors.hpp"
#include "otprune/surgery.hpp"
#include "../common/test_nets.hpp"

namespace otprune {
namespace {

using testing::dense_net;
using testing::random_input;
using testing::randomize_batchnorms;
using testing::residual_net;
using testing::sequential_net;
using testing::zero_channels;

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.data.size(), b.data.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

void set_gamma(NetworkGraph& g, const std::string& bn, std::vector<float> v) {
  g.at(bn).as<BatchNormParams>().gamma = std::move(v);
}

NetworkGraph two_layer_net() {
  auto g = sequential_net(1, 4);
  set_gamma(g, "a.bn", {1e-5f, 1e-5f, 0.4f, 0.5f});
  set_gamma(g, "b.bn", {1e-6f, 0.2f, 0.3f, 0.3f});
  return g;
}

TEST(PlanPrune, OtKeepsLargeModes) {
  const auto plan = plan_prune(two_layer_net());
  EXPECT_EQ(plan.find("a.bn")->keep, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(plan.find("b.bn")->keep, (std::vector<std::uint8_t>{0, 1, 1, 1}));
  EXPECT_FLOAT_EQ(static_cast<float>(plan.find("a.bn")->threshold), 0.4f);
  EXPECT_FLOAT_EQ(static_cast<float>(plan.find("b.bn")->threshold), 0.2f);
}

TEST(PlanPrune, NsPrunesGlobalPercentile) {
  PlanOptions opts;
  opts.method = PruneMethod::NS;
  opts.ns_percent = 0.5;
  const auto g = two_layer_net();
  const auto plan = plan_prune(g, opts);
  EXPECT_EQ(plan.pruned_channels(g), 4u);
  // Sorted union: 1e-6 1e-5 1e-5 0.2 | 0.3 0.3 0.4 0.5
  EXPECT_EQ(plan.find("a.bn")->keep, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(plan.find("b.bn")->keep, (std::vector<std::uint8_t>{0, 0, 1, 1}));
}

TEST(PlanPrune, NsLayerCap) {
  PlanOptions opts;
  opts.method = PruneMethod::NS;
  opts.ns_percent = 0.75;
  opts.ns_layer_cap = 0.5;
  const auto plan = plan_prune(two_layer_net(), opts);
  for (const auto& l : plan.layers) EXPECT_GE(l.kept(), 2) << l.bn;
}

TEST(PlanPrune, DegenerateLayerNamed) {
  auto g = two_layer_net();
  set_gamma(g, "b.bn", {0, 0, 0, 0});
  try {
    plan_prune(g);
    FAIL();
  } catch (const DegenerateDistribution& e) {
    EXPECT_EQ(e.origin(), "b.bn");
  }
}

TEST(PlanPrune, ResidualBranchBelowGlobalThreshold) {
  auto g = residual_net(2);
  set_gamma(g, "block1.2.bn", std::vector<float>(6, 1e-7f));
  const auto plan = plan_prune(g);
  EXPECT_GT(plan.gamma_g, 1e-7);
  ASSERT_EQ(plan.branches_to_remove.size(), 1u);
  EXPECT_EQ(plan.branches_to_remove[0], "block1.2.bn");
}

TEST(Branches, ResidualAndDense) {
  const auto res = find_branches(residual_net(0));
  ASSERT_EQ(res.size(), 3u);
  EXPECT_EQ(res[0].last_bn, "block1.2.bn");
  EXPECT_EQ(res[0].junction, "block1.add");
  EXPECT_EQ(res[0].nodes.back(), "block1.1.conv");
  const auto dense = find_branches(dense_net(0));
  ASSERT_EQ(dense.size(), 2u);
  EXPECT_EQ(dense[0].last_bn, "dense1.norm2");
  EXPECT_EQ(dense[0].nodes.size(), 6u);
}

TEST(Classify, Modes) {
  std::map<std::string, BnPruneMode> m;
  for (const auto& [k, v] : classify_batchnorms(residual_net(0))) m[k] = v;
  EXPECT_EQ(m["stem.bn"], BnPruneMode::Pinned);
  EXPECT_EQ(m["block1.1.bn"], BnPruneMode::Structural);
  EXPECT_EQ(m["block1.2.bn"], BnPruneMode::Pinned);
  EXPECT_EQ(m["block2.down.bn"], BnPruneMode::Pinned);
  m.clear();
  for (const auto& [k, v] : classify_batchnorms(dense_net(0))) m[k] = v;
  EXPECT_EQ(m["dense1.norm1"], BnPruneMode::ChannelSelect);
  EXPECT_EQ(m["dense1.norm2"], BnPruneMode::Structural);
  EXPECT_EQ(m["trans.norm"], BnPruneMode::ChannelSelect);
  EXPECT_EQ(m["norm5"], BnPruneMode::ChannelSelect);
}

TEST(ApplyPrune, IdentityPlanIsIdentity) {
  for (const auto& g : {sequential_net(1), residual_net(1), dense_net(1), build_preset("densenet121_cifar", 10)}) {
    const auto r = apply_prune(g, identity_plan(g));
    EXPECT_TRUE(r.graph == g) << g.name();
    EXPECT_TRUE(r.warnings.empty());
  }
}

TEST(ApplyPrune, SequentialParameterArithmetic) {
  auto g = sequential_net(3);
  auto plan = identity_plan(g);
  auto& keep = const_cast<LayerPlan*>(plan.find("a.bn"))->keep;
  keep[1] = keep[4] = keep[6] = 0;
  const auto r = apply_prune(g, plan);
  EXPECT_EQ(r.graph.at("a.conv").as<Conv2DParams>().out_channels, 5);
  EXPECT_EQ(r.graph.at("b.conv").as<Conv2DParams>().in_channels, 5);
  EXPECT_EQ(r.graph.at("a.bn").as<BatchNormParams>().channels(), 5);
  // a.conv: 3 filters of 3*3*3; a.bn: 3 channels * 4; b.conv: 3 input slices of 4*3*3.
  const auto delta = count_complexity(g).params - count_complexity(r.graph).params;
  EXPECT_EQ(delta, 3 * 27 + 3 * 4 + 3 * 4 * 9);
  const auto report = make_report(g, r.graph, plan, {}, 0);
  EXPECT_NEAR(report.pruned_params_pct(),
              100.0 * delta / count_complexity(g).params, 1e-12);
}

void expect_preserved(NetworkGraph g, const std::vector<std::pair<std::string, std::vector<int>>>& dead) {
  randomize_batchnorms(g, 5);
  for (const auto& [bn, ch] : dead) zero_channels(g, bn, ch);
  auto plan = identity_plan(g);
  for (const auto& [bn, ch] : dead) {
    auto* lp = const_cast<LayerPlan*>(plan.find(bn));
    for (int c : ch) lp->keep[c] = 0;
  }
  const auto r = apply_prune(g, plan);
  EXPECT_TRUE(validate(r.graph).empty());
  EXPECT_LT(count_complexity(r.graph).flops, count_complexity(g).flops);
  const auto in = random_input(g.input_shape(), 50, 17);
  EXPECT_LT(max_abs_diff(forward(g, in), forward(r.graph, in)), 1e-6);
}

TEST(ApplyPrune, ZeroChannelsPreserveFunctionSequential) {
  expect_preserved(sequential_net(4), {{"a.bn", {0, 3, 5}}, {"b.bn", {2}}});
}

TEST(ApplyPrune, ZeroChannelsPreserveFunctionResidual) {
  expect_preserved(residual_net(4), {{"block1.1.bn", {0, 4}}, {"block2.1.bn", {3}}});
}

TEST(ApplyPrune, ZeroChannelsPreserveFunctionChannelSelect) {
  NetworkGraph g = dense_net(4);
  expect_preserved(g, {{"dense1.norm1", {2}}, {"dense2.norm1", {0, 7}}, {"trans.norm", {1, 9}}, {"dense1.norm2", {5}}});
  auto plan = identity_plan(g);
  const_cast<LayerPlan*>(plan.find("dense2.norm1"))->keep[0] = 0;
  const auto r = apply_prune(g, plan);
  EXPECT_TRUE(r.graph.find("dense2.norm1.select").has_value());
}

TEST(ApplyPrune, RemovedResidualBranchMatchesSkipOnly) {
  auto g = residual_net(6);
  randomize_batchnorms(g, 6);
  zero_channels(g, "block1.2.bn", {0, 1, 2, 3, 4, 5});
  auto plan = identity_plan(g);
  plan.branches_to_remove = {"block1.2.bn"};
  const auto r = apply_prune(g, plan);
  EXPECT_FALSE(r.graph.find("block1.add").has_value());
  EXPECT_FALSE(r.graph.find("block1.1.conv").has_value());
  // Skip-only oracle: the residual branch contributes nothing.
  auto oracle = g;
  auto& conv = oracle.at("block1.2.conv").as<Conv2DParams>();
  std::fill(conv.weight.begin(), conv.weight.end(), 0.0f);
  const auto in = random_input(g.input_shape(), 50, 3);
  EXPECT_LT(max_abs_diff(forward(oracle, in), forward(r.graph, in)), 1e-6);
}

TEST(ApplyPrune, RemovedDenseBranchShrinksConcat) {
  const auto g = dense_net(2);
  auto plan = identity_plan(g);
  plan.branches_to_remove = {"dense2.conv2"};
  const auto r = apply_prune(g, plan);
  EXPECT_TRUE(validate(r.graph).empty());
  EXPECT_EQ(r.graph.at("trans.norm").as<BatchNormParams>().channels(), 10);
}

TEST(ApplyPrune, MinChannelGuard) {
  auto g = sequential_net(2);
  set_gamma(g, "a.bn", {1e-3f, 2e-3f, 1e-3f, 5e-3f, 1e-3f, 1e-3f, 1e-3f, 1e-3f});
  auto plan = identity_plan(g);
  auto* lp = const_cast<LayerPlan*>(plan.find("a.bn"));
  std::fill(lp->keep.begin(), lp->keep.end(), 0);
  const auto r = apply_prune(g, plan);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.graph.at("a.conv").as<Conv2DParams>().out_channels, 1);
  EXPECT_FLOAT_EQ(r.graph.at("a.bn").as<BatchNormParams>().gamma[0], 5e-3f);
}

TEST(ApplyPrune, IdempotentAndMonotone) {
  const auto g = dense_net(9);
  auto plan = identity_plan(g);
  Rng rng(1);
  for (auto& l : plan.layers) {
    if (l.mode == BnPruneMode::Pinned) continue;
    for (auto& k : l.keep) k = rng.below(3) != 0;
  }
  const auto once = apply_prune(g, plan).graph;
  EXPECT_LE(count_complexity(once).params, count_complexity(g).params);
  EXPECT_TRUE(apply_prune(once, identity_plan(once)).graph == once);
  // A second round narrows the existing selects instead of stacking new ones.
  auto plan2 = identity_plan(once);
  for (auto& l : plan2.layers) {
    if (l.mode == BnPruneMode::ChannelSelect && l.keep.size() > 1) l.keep[0] = 0;
  }
  const auto twice = apply_prune(once, plan2).graph;
  EXPECT_TRUE(validate(twice).empty());
  EXPECT_FALSE(twice.find("dense1.norm1.select_").has_value());
}

TEST(ApplyPrune, PlanMismatch) {
  const auto g = residual_net(0);
  auto plan = identity_plan(g);
  const_cast<LayerPlan*>(plan.find("block1.2.bn"))->keep[0] = 0;
  EXPECT_THROW(apply_prune(g, plan), PlanMismatch);
  auto plan2 = identity_plan(g);
  plan2.layers.front().keep.pop_back();
  EXPECT_THROW(apply_prune(g, plan2), PlanMismatch);
  auto plan3 = identity_plan(g);
  plan3.branches_to_remove = {"nope"};
  EXPECT_THROW(apply_prune(g, plan3), PlanMismatch);
}

TEST(Report, IdentityAndJsonRoundTrip) {
  const auto g = residual_net(0);
  const auto plan = identity_plan(g);
  const auto r = make_report(g, apply_prune(g, plan).graph, plan, {90.0, 89.5, std::nullopt}, 7);
  EXPECT_EQ(r.pruned_flops_pct(), 0.0);
  EXPECT_EQ(r.pruned_params_pct(), 0.0);
  const auto back = PruneReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_EQ(PruneReport::csv_header(),
            "method,lambda,delta,flops_before,flops_after,params_before,params_after,acc_pre,acc_post,seed");
  EXPECT_EQ(r.csv_row().substr(r.csv_row().size() - 3), ",,7");
}

TEST(Plan, JsonRoundTrip) {
  const auto plan = plan_prune(two_layer_net());
  const auto back = PrunePlan::from_json(plan.to_json());
  EXPECT_EQ(back.to_json(), plan.to_json());
}

}  // namespace
}  // namespace otprune

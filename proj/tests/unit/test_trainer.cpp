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
#include <numeric>

#include "../common/test_nets.hpp"
#include "otprune/complexity.hpp"
#include "otprune/dataset.hpp"
#include "otprune/errors.hpp"
#include "otprune/presets.hpp"
#include "otprune/trainer.hpp"

namespace otprune {
namespace {

using testing::random_input;
using testing::random_small_graph;

std::vector<int> random_labels(int batch, int classes, std::uint64_t seed) {
  Rng rng(seed, "labels");
  std::vector<int> out;
  for (int i = 0; i < batch; ++i) out.push_back(static_cast<int>(rng.below(classes)));
  return out;
}

double gamma_l1(const NetworkGraph& g) {
  double s = 0.0;
  for (const auto& name : g.batchnorm_names()) {
    for (float v : g.at(name).as<BatchNormParams>().gamma) s += std::abs(v);
  }
  return s;
}

NetworkGraph toy_cnn(std::uint64_t seed, int classes = 4) {
  PresetOptions o;
  o.num_classes = classes;
  o.seed = seed;
  return build_preset("toy_cnn", o);
}

// Short schedule used where only relative behaviour matters.
TrainConfig quick(double lambda, std::uint64_t seed) {
  auto c = TrainConfig::toy_sparse(lambda);
  c.epochs = 4;
  c.lr_steps.clear();
  c.seed = seed;
  return c;
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig::toy_sparse(0.01).validate());
  auto c = TrainConfig::toy_sparse(-1.0);
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig::toy_fine_tune();
  c.lambda = 0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig::toy_sparse(0.0);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig::toy_sparse(0.0);
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig::toy_sparse(0.0);
  c.lr_steps.push_back({3, 0.0});
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainConfig, StepSchedule) {
  const auto c = TrainConfig::cifar_sparse(1e-4);
  EXPECT_DOUBLE_EQ(c.lr_at(0), 0.1);
  EXPECT_DOUBLE_EQ(c.lr_at(79), 0.1);
  EXPECT_NEAR(c.lr_at(80), 0.01, 1e-15);
  EXPECT_NEAR(c.lr_at(159), 0.001, 1e-15);
  EXPECT_EQ(c.epochs, 160);
  EXPECT_EQ(c.batch_size, 64);
  const auto ft = TrainConfig::cifar_fine_tune();
  EXPECT_EQ(ft.epochs, 40);
  EXPECT_DOUBLE_EQ(ft.lr_at(39), 0.001);
}

TEST(GradientCheck, ToyMlp) {
  PresetOptions o;
  o.num_classes = 3;
  o.seed = 5;
  auto g = build_preset("toy_mlp", o);
  testing::randomize_batchnorms(g, 5);
  const auto x = random_input(g.input_shape(), 4, 6);
  const auto y = random_labels(4, 3, 7);
  GradCheckOptions opts;
  EXPECT_LT(gradient_check(g, x, y, opts), 1e-3);
  opts.bn_mode = BnMode::Training;
  EXPECT_LT(gradient_check(g, x, y, opts), 1e-3);
}

TEST(GradientCheck, LinearQuadraticIsExact) {
  GraphBuilder b("linear", {5, 1, 1});
  auto g = b.finish(b.linear(b.input(), 3, true, "fc"));
  initialize_weights(g, 2);
  const auto x = random_input(g.input_shape(), 3, 4);
  GradCheckOptions opts;
  opts.loss = LossKind::Quadratic;
  EXPECT_LT(gradient_check(g, x, random_labels(3, 3, 1), opts), 1e-6);
}

TEST(GradientCheck, BatchNormInTrainingMode) {
  GraphBuilder b("bn", {2, 4, 4});
  auto x = b.conv(b.input(), 3, 3, 1, 1, true);
  x = b.batchnorm(x);
  x = b.global_avgpool(b.relu(x));
  auto g = b.finish(b.linear(x, 2));
  initialize_weights(g, 8);
  testing::randomize_batchnorms(g, 8);
  GradCheckOptions opts;
  opts.bn_mode = BnMode::Training;
  EXPECT_LT(gradient_check(g, random_input(g.input_shape(), 5, 9), random_labels(5, 2, 9), opts),
            1e-3);
}

TEST(GradientCheck, RandomConvGraphs) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = random_small_graph(100 + s);
    ASSERT_LE(count_complexity(g).params, 5000);
    const auto x = random_input(g.input_shape(), 4, s);
    const auto y = random_labels(4, g.infer_shapes()[g.output_index()].numel(), s);
    for (auto mode : {BnMode::Inference, BnMode::Training}) {
      GradCheckOptions opts;
      opts.bn_mode = mode;
      EXPECT_LT(gradient_check(g, x, y, opts), 1e-3) << "graph " << s;
    }
  }
}

TEST(GradientCheck, RejectsWrongShape) {
  const auto g = random_small_graph(1);
  Tensor bad{2, Shape{9, 9, 9}, std::vector<double>(2 * 729, 0.0)};
  EXPECT_THROW(gradient_check(g, bad, std::vector<int>{0, 1}), ShapeError);
}

TEST(Train, ZeroEpochsIsNoOp) {
  const auto data = make_synthetic(4, 20, 8, 1);
  const auto g = toy_cnn(1);
  auto c = TrainConfig::toy_sparse(0.1);
  c.epochs = 0;
  const auto r = train(g, data, c);
  EXPECT_TRUE(r.graph == g);
  EXPECT_TRUE(r.trace.epochs.empty());
  EXPECT_EQ(r.trace.gammas.size(), g.batchnorm_names().size());
}

TEST(Train, BitIdenticalAcrossRuns) {
  const auto data = make_synthetic(4, 30, 8, 2);
  auto c = quick(0.01, 9);
  c.augment = true;
  const auto a = train(toy_cnn(2), data, c);
  const auto b = train(toy_cnn(2), data, c);
  EXPECT_TRUE(a.graph == b.graph);
  EXPECT_EQ(a.trace.to_csv(), b.trace.to_csv());
  c.seed = 10;
  EXPECT_FALSE(train(toy_cnn(2), data, c).graph == a.graph);
}

TEST(Train, PenaltyMatchesFinalScales) {
  const auto data = make_synthetic(4, 30, 8, 3);
  const auto r = train(toy_cnn(3), data, quick(0.02, 3));
  ASSERT_EQ(r.trace.epochs.size(), 4u);
  EXPECT_NEAR(r.trace.epochs.back().l1_penalty, 0.02 * gamma_l1(r.graph), 1e-6);
  double snap = 0.0;
  for (const auto& [name, values] : r.trace.gammas) {
    EXPECT_EQ(values, r.graph.at(name).as<BatchNormParams>().gamma);
    for (float v : values) snap += std::abs(v);
  }
  EXPECT_DOUBLE_EQ(snap, gamma_l1(r.graph));
}

TEST(Train, ScaleMassNonIncreasingInLambda) {
  const auto data = make_synthetic(4, 40, 8, 4);
  double previous = INFINITY;
  for (double lambda : {0.0, 1e-3, 1e-2, 1e-1}) {
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      mean += gamma_l1(train(toy_cnn(s), data, quick(lambda, s)).graph) / 5.0;
    }
    EXPECT_LE(mean, previous) << "lambda " << lambda;
    previous = mean;
  }
}

TEST(Train, DivergenceIsReported) {
  const auto data = make_synthetic(4, 20, 8, 5);
  auto c = quick(0.0, 5);
  c.lr = 1e300;
  EXPECT_THROW(train(toy_cnn(5), data, c), TrainingDiverged);
}

TEST(Train, TraceCsv) {
  TrainTrace t;
  t.epochs.push_back({1, 0.5, 0.25, 75.0});
  EXPECT_EQ(t.to_csv(), "epoch,loss,l1_penalty,test_acc\n1,0.5,0.25,75\n");
}

TEST(Train, ScratchEpochBudget) {
  EXPECT_EQ(scratch_epochs(10, 100, 100), 10);
  EXPECT_EQ(scratch_epochs(10, 100, 80), 13);
  EXPECT_EQ(scratch_epochs(10, 100, 50), 20);
  EXPECT_EQ(scratch_epochs(10, 100, 10), 20);
}

TEST(Train, FromScratchReinitializes) {
  const auto data = make_synthetic(4, 20, 8, 6);
  auto c = quick(0.0, 6);
  c.mode = TrainMode::TrainFromScratch;
  c.epochs = 1;
  const auto g = toy_cnn(6);
  const auto r = train_from_scratch(g, count_complexity(g).flops * 2, data, c);
  EXPECT_EQ(r.trace.epochs.size(), 2u);
  EXPECT_TRUE(validate(r.graph).empty());
  EXPECT_FALSE(r.graph == g);
}

// Trained once, shared by the slower accuracy checks below.
class TrainedToy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new DataSplits(make_synthetic(4, 500, 8, 0));
    auto c = TrainConfig::toy_sparse(0.0);
    c.epochs = 20;
    c.lr_steps = {{10, 0.1}, {15, 0.1}};
    model_ = new NetworkGraph(train(toy_cnn(0), *data_, c).graph);
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
  }
  static DataSplits* data_;
  static NetworkGraph* model_;
};
DataSplits* TrainedToy::data_ = nullptr;
NetworkGraph* TrainedToy::model_ = nullptr;

TEST_F(TrainedToy, UnregularizedReachesHighAccuracy) {
  EXPECT_GE(accuracy(*model_, data_->test), 95.0);
}

TEST_F(TrainedToy, FineTuneKeepsAccuracy) {
  const double before = accuracy(*model_, data_->test);
  auto c = TrainConfig::toy_fine_tune();
  c.seed = 1;
  const auto r = fine_tune(*model_, *data_, c);
  ASSERT_EQ(r.trace.epochs.size(), 5u);
  EXPECT_GE(accuracy(r.graph, data_->test), before - 1.0);
  EXPECT_DOUBLE_EQ(r.trace.epochs.back().test_acc, accuracy(r.graph, data_->test));
}

}  // namespace
}  // namespace otprune

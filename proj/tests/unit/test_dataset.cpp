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
#include <filesystem>
#include <fstream>
#include <set>

#include "otprune/dataset.hpp"
#include "otprune/errors.hpp"

namespace otprune {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("otprune_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One record: label byte then 3072 channel-planar pixels.
std::vector<unsigned char> record(unsigned char label, unsigned char fill) {
  std::vector<unsigned char> r(3073, fill);
  r[0] = label;
  r[1] = 0;
  r[1 + 1024] = 255;
  return r;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TEST(Synthetic, Deterministic) {
  const auto a = make_synthetic(4, 100, 8, 1);
  const auto b = make_synthetic(4, 100, 8, 1);
  EXPECT_EQ(a.train.images, b.train.images);
  EXPECT_EQ(a.train.labels, b.train.labels);
  EXPECT_EQ(a.test.images, b.test.images);
  EXPECT_NE(make_synthetic(4, 100, 8, 2).train.images, a.train.images);
}

TEST(Synthetic, SplitAndLabels) {
  const auto d = make_synthetic(4, 100, 8, 1);
  EXPECT_EQ(d.train.size(), 320u);
  EXPECT_EQ(d.test.size(), 80u);
  EXPECT_EQ(d.train.shape, (Shape{3, 8, 8}));
  EXPECT_EQ(d.train.images.size(), 320u * 192u);
  for (const auto* split : {&d.train, &d.test}) {
    const std::set<int> seen(split->labels.begin(), split->labels.end());
    EXPECT_EQ(seen, (std::set<int>{0, 1, 2, 3}));
  }
}

TEST(Synthetic, NearestCentroidSeparates) {
  const auto d = make_synthetic(4, 100, 8, 1);
  const std::size_t n = d.train.sample_size();
  std::vector<std::vector<double>> centroid(4, std::vector<double>(n, 0.0));
  std::vector<int> count(4, 0);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const int k = d.train.labels[i];
    ++count[k];
    for (std::size_t j = 0; j < n; ++j) centroid[k][j] += d.train.image(i)[j];
  }
  for (int k = 0; k < 4; ++k) {
    for (auto& v : centroid[k]) v /= count[k];
  }
  int correct = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    int best = -1;
    double best_d = INFINITY;
    for (int k = 0; k < 4; ++k) {
      double dist = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = d.test.image(i)[j] - centroid[k][j];
        dist += e * e;
      }
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    correct += best == d.test.labels[i];
  }
  EXPECT_GE(100.0 * correct / static_cast<double>(d.test.size()), 99.0);
}

TEST(Synthetic, MarginMatchesPrototypes) {
  double smallest = INFINITY;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const auto pa = synthetic_prototype(4, a, 8);
      const auto pb = synthetic_prototype(4, b, 8);
      double s = 0.0;
      for (std::size_t j = 0; j < pa.size(); ++j) s += (pa[j] - pb[j]) * (pa[j] - pb[j]);
      smallest = std::min(smallest, std::sqrt(s));
    }
  }
  EXPECT_NEAR(synthetic_margin(4, 8), smallest / kSyntheticNoise, 1e-9);
  EXPECT_TRUE(std::isinf(synthetic_margin(1, 8)));
}

TEST(Cifar, ParsesRecords) {
  const auto dir = temp_dir("cifar_ok");
  auto bytes = record(3, 128);
  const auto second = record(9, 10);
  bytes.insert(bytes.end(), second.begin(), second.end());
  write_bytes(dir / "batch.bin", bytes);
  const auto d = parse_cifar10_file(dir / "batch.bin", Split::Train, false);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.labels, (std::vector<int>{3, 9}));
  EXPECT_EQ(d.shape, (Shape{3, 32, 32}));
  EXPECT_FLOAT_EQ(d.image(0)[0], 0.0f);
  EXPECT_FLOAT_EQ(d.image(0)[1024], 1.0f);
  EXPECT_FLOAT_EQ(d.image(0)[5], 128.0f / 255.0f);
  for (float v : d.images) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const auto norm = parse_cifar10_file(dir / "batch.bin", Split::Train, true);
  EXPECT_LT(norm.image(0)[0], 0.0f);
}

TEST(Cifar, RejectsBadLength) {
  const auto dir = temp_dir("cifar_len");
  auto bytes = record(1, 0);
  bytes.pop_back();
  write_bytes(dir / "batch.bin", bytes);
  EXPECT_THROW(parse_cifar10_file(dir / "batch.bin", Split::Train, false), DatasetError);
}

TEST(Cifar, RejectsBadLabel) {
  const auto dir = temp_dir("cifar_label");
  write_bytes(dir / "batch.bin", record(10, 0));
  EXPECT_THROW(parse_cifar10_file(dir / "batch.bin", Split::Train, false), DatasetError);
}

TEST(Cifar, MissingFile) {
  const auto dir = temp_dir("cifar_missing");
  EXPECT_THROW(load_cifar10(dir), DatasetError);
}

TEST(Cifar, LoadsDirectory) {
  const auto dir = temp_dir("cifar_dir");
  for (int i = 1; i <= 5; ++i) write_bytes(dir / ("data_batch_" + std::to_string(i) + ".bin"), record(i, 7));
  write_bytes(dir / "test_batch.bin", record(0, 7));
  const auto d = load_cifar10(dir, false);
  EXPECT_EQ(d.train.labels, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(d.test.size(), 1u);
  EXPECT_EQ(d.train.num_classes, 10);
}

TEST(Batches, GatherWithoutAugmentCopies) {
  const auto d = make_synthetic(2, 5, 6, 3);
  std::vector<std::size_t> order{3, 1, 0};
  std::vector<double> out;
  std::vector<int> labels;
  gather_batch(d.train, order, 1, 2, nullptr, out, labels);
  ASSERT_EQ(out.size(), 2 * d.train.sample_size());
  EXPECT_EQ(labels, (std::vector<int>{d.train.labels[1], d.train.labels[0]}));
  EXPECT_EQ(out[0], d.train.image(1)[0]);
}

TEST(Batches, AugmentIsCropOrMirrorOfSource) {
  // Constant image: every crop that stays inside the original is unchanged,
  // and padded borders are zero.
  Dataset d;
  d.shape = {1, 4, 4};
  d.num_classes = 1;
  d.images.assign(16, 1.0f);
  d.labels = {0};
  Rng rng(1, "augment");
  std::vector<double> out;
  std::vector<int> labels;
  for (int t = 0; t < 20; ++t) {
    gather_batch(d, {0}, 0, 1, &rng, out, labels);
    double sum = 0.0;
    for (double v : out) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      sum += v;
    }
    EXPECT_GE(sum, 0.0);
    EXPECT_LE(sum, 16.0);
  }
}

}  // namespace
}  // namespace otprune

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
#include <filesystem>
#include <vector>

#include "otprune/graph.hpp"
#include "otprune/rng.hpp"

namespace otprune {

enum class Split { Train, Test };

/// Images stored NCHW as float32, one label per sample.
struct Dataset {
  Split split = Split::Train;
  Shape shape;
  int num_classes = 0;
  std::vector<float> images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(shape.numel()); }
  const float* image(std::size_t i) const { return images.data() + i * sample_size(); }
};

struct DataSplits {
  Dataset train;
  Dataset test;
};

/// Per-pixel standard deviation of the additive noise in make_synthetic.
inline constexpr double kSyntheticNoise = 0.35;

/// Class-conditional Gaussian-blob images. Class k has a blob centred on a
/// circle of radius image_size/4 at angle 2*pi*k/K, with colour
/// c[ch] = 0.5 + 0.5*cos(2*pi*k/K + 2*pi*ch/3). Each sample scales its class
/// prototype by U(0.8, 1.2), moves the blob centre by U(-0.5, 0.5) pixels on
/// each axis and adds N(0, kSyntheticNoise^2) per pixel. Per class, the first
/// round(0.8*n) samples go to the train split and the rest to test.
DataSplits make_synthetic(int num_classes, int samples_per_class,
                          int image_size, std::uint64_t seed);

/// Noise-free class prototype for make_synthetic (3 x size x size, CHW).
std::vector<float> synthetic_prototype(int num_classes, int label,
                                       int image_size);

/// Smallest distance between two class prototypes in units of the noise
/// standard deviation. Returns +inf for a single class.
double synthetic_margin(int num_classes, int image_size);

/// Parses one CIFAR-10 binary batch file: records of 1 label byte followed by
/// 3072 channel-planar pixel bytes. Pixels map to [0, 1]; with `normalize`
/// they are further standardized with the usual per-channel CIFAR-10 mean
/// and standard deviation.
Dataset parse_cifar10_file(const std::filesystem::path& file, Split split,
                           bool normalize);

/// Loads data_batch_1..5.bin and test_batch.bin from `dir`.
DataSplits load_cifar10(const std::filesystem::path& dir, bool normalize = true);

/// Writes `count` samples of `data` starting at indices[first] into `out`,
/// applying 4-pixel zero padding + random crop + random horizontal mirror
/// when `rng` is non-null.
void gather_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                  std::size_t first, std::size_t count, Rng* rng,
                  std::vector<double>& out, std::vector<int>& labels);

}  // namespace otprune

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

#include "otprune/dataset.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "otprune/errors.hpp"

namespace otprune {

namespace {

constexpr std::size_t kCifarPixels = 3072;
constexpr std::size_t kCifarRecord = kCifarPixels + 1;
constexpr std::array<double, 3> kCifarMean{0.4914, 0.4822, 0.4465};
constexpr std::array<double, 3> kCifarStd{0.2470, 0.2435, 0.2616};
constexpr int kPad = 4;

void check_sizes(int num_classes, int samples_per_class, int image_size) {
  if (num_classes < 1 || samples_per_class < 1 || image_size < 1) {
    throw ConfigError("synthetic dataset sizes must be >= 1");
  }
}

// Blob image for `label`, displaced by (dy, dx) pixels.
void render_blob(int num_classes, int label, int size, double dy, double dx,
                 double amplitude, float* out) {
  const double angle = 2.0 * std::numbers::pi * label / num_classes;
  const double centre = (size - 1) / 2.0;
  const double radius = size / 4.0;
  const double cy = centre + radius * std::sin(angle) + dy;
  const double cx = centre + radius * std::cos(angle) + dx;
  const double width = std::max(size / 6.0, 0.5);
  for (int ch = 0; ch < 3; ++ch) {
    const double colour = 0.5 + 0.5 * std::cos(angle + 2.0 * std::numbers::pi * ch / 3.0);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        out[(ch * size + y) * size + x] = static_cast<float>(
            amplitude * colour * std::exp(-d2 / (2 * width * width)));
      }
    }
  }
}

}  // namespace

std::vector<float> synthetic_prototype(int num_classes, int label, int image_size) {
  check_sizes(num_classes, 1, image_size);
  std::vector<float> img(3 * static_cast<std::size_t>(image_size) * image_size);
  render_blob(num_classes, label, image_size, 0, 0, 1.0, img.data());
  return img;
}

double synthetic_margin(int num_classes, int image_size) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_classes; ++a) {
    const auto pa = synthetic_prototype(num_classes, a, image_size);
    for (int b = a + 1; b < num_classes; ++b) {
      const auto pb = synthetic_prototype(num_classes, b, image_size);
      double d2 = 0.0;
      for (std::size_t i = 0; i < pa.size(); ++i) d2 += (pa[i] - pb[i]) * (pa[i] - pb[i]);
      best = std::min(best, std::sqrt(d2) / kSyntheticNoise);
    }
  }
  return best;
}

DataSplits make_synthetic(int num_classes, int samples_per_class,
                          int image_size, std::uint64_t seed) {
  check_sizes(num_classes, samples_per_class, image_size);
  const Shape shape{3, image_size, image_size};
  DataSplits out;
  out.train = {Split::Train, shape, num_classes, {}, {}};
  out.test = {Split::Test, shape, num_classes, {}, {}};
  const std::size_t n = shape.numel();
  const int train_per_class =
      static_cast<int>(std::lround(0.8 * samples_per_class));
  Rng rng(seed, "synthetic");
  std::vector<float> img(n);
  for (int k = 0; k < num_classes; ++k) {
    for (int i = 0; i < samples_per_class; ++i) {
      const double amplitude = rng.uniform(0.8, 1.2);
      const double dy = rng.uniform(-0.5, 0.5);
      const double dx = rng.uniform(-0.5, 0.5);
      render_blob(num_classes, k, image_size, dy, dx, amplitude, img.data());
      for (auto& v : img) v += static_cast<float>(kSyntheticNoise * rng.normal());
      Dataset& dst = i < train_per_class ? out.train : out.test;
      dst.images.insert(dst.images.end(), img.begin(), img.end());
      dst.labels.push_back(k);
    }
  }
  return out;
}

Dataset parse_cifar10_file(const std::filesystem::path& file, Split split,
                           bool normalize) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DatasetError("cannot open CIFAR-10 file " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw DatasetError("record length mismatch in " + file.string() + ": " +
                       std::to_string(bytes.size()) +
                       " bytes is not a multiple of 3073");
  }
  Dataset d{split, {3, 32, 32}, 10, {}, {}};
  const std::size_t records = bytes.size() / kCifarRecord;
  d.images.resize(records * kCifarPixels);
  d.labels.resize(records);
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecord;
    if (rec[0] > 9) {
      throw DatasetError("label " + std::to_string(rec[0]) + " out of range in " +
                         file.string());
    }
    d.labels[r] = rec[0];
    for (std::size_t j = 0; j < kCifarPixels; ++j) {
      double v = rec[1 + j] / 255.0;
      if (normalize) {
        const std::size_t ch = j / 1024;
        v = (v - kCifarMean[ch]) / kCifarStd[ch];
      }
      d.images[r * kCifarPixels + j] = static_cast<float>(v);
    }
  }
  return d;
}

DataSplits load_cifar10(const std::filesystem::path& dir, bool normalize) {
  DataSplits out;
  out.train = {Split::Train, {3, 32, 32}, 10, {}, {}};
  for (int b = 1; b <= 5; ++b) {
    auto part = parse_cifar10_file(dir / ("data_batch_" + std::to_string(b) + ".bin"),
                                   Split::Train, normalize);
    out.train.images.insert(out.train.images.end(), part.images.begin(), part.images.end());
    out.train.labels.insert(out.train.labels.end(), part.labels.begin(), part.labels.end());
  }
  out.test = parse_cifar10_file(dir / "test_batch.bin", Split::Test, normalize);
  return out;
}

void gather_batch(const Dataset& data, const std::vector<std::size_t>& indices,
                  std::size_t first, std::size_t count, Rng* rng,
                  std::vector<double>& out, std::vector<int>& labels) {
  const std::size_t n = data.sample_size();
  const int C = data.shape.channels, H = data.shape.height, W = data.shape.width;
  out.resize(count * n);
  labels.resize(count);
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t idx = indices[first + b];
    const float* src = data.image(idx);
    double* dst = out.data() + b * n;
    labels[b] = data.labels[idx];
    if (!rng) {
      std::copy(src, src + n, dst);
      continue;
    }
    const int oy = static_cast<int>(rng->below(2 * kPad + 1)) - kPad;
    const int ox = static_cast<int>(rng->below(2 * kPad + 1)) - kPad;
    const bool mirror = rng->below(2) == 1;
    for (int c = 0; c < C; ++c) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const int sy = y + oy;
          const int sx0 = x + ox;
          const int sx = mirror ? W - 1 - sx0 : sx0;
          const bool inside = sy >= 0 && sy < H && sx0 >= 0 && sx0 < W;
          dst[(c * H + y) * W + x] = inside ? src[(c * H + sy) * W + sx] : 0.0;
        }
      }
    }
  }
}

}  // namespace otprune

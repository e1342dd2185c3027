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

#include <stdexcept>
#include <string>

namespace otprune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Graph does not satisfy a structural or shape invariant.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Model file could not be read or written, or its contents are malformed.
class SerializationError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape does not match what the graph expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Every scale in a set is zero; no threshold can be defined.
class DegenerateDistribution : public Error {
 public:
  explicit DegenerateDistribution(std::string origin)
      : Error("degenerate scale distribution (sum of powers is zero) in '" +
              origin + "'"),
        origin_(std::move(origin)) {}

  const std::string& origin() const noexcept { return origin_; }

 private:
  std::string origin_;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(int epoch)
      : Error("training diverged (non-finite loss) in epoch " +
              std::to_string(epoch)),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// A prune plan refers to nodes or channel counts the graph does not have.
class PlanMismatch : public Error {
 public:
  using Error::Error;
};

/// Dataset files are missing or malformed.
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace otprune

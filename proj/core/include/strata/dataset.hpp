// Copyright 2026 The Strata Authors. All Rights Reserved.
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
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "strata/network.hpp"

namespace strata {

/// Labelled samples stored row-major as float in [0, 1] (synthetic data is
/// unbounded).
struct Dataset {
  Shape3 shape;
  int classes = 0;
  std::vector<float> features;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return shape.size(); }
  std::span<const float> sample(std::size_t i) const;
};

/// CIFAR-10 binary batches: 3073-byte records, label byte then 3x32x32
/// channel-major pixels.
inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Throws FormatError when the size is not a whole number of records or a
/// label is out of range.
Dataset load_cifar10(const std::filesystem::path& file);
/// Concatenates the named batch files of a directory, in the order given.
Dataset load_cifar10_dir(const std::filesystem::path& dir,
                         const std::vector<std::string>& files);
/// Standard training files data_batch_1..5.bin.
std::vector<std::string> cifar10_train_files();
/// Writes CIFAR-10 records; features are clamped to [0, 1] and rounded to bytes.
void write_cifar10(const std::filesystem::path& file, const Dataset& data);

struct SynthOptions {
  int classes = 4;
  Shape3 shape{1, 1, 16};
  std::size_t samples = 1024;
  /// Distance of each class mean from the origin.
  double margin = 4.0;
  double noise = 1.0;
  std::uint64_t seed = 1;
};

/// Isotropic Gaussian clusters around random class means.
Dataset synth_dataset(const SynthOptions& opt);

/// Seeded shuffle into (train, test); test gets round(n * test_fraction).
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);
Dataset take(const Dataset& data, std::size_t n);

/// A global stream of sample indices built from seeded per-epoch
/// permutations. Iteration t (1-based) of a P-worker run with local batch K
/// covers positions [(t-1)PK, tPK); worker p takes every P-th of them
/// starting at p-1.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::uint64_t seed);

  std::size_t dataset_size() const { return n_; }
  std::size_t at(std::uint64_t position) const;
  std::vector<std::size_t> global_batch(std::int64_t iteration, std::size_t global_size) const;
  std::vector<std::size_t> worker_batch(std::int64_t iteration, int worker, int workers,
                                        std::size_t local_batch) const;

 private:
  const std::vector<std::uint32_t>& epoch(std::uint64_t e) const;

  std::size_t n_;
  std::uint64_t seed_;
  mutable std::map<std::uint64_t, std::vector<std::uint32_t>> cache_;
};

template <Real T>
DataBatch<T> make_batch(const Dataset& data, std::span<const std::size_t> indices);

/// Fraction of samples whose arg-max class matches the label.
template <Real T>
double accuracy(const Network<T>& net, const ModelState<T>& model, const Dataset& data,
                std::size_t chunk = 256);

/// Mean loss over the whole dataset.
template <Real T>
double mean_loss(const Network<T>& net, const ModelState<T>& model, const Dataset& data,
                 std::size_t chunk = 256);

}  // namespace strata

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

#include "strata/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "strata/errors.hpp"

namespace strata {

std::span<const float> Dataset::sample(std::size_t i) const {
  if (i >= size()) throw ShapeError("dataset: sample index out of range");
  return {features.data() + i * dim(), dim()};
}

namespace {

constexpr Shape3 kCifarShape{3, 32, 32};

void append_cifar(Dataset& out, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
    throw FormatError(file.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecordBytes));
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  const std::size_t dim = kCifarShape.size();
  out.features.reserve(out.features.size() + records * dim);
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] >= 10)
      throw FormatError(file.string() + ": label " + std::to_string(rec[0]) + " in record " +
                        std::to_string(r));
    out.labels.push_back(rec[0]);
    for (std::size_t j = 0; j < dim; ++j) out.features.push_back(rec[1 + j] / 255.0f);
  }
}

}  // namespace

Dataset load_cifar10(const std::filesystem::path& file) {
  Dataset d;
  d.shape = kCifarShape;
  d.classes = 10;
  append_cifar(d, file);
  return d;
}

Dataset load_cifar10_dir(const std::filesystem::path& dir, const std::vector<std::string>& files) {
  if (files.empty()) throw ConfigError("cifar10: no batch files named");
  Dataset d;
  d.shape = kCifarShape;
  d.classes = 10;
  for (const auto& f : files) append_cifar(d, dir / f);
  return d;
}

std::vector<std::string> cifar10_train_files() {
  return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
          "data_batch_5.bin"};
}

void write_cifar10(const std::filesystem::path& file, const Dataset& data) {
  if (!(data.shape == kCifarShape)) throw ShapeError("cifar10: samples must be 3x32x32");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write " + file.string());
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] >= 10) throw FormatError("cifar10: label out of range");
    rec[0] = data.labels[i];
    auto s = data.sample(i);
    for (std::size_t j = 0; j < s.size(); ++j) {
      const float v = std::clamp(s[j], 0.0f, 1.0f);
      rec[1 + j] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw FormatError("short write to " + file.string());
}

Dataset synth_dataset(const SynthOptions& opt) {
  if (opt.samples == 0) throw ConfigError("synthetic data: samples must be > 0");
  if (opt.classes < 2) throw ConfigError("synthetic data: need at least 2 classes");
  if (opt.shape.size() == 0) throw ConfigError("synthetic data: empty sample shape");
  if (!(opt.margin > 0) || !(opt.noise >= 0))
    throw ConfigError("synthetic data: margin must be > 0 and noise >= 0");
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t dim = opt.shape.size();

  std::vector<std::vector<double>> means(static_cast<std::size_t>(opt.classes),
                                         std::vector<double>(dim));
  for (auto& m : means) {
    double norm = 0;
    for (auto& x : m) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : m) x *= opt.margin / norm;
  }

  Dataset d;
  d.shape = opt.shape;
  d.classes = opt.classes;
  d.features.resize(opt.samples * dim);
  d.labels.resize(opt.samples);
  std::uniform_int_distribution<int> pick(0, opt.classes - 1);
  const double sigma = opt.noise / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < opt.samples; ++i) {
    const int c = pick(rng);
    d.labels[i] = static_cast<std::uint8_t>(c);
    for (std::size_t j = 0; j < dim; ++j)
      d.features[i * dim + j] = static_cast<float>(means[c][j] + sigma * gauss(rng));
  }
  return d;
}

namespace {

Dataset gather(const Dataset& data, std::span<const std::size_t> idx) {
  Dataset out;
  out.shape = data.shape;
  out.classes = data.classes;
  out.features.reserve(idx.size() * data.dim());
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    auto s = data.sample(i);
    out.features.insert(out.features.end(), s.begin(), s.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw ConfigError("split: test fraction must be in [0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(data.size() * test_fraction));
  std::span<const std::size_t> all(order);
  return {gather(data, all.subspan(n_test)), gather(data, all.first(n_test))};
}

Dataset take(const Dataset& data, std::size_t n) {
  std::vector<std::size_t> idx(std::min(n, data.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather(data, idx);
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::uint64_t seed)
    : n_(dataset_size), seed_(seed) {
  if (n_ == 0) throw ConfigError("sampler: empty dataset");
  if (n_ > UINT32_MAX) throw ConfigError("sampler: dataset too large");
}

const std::vector<std::uint32_t>& BatchSampler::epoch(std::uint64_t e) const {
  auto it = cache_.find(e);
  if (it != cache_.end()) return it->second;
  if (cache_.size() >= 4) cache_.erase(cache_.begin());
  std::vector<std::uint32_t> perm(n_);
  std::iota(perm.begin(), perm.end(), 0u);
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(e >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  return cache_.emplace(e, std::move(perm)).first->second;
}

std::size_t BatchSampler::at(std::uint64_t position) const {
  return epoch(position / n_)[position % n_];
}

std::vector<std::size_t> BatchSampler::global_batch(std::int64_t iteration,
                                                    std::size_t global_size) const {
  if (iteration < 1) throw ConfigError("sampler: iterations are 1-based");
  std::vector<std::size_t> out(global_size);
  const std::uint64_t base = static_cast<std::uint64_t>(iteration - 1) * global_size;
  for (std::size_t j = 0; j < global_size; ++j) out[j] = at(base + j);
  return out;
}

std::vector<std::size_t> BatchSampler::worker_batch(std::int64_t iteration, int worker,
                                                    int workers, std::size_t local_batch) const {
  if (workers < 1 || worker < 1 || worker > workers)
    throw ConfigError("sampler: worker id out of range");
  if (iteration < 1) throw ConfigError("sampler: iterations are 1-based");
  const std::uint64_t p = static_cast<std::uint64_t>(workers);
  const std::uint64_t base = static_cast<std::uint64_t>(iteration - 1) * p * local_batch;
  std::vector<std::size_t> out(local_batch);
  for (std::size_t k = 0; k < local_batch; ++k) out[k] = at(base + k * p + (worker - 1));
  return out;
}

template <Real T>
DataBatch<T> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("make_batch: empty batch");
  DataBatch<T> b;
  b.features = Matrix<T>(indices.size(), data.dim());
  b.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto s = data.sample(indices[r]);
    auto row = b.features.row(r);
    for (std::size_t j = 0; j < s.size(); ++j) row[j] = static_cast<T>(s[j]);
    b.labels.push_back(data.labels[indices[r]]);
  }
  return b;
}

namespace {

template <Real T, typename F>
void for_chunks(const Network<T>& net, const ModelState<T>& model, const Dataset& data,
                std::size_t chunk, F&& fn) {
  if (data.size() == 0) throw ConfigError("evaluation on an empty dataset");
  if (chunk == 0) chunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    idx.resize(std::min(chunk, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    auto batch = make_batch<T>(data, idx);
    fn(net.forward(model, batch), batch);
  }
}

}  // namespace

template <Real T>
double accuracy(const Network<T>& net, const ModelState<T>& model, const Dataset& data,
                std::size_t chunk) {
  std::size_t hits = 0;
  for_chunks(net, model, data, chunk, [&](const ForwardTrace<T>& tr, const DataBatch<T>& b) {
    const Matrix<T>& probs = tr.activations.back();
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto row = probs.row(r);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      if (best == b.labels[r]) ++hits;
    }
  });
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

template <Real T>
double mean_loss(const Network<T>& net, const ModelState<T>& model, const Dataset& data,
                 std::size_t chunk) {
  double total = 0;
  for_chunks(net, model, data, chunk, [&](const ForwardTrace<T>& tr, const DataBatch<T>& b) {
    total += tr.loss * static_cast<double>(b.size());
  });
  return total / static_cast<double>(data.size());
}

#define STRATA_INSTANTIATE(T)                                                               \
  template DataBatch<T> make_batch<T>(const Dataset&, std::span<const std::size_t>);        \
  template double accuracy<T>(const Network<T>&, const ModelState<T>&, const Dataset&,      \
                              std::size_t);                                                 \
  template double mean_loss<T>(const Network<T>&, const ModelState<T>&, const Dataset&,     \
                               std::size_t);
STRATA_INSTANTIATE(float)
STRATA_INSTANTIATE(double)
#undef STRATA_INSTANTIATE

}  // namespace strata

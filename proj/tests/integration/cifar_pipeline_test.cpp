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

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "strata/harness.hpp"

namespace strata {
namespace {

namespace fs = std::filesystem;

// Two CIFAR-format batch files of class-dependent color blobs, trained
// through the config path with the small convolutional model.
TEST(CifarPipeline, TrainsFromBatchFiles) {
  const auto dir = fs::temp_directory_path() / "strata_cifar_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  for (const char* name : {"data_batch_1.bin", "data_batch_2.bin"}) {
    Dataset d;
    d.shape = Shape3{3, 32, 32};
    d.classes = 10;
    for (int i = 0; i < 150; ++i) {
      const int label = static_cast<int>(rng() % 4);
      d.labels.push_back(static_cast<std::uint8_t>(label));
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; ++y)
          for (std::size_t x = 0; x < 32; ++x) {
            const bool lit = (label & 1 ? y < 16 : y >= 16) && c == static_cast<std::size_t>(label % 3);
            d.features.push_back((lit ? 0.8f : 0.2f) + noise(rng));
          }
    }
    write_cifar10(dir / name, d);
  }

  const std::string text = R"({
    "model": {"input": [3, 32, 32], "classes": 10, "layers": [
      {"type": "conv", "outputs": 4, "kernel": 5, "stride": 2, "pad": 2},
      {"type": "relu"},
      {"type": "maxpool", "kernel": 2, "stride": 2},
      {"type": "fc", "outputs": 10},
      {"type": "softmax_loss"}]},
    "solver": {"epsilon": 0.05, "momentum": 0.9},
    "cluster": {"workers": 2, "batch_size": 8, "staleness": 1},
    "data": {"source": "cifar10", "path": "DIR", "files": ["data_batch_1.bin", "data_batch_2.bin"],
             "test_fraction": 0.2},
    "run": {"iterations": 60}
  })";
  std::string with_dir = text;
  with_dir.replace(with_dir.find("DIR"), 3, dir.string());
  const auto cfg = parse_run_config(with_dir);
  std::ostringstream log;
  const auto s = train(cfg, log);
  EXPECT_EQ(s.iterations, 60);
  ASSERT_TRUE(s.test_accuracy.has_value());
  EXPECT_GT(*s.test_accuracy, 0.7);
  EXPECT_LT(s.metrics.back().loss, s.metrics.front().loss);
  ASSERT_EQ(s.decisions.size(), 2u);
  EXPECT_EQ(s.decisions[0].second, CommStrategy::kFullMatrixPS);
}

}  // namespace
}  // namespace strata

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
#include <optional>
#include <string>
#include <vector>

#include "strata/cluster.hpp"
#include "strata/dataset.hpp"

namespace strata {

enum class Precision : std::uint8_t { kF32, kF64 };
enum class Transport : std::uint8_t { kInProc, kTcp };

Precision parse_precision(std::string_view name);  // "f32" | "f64"
std::string_view to_string(Precision p);
Transport parse_transport(std::string_view name);  // "inproc" | "tcp"
std::string_view to_string(Transport t);

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" | "cifar10"
  /// cifar10: a directory of batch files, or one batch file.
  std::string path;
  std::vector<std::string> files;  // default data_batch_1..5.bin
  std::size_t limit = 0;           // keep the first n samples; 0 keeps all
  double test_fraction = 0.1;
  std::uint64_t seed = 1;  // train/test split and batch order
  SynthOptions synthetic;
};

struct RunConfig {
  ModelSpec model;
  ClusterConfig cluster;  // cluster.solver is the solver
  DataConfig data;
  Transport transport = Transport::kInProc;
  Precision precision = Precision::kF32;
  std::int64_t iterations = 100;
  std::uint64_t seed = 1;       // parameter init
  std::int64_t eval_every = 0;  // evaluate test accuracy every n iterations; 0 = end only

  std::string metrics_out;     // JSONL, one record per iteration
  std::string curve_out;       // CSV convergence curve
  std::string events_out;      // directory for per-worker event-log CSVs
  std::string checkpoint_out;  // written when the run ends
  std::string resume_from;

  void validate() const;
};

/// Command-line values that replace the matching config keys before parsing.
struct ConfigOverrides {
  std::optional<int> workers;
  std::optional<int> batch_size;
  std::optional<int> staleness;
  std::optional<std::string> protocol;
  std::optional<bool> dwbp;
  std::optional<std::string> transport;
  std::optional<double> bandwidth;
  std::optional<double> latency_ms;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations;
  std::optional<std::string> precision;
  std::optional<std::string> metrics_out;
  std::optional<std::string> curve_out;
  std::optional<std::string> events_out;
  std::optional<std::string> checkpoint_out;
  std::optional<std::string> resume_from;
};

/// Parses a JSON run config. Missing keys keep their defaults; unknown keys
/// are rejected. solver.total_iters defaults to `iterations`.
RunConfig parse_run_config(const std::string& json_text, const ConfigOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          const ConfigOverrides& overrides = {});
std::string to_json(const RunConfig& cfg);

/// Model section alone, e.g. {"input":[3,32,32],"classes":10,"layers":[...]}.
ModelSpec parse_model_spec(const std::string& json_text);

struct Endpoint {
  int id = 0;  // 0 for the server
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Static cluster membership for TCP runs:
/// {"server":{"host":..,"port":..},"workers":[{"id":1,"host":..,"port":..},...]}
struct Manifest {
  Endpoint server;
  std::vector<Endpoint> workers;  // sorted by id, ids 1..P

  int worker_count() const { return static_cast<int>(workers.size()); }
  const Endpoint& node(int id) const;
  void validate() const;
};

Manifest parse_manifest(const std::string& json_text);
Manifest load_manifest(const std::filesystem::path& path);
std::string to_json(const Manifest& m);
/// Localhost manifest for P workers on consecutive ports from `base_port`.
Manifest local_manifest(int workers, std::uint16_t base_port);

/// Loads, limits and splits the configured data into (train, test).
std::pair<Dataset, Dataset> load_data(const DataConfig& cfg, const ModelSpec& model);

}  // namespace strata

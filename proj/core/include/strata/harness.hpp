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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "strata/checkpoint.hpp"
#include "strata/cluster.hpp"
#include "strata/config.hpp"
#include "strata/tcp_node.hpp"

namespace strata {

/// Per-layer traffic of one iteration across the whole cluster.
struct LayerMetrics {
  int layer = 0;
  LayerKind kind = LayerKind::kFullyConnected;
  CommStrategy strategy = CommStrategy::kFullMatrixPS;
  std::uint64_t floats_sent = 0;      // by workers
  std::uint64_t floats_received = 0;  // by workers
  /// Every scalar that crossed a link: pushes, pull responses, broadcasts.
  std::uint64_t floats_total = 0;
  /// Expected total for the strategy; broadcasts count one unicast per peer.
  std::uint64_t floats_expected = 0;
  /// Closed-form cost of the strategy, with (P-1)^2 K (M+N) for broadcasts.
  std::uint64_t floats_formula = 0;
};

struct IterationMetrics {
  std::int64_t iteration = 0;
  double time_s = 0.0;  // slowest worker's commit, virtual or wall clock
  double loss = 0.0;    // mean over workers
  /// Largest t - 1 - (oldest update reflected) over the iteration's reads.
  std::int64_t staleness = 0;
  std::vector<LayerMetrics> layers;
};

/// Folds per-worker reports and read logs into cluster-wide records.
std::vector<IterationMetrics> assemble_metrics(
    const std::vector<LayerProfile>& profiles, const std::vector<CommStrategy>& strategies,
    int workers, int batch, const std::vector<std::vector<IterationReport>>& reports,
    const std::vector<std::vector<ReadObservation>>& reads);

void write_metrics_jsonl(std::ostream& out, const std::vector<IterationMetrics>& metrics);
void write_curve_csv(std::ostream& out, const std::vector<IterationMetrics>& metrics);
void write_events_csv(std::ostream& out, int worker, const std::vector<WorkerEvent>& events);
void write_reports_jsonl(std::ostream& out, const std::vector<IterationReport>& reports);

/// Cost table rows: one per (P, K, strategy) with the SACP choice for FC.
std::string bench_comm_csv(const std::vector<std::uint64_t>& workers,
                           const std::vector<std::uint64_t>& batches, std::uint64_t m,
                           std::uint64_t n);

/// Plain minibatch SGD over the same sample stream: iteration t uses global
/// batch t of size `global_batch`.
template <Real T>
struct ReferenceRun {
  ModelState<T> model;
  std::vector<double> losses;
};

template <Real T>
ReferenceRun<T> reference_train(const Network<T>& net, ModelState<T> initial, const Dataset& data,
                                const SolverConfig& solver, int global_batch,
                                std::uint64_t data_seed, std::int64_t iterations);

/// Outcome of harness::train, independent of precision.
struct TrainSummary {
  std::int64_t iterations = 0;
  double time_s = 0.0;
  double final_train_loss = 0.0;
  std::optional<double> test_accuracy;
  std::vector<IterationMetrics> metrics;
  std::vector<std::pair<int, CommStrategy>> decisions;  // per parameterized layer
};

/// Runs a whole training job as configured and writes the requested outputs.
TrainSummary train(const RunConfig& cfg, std::ostream& log);

/// Single TCP nodes, for multi-process deployments.
void run_server_node(const RunConfig& cfg, const Manifest& manifest, std::ostream& log);
void run_worker_node(const RunConfig& cfg, const Manifest& manifest, int worker_id,
                     std::ostream& log);

/// Human-readable header summary; validates the checksum.
std::string describe_checkpoint(const std::filesystem::path& path);

}  // namespace strata

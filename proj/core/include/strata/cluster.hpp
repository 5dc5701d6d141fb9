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
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "strata/dataset.hpp"
#include "strata/link.hpp"
#include "strata/server.hpp"
#include "strata/sim.hpp"
#include "strata/worker.hpp"

namespace strata {

/// Virtual compute time per layer.
struct ComputeModel {
  /// Explicit per-layer durations (index layer - 1). When empty the cost is
  /// flop_estimate * batch / flops_per_second, backward scaled by
  /// backward_factor; flops_per_second == 0 makes compute free.
  std::vector<Nanos> forward;
  std::vector<Nanos> backward;
  double flops_per_second = 0.0;
  double backward_factor = 2.0;
  /// Each worker-iteration scales its durations by 1 + jitter * U[0, 1).
  double jitter = 0.0;
  std::uint64_t seed = 0;

  void validate(int layers) const;
  Nanos forward_cost(const LayerProfile& layer, int batch) const;
  Nanos backward_cost(const LayerProfile& layer, int batch) const;
};

struct ClusterConfig {
  int workers = 1;
  int batch = 1;
  int staleness = 0;
  ProtocolChoice protocol = ProtocolChoice::kAuto;
  bool dwbp = true;
  LinkShape link;
  ComputeModel compute;
  SolverConfig solver;
  std::uint64_t data_seed = 1;

  void validate() const;
};

template <Real T>
struct ClusterSnapshot {
  std::int64_t iteration = 0;
  std::uint64_t data_cursor = 0;
  ServerSnapshot<T> server;
  std::vector<WorkerSnapshot<T>> workers;

  friend bool operator==(const ClusterSnapshot&, const ClusterSnapshot&) = default;
};

/// A whole training cluster inside one deterministic event loop: P workers
/// and one server shard joined by shaped links that carry encoded frames.
template <Real T>
class SimCluster {
 public:
  SimCluster(const Network<T>& net, ModelState<T> initial, const Dataset& data, ClusterConfig cfg);
  SimCluster(const SimCluster&) = delete;
  SimCluster& operator=(const SimCluster&) = delete;

  /// Runs every worker through iteration `until` and lets all updates land.
  /// Throws Error if the cluster stalls before that.
  void run(std::int64_t until);

  const ClusterConfig& config() const { return cfg_; }
  const Network<T>& network() const { return *net_; }
  Nanos now() const { return loop_.now(); }
  std::int64_t iteration() const { return target_; }
  const ServerShard<T>& server() const { return *server_; }
  const WorkerCore<T>& worker(int id) const { return *workers_.at(static_cast<std::size_t>(id - 1)); }
  CommStrategy strategy(int layer_id) const { return worker(1).strategy(layer_id); }

  /// Server parameters for server-held layers, worker 1's replica otherwise.
  ModelState<T> final_model() const;

  /// Frames by (iteration, layer) over every link. Pull requests and
  /// responses count toward the iteration that pushed before them.
  const std::map<std::int64_t, std::map<int, Tally>>& traffic() const { return traffic_; }
  /// Link counter totals by layer, summed over every link.
  std::map<int, Tally> link_totals() const;

  ClusterSnapshot<T> snapshot() const;
  void restore(const ClusterSnapshot<T>& snap);

 private:
  struct Proc {
    enum class Phase { kIdle, kForward, kBackward } phase = Phase::kIdle;
    int next = 0;
    bool busy = false;
    double stretch = 1.0;
    std::mt19937_64 rng;
  };

  SimChannel<T>& channel(int from, int to);
  void dispatch(int from, std::vector<Outgoing<T>> out);
  void deliver(int to, UpdateMessage<T> msg);
  void step(int id);
  void launch(int id, int layer_id);
  bool is_param(int layer_id) const;

  const Network<T>* net_;
  const Dataset* data_;
  ClusterConfig cfg_;
  EventLoop loop_;
  std::unique_ptr<ServerShard<T>> server_;
  std::vector<std::unique_ptr<WorkerCore<T>>> workers_;
  std::vector<Proc> procs_;
  std::map<std::pair<int, int>, std::unique_ptr<SimChannel<T>>> links_;
  std::map<std::int64_t, std::map<int, Tally>> traffic_;
  std::int64_t target_ = 0;
};

}  // namespace strata

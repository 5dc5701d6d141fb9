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
#include <mutex>
#include <optional>
#include <vector>

#include "strata/consistency.hpp"
#include "strata/network.hpp"
#include "strata/solver.hpp"
#include "strata/wire.hpp"

namespace strata {

struct ServerConfig {
  int workers = 1;
  int staleness = 0;
  SolverConfig solver;
  /// Layers this shard owns; every one must be pushed before a clock advance.
  std::vector<int> layers;

  void validate() const;
};

/// One pull the shard answered, with the slowest clock at that moment.
struct GrantRecord {
  int worker = 0;
  int layer = 0;
  std::int64_t iteration = 0;
  std::int64_t min_clock = 0;
  bool deferred = false;

  friend bool operator==(const GrantRecord&, const GrantRecord&) = default;
};

template <Real T>
struct ServerSnapshot {
  ModelState<T> model;
  SolverState<T> solver;
  std::vector<std::int64_t> clocks;
  std::vector<std::int64_t> applied;  // per layer, 0 for layers not served

  friend bool operator==(const ServerSnapshot&, const ServerSnapshot&) = default;
};

/// Parameter-server shard: accumulates per (layer, clock) until every worker
/// has contributed, then applies the summed gradient once. Pulls are held
/// back until the clock table grants them. Thread-safe.
template <Real T>
class ServerShard {
 public:
  ServerShard(ServerConfig cfg, ModelState<T> initial);

  /// Dispatches any worker-to-server message and returns the replies.
  std::vector<Outgoing<T>> handle(const UpdateMessage<T>& msg);

  UpdateMessage<T> handle_push(const UpdateMessage<T>& msg);
  std::optional<UpdateMessage<T>> handle_pull(const UpdateMessage<T>& msg);
  /// Released pull responses, lowest layer first.
  std::vector<Outgoing<T>> handle_clock(const UpdateMessage<T>& msg);

  const ServerConfig& config() const { return cfg_; }
  ModelState<T> model() const;
  Matrix<T> layer(int layer_id) const;
  std::int64_t applied(int layer_id) const;
  std::int64_t min_clock() const;
  std::vector<std::int64_t> clocks() const;
  std::vector<GrantRecord> grants() const;
  std::size_t deferred() const;
  /// No partial accumulations and no held pulls.
  bool quiescent() const;

  /// Throws ProtocolError unless quiescent.
  ServerSnapshot<T> snapshot() const;
  void restore(const ServerSnapshot<T>& snap);

 private:
  struct PendingPull {
    int worker;
    int layer;
    std::int64_t iteration;
  };

  bool serves(int layer_id) const;
  std::size_t worker_index(int worker) const;
  void try_apply(int layer_id);
  UpdateMessage<T> respond(const PendingPull& pull, bool deferred);

  ServerConfig cfg_;
  mutable std::mutex mu_;
  ModelState<T> model_;
  SolverState<T> solver_;
  ClockTable table_;
  std::vector<std::int64_t> applied_;
  std::vector<std::vector<std::int64_t>> pushed_;  // [layer-1][worker-1]
  std::map<std::pair<int, std::int64_t>, std::vector<std::optional<Matrix<T>>>> accum_;
  std::vector<PendingPull> pending_;
  std::vector<GrantRecord> grants_;
};

}  // namespace strata

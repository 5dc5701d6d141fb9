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

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "strata/config.hpp"
#include "strata/server.hpp"
#include "strata/tcp.hpp"
#include "strata/worker.hpp"

namespace strata {

struct NodeTimeouts {
  std::chrono::milliseconds connect{15000};
  /// Longest wait for any single step of progress before giving up.
  std::chrono::milliseconds idle{120000};
};

template <Real T>
class Mesh;

/// Server process of a TCP cluster.
template <Real T>
class TcpServerNode {
 public:
  TcpServerNode(Listener listener, Manifest manifest, ServerConfig cfg, ModelState<T> initial,
                LinkShape link, NodeTimeouts timeouts = {});
  ~TcpServerNode();

  void restore(const ServerSnapshot<T>& snap) { shard_.restore(snap); }
  /// Serves until every worker has closed its connection.
  void run();

  const ServerShard<T>& shard() const { return shard_; }
  std::map<int, Tally> sent() const;

 private:
  Listener listener_;
  Manifest manifest_;
  LinkShape link_;
  NodeTimeouts timeouts_;
  ServerShard<T> shard_;
  std::unique_ptr<Mesh<T>> mesh_;
};

/// Worker process of a TCP cluster.
template <Real T>
class TcpWorkerNode {
 public:
  TcpWorkerNode(Listener listener, Manifest manifest, WorkerConfig cfg, const Network<T>& net,
                ModelState<T> initial, SolverConfig solver, const Dataset& data,
                BatchSampler sampler, LinkShape link, NodeTimeouts timeouts = {});
  ~TcpWorkerNode();

  void restore(const WorkerSnapshot<T>& snap) { core_.restore(snap); }
  /// Trains through iteration `until`, waits for the last updates, then
  /// closes its connections.
  void run(std::int64_t until);

  const WorkerCore<T>& core() const { return core_; }
  std::map<int, Tally> sent() const;

 private:
  Listener listener_;
  Manifest manifest_;
  LinkShape link_;
  NodeTimeouts timeouts_;
  std::chrono::steady_clock::time_point start_;
  WorkerCore<T> core_;
  std::unique_ptr<Mesh<T>> mesh_;
};

}  // namespace strata

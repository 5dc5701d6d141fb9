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
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "strata/consistency.hpp"
#include "strata/dataset.hpp"
#include "strata/link.hpp"
#include "strata/network.hpp"
#include "strata/solver.hpp"
#include "strata/sufficient_factor.hpp"
#include "strata/wire.hpp"

namespace strata {

enum class ProtocolChoice : std::uint8_t { kAuto, kFullPS, kSFPS, kSFB };

/// "auto", "full-ps", "sf-ps", "sfb".
ProtocolChoice parse_protocol(std::string_view name);
std::string_view to_string(ProtocolChoice choice);

/// Strategy a layer uses under `choice`. Layers other than FC always go
/// through FullMatrixPS; kAuto defers to sacp_decide.
CommStrategy strategy_for(const LayerProfile& layer, int workers, int batch,
                          ProtocolChoice choice);

struct WorkerConfig {
  int worker_id = 1;
  int workers = 1;
  int batch = 1;  // local K
  int staleness = 0;
  ProtocolChoice protocol = ProtocolChoice::kAuto;
  bool dwbp = true;

  void validate() const;
};

enum class EventKind : std::uint8_t {
  kIterationStart,
  kForwardStart,
  kForwardEnd,
  kBackwardStart,
  kBackwardEnd,
  kCommStart,
  kCommSent,
  kCommEnd,
  kClockCommit,
};
std::string_view to_string(EventKind kind);

struct WorkerEvent {
  Nanos time{0};
  std::int64_t iteration = 0;
  int layer = 0;  // 0 for iteration-wide events
  EventKind kind = EventKind::kIterationStart;

  friend bool operator==(const WorkerEvent&, const WorkerEvent&) = default;
};

/// The oldest update a layer's parameters reflected when forward read them.
struct ReadObservation {
  std::int64_t iteration = 0;
  int layer = 0;
  std::int64_t min_stamp = 0;
};

struct IterationReport {
  int worker = 0;
  std::int64_t iteration = 0;
  double loss = 0.0;
  Nanos start{0};
  Nanos end{0};
  /// Traffic caused by this iteration, by layer: pushes and broadcasts
  /// carrying its clock, and the pull responses that follow them.
  std::map<int, std::uint64_t> floats_sent;
  std::map<int, std::uint64_t> floats_received;
};

template <Real T>
struct WorkerSnapshot {
  std::int64_t iteration = 0;
  ModelState<T> model;
  SolverState<T> solver;  // momentum of the layers this worker updates itself
  std::vector<std::int64_t> peer_clocks;
  std::vector<std::int64_t> applied;    // per layer, broadcast layers only
  std::vector<std::int64_t> fresh_for;  // per layer, server layers only

  friend bool operator==(const WorkerSnapshot&, const WorkerSnapshot&) = default;
};

/// One data-parallel worker, independent of how time passes or bytes move.
/// A driver calls, per iteration:
///   begin_iteration; for each layer bottom-up: wait for layer_ready,
///   forward_layer; for each layer top-down: backward_layer and, for
///   parameterized layers, prepare_comm + mark_handed; then commit_clock.
/// Incoming frames go to on_message from any thread.
template <Real T>
class WorkerCore {
 public:
  using Clock = std::function<Nanos()>;

  WorkerCore(WorkerConfig cfg, const Network<T>& net, ModelState<T> initial,
             SolverConfig solver, const Dataset& data, BatchSampler sampler, Clock clock);
  WorkerCore(const WorkerCore&) = delete;
  WorkerCore& operator=(const WorkerCore&) = delete;

  const WorkerConfig& config() const { return cfg_; }
  int id() const { return cfg_.worker_id; }
  CommStrategy strategy(int layer_id) const;
  const std::vector<int>& param_layers() const { return param_layers_; }
  bool uses_server() const { return !ps_layers_.empty(); }
  bool uses_peers() const { return !sfb_layers_.empty() && cfg_.workers > 1; }

  /// Iterations begun so far.
  std::int64_t iteration() const;
  /// Position of the next unread sample in the global stream.
  std::uint64_t data_cursor() const;

  /// With dwbp off, the previous iteration's layers must all be updated.
  bool ready_to_begin() const;
  void begin_iteration();
  bool layer_ready(int layer_id) const;
  /// Throws ProtocolError if the layer is not ready.
  void forward_layer(int layer_id);
  void backward_layer(int layer_id);
  /// Records a timestamped event (used for compute end marks).
  void mark(EventKind kind, int layer_id);

  /// Builds the layer's outgoing messages for the current iteration.
  std::vector<Outgoing<T>> prepare_comm(int layer_id);
  /// The messages of prepare_comm are now queued on their links.
  void mark_handed(int layer_id);
  bool all_handed() const;
  /// Clock advance for the finished iteration; requires all_handed.
  std::vector<Outgoing<T>> commit_clock();

  void on_message(const UpdateMessage<T>& msg);

  /// Every launched task has its update in place.
  bool all_updated() const;
  /// all_updated and no broadcast sets waiting.
  bool drained() const;

  /// Blocking forms of the predicates above, for threaded drivers. Return
  /// false on timeout.
  bool wait_ready_to_begin(std::chrono::milliseconds timeout) const;
  bool wait_layer_ready(int layer_id, std::chrono::milliseconds timeout) const;
  bool wait_all_handed(std::chrono::milliseconds timeout) const;
  bool wait_drained(std::chrono::milliseconds timeout) const;

  ModelState<T> model() const;
  std::vector<WorkerEvent> events() const;
  std::vector<ReadObservation> reads() const;
  std::vector<IterationReport> reports() const;
  std::size_t unusual_acks() const;

  /// Only between iterations with drained() true; throws ProtocolError otherwise.
  WorkerSnapshot<T> snapshot() const;
  void restore(const WorkerSnapshot<T>& snap);

 private:
  using Lock = std::unique_lock<std::mutex>;
  using Key = std::pair<int, std::int64_t>;  // (layer, iteration)

  bool ready_locked(int layer_id) const;
  bool drained_locked() const;
  void log(EventKind kind, std::int64_t iteration, int layer_id);
  void try_apply_broadcast(int layer_id);
  void finish_task(int layer_id, std::int64_t iteration);
  template <typename Pred>
  bool wait(std::chrono::milliseconds timeout, Pred pred) const;
  std::mutex& layer_mutex(int layer_id) const;

  WorkerConfig cfg_;
  const Network<T>* net_;
  SolverConfig solver_cfg_;
  const Dataset* data_;
  BatchSampler sampler_;
  Clock clock_;

  std::vector<CommStrategy> strategies_;  // by layer - 1
  std::vector<int> param_layers_;
  std::vector<int> ps_layers_;
  std::vector<int> sfb_layers_;

  // Lock order: mu_ before any layer mutex; compute holds only its layer.
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::unique_ptr<std::mutex[]> layer_mu_;

  ModelState<T> model_;
  SolverState<T> solver_;
  ClockTable peers_;
  std::int64_t t_ = 0;
  std::int64_t committed_ = 0;
  int handed_ = 0;
  std::vector<std::int64_t> fresh_for_;
  std::vector<std::int64_t> applied_;
  std::vector<std::int64_t> min_stamp_;
  std::map<Key, std::vector<std::optional<SufficientFactorSet<T>>>> sets_;
  std::map<Key, bool> tasks_;  // launched, not yet updated

  // Touched only by the compute thread.
  std::optional<ForwardTrace<T>> trace_;
  std::optional<BackwardPass<T>> pass_;
  std::vector<std::optional<BackwardRecord<T>>> records_;

  std::vector<WorkerEvent> events_;
  std::vector<ReadObservation> reads_;
  std::map<std::int64_t, IterationReport> reports_;
  std::size_t unusual_acks_ = 0;
};

}  // namespace strata

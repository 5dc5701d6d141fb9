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
#include <map>
#include <mutex>
#include <vector>

namespace strata {

/// Outcome of a read attempt by `worker` at iteration `iteration`.
struct ReadGrant {
  int worker = 0;
  std::int64_t iteration = 0;
  bool granted = false;
  /// Every worker's updates through this clock are in place. When granted it
  /// is at least iteration - staleness - 1.
  std::int64_t guaranteed_through = 0;
};

/// Per-worker committed clocks under a staleness bound s. A worker's clock
/// counts the iterations whose updates it has fully pushed; workers are
/// numbered 1..P. With s = 0 this is lock-step BSP.
class ClockTable {
 public:
  /// `required_layers` lists the layers a worker must push for an iteration
  /// before its clock may advance; empty disables the check.
  ClockTable(int workers, int staleness, std::vector<int> required_layers = {});

  int workers() const { return static_cast<int>(clocks_.size()); }
  int staleness() const { return staleness_; }
  std::int64_t clock(int worker) const;
  std::int64_t min_clock() const;
  const std::vector<std::int64_t>& clocks() const { return clocks_; }

  void record_push(int worker, int layer, std::int64_t clock);

  /// Commits the worker's next iteration. Throws ProtocolError if a required
  /// layer has not been pushed for it.
  void advance(int worker);

  /// Granted iff min_clock >= iteration - s - 1.
  ReadGrant try_read(int worker, std::int64_t iteration) const;

  /// Replaces every clock (checkpoint restore).
  void restore(std::vector<std::int64_t> clocks);

 private:
  std::size_t index(int worker) const;

  int staleness_;
  std::vector<std::int64_t> clocks_;
  std::vector<int> required_;
  std::vector<std::map<int, std::int64_t>> pushed_;  // per worker: layer -> last clock
};

/// Thread-safe wrapper: readers may block until the slowest worker catches up.
/// Every advance that raises min_clock wakes all waiters.
class ConsistencyManager {
 public:
  ConsistencyManager(int workers, int staleness, std::vector<int> required_layers = {});

  void record_push(int worker, int layer, std::int64_t clock);
  /// Returns the new min_clock.
  std::int64_t advance(int worker);
  ReadGrant try_read(int worker, std::int64_t iteration) const;
  /// Blocks until granted or the timeout passes; the returned grant says which.
  ReadGrant wait_read(int worker, std::int64_t iteration, std::chrono::milliseconds timeout);

  std::int64_t min_clock() const;
  ClockTable snapshot() const;
  void restore(std::vector<std::int64_t> clocks);

 private:
  mutable std::mutex mu_;
  std::condition_variable advanced_;
  ClockTable table_;
};

}  // namespace strata

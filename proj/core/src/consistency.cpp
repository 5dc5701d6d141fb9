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

#include "strata/consistency.hpp"

#include <algorithm>
#include <string>

#include "strata/errors.hpp"

namespace strata {

ClockTable::ClockTable(int workers, int staleness, std::vector<int> required_layers)
    : staleness_(staleness), required_(std::move(required_layers)) {
  if (workers < 1) throw ConfigError("clock table needs at least one worker");
  if (staleness < 0) throw ConfigError("staleness must be non-negative");
  clocks_.assign(static_cast<std::size_t>(workers), 0);
  pushed_.resize(static_cast<std::size_t>(workers));
}

std::size_t ClockTable::index(int worker) const {
  if (worker < 1 || worker > workers())
    throw ProtocolError("unknown worker " + std::to_string(worker));
  return static_cast<std::size_t>(worker - 1);
}

std::int64_t ClockTable::clock(int worker) const { return clocks_[index(worker)]; }

std::int64_t ClockTable::min_clock() const {
  return *std::min_element(clocks_.begin(), clocks_.end());
}

void ClockTable::record_push(int worker, int layer, std::int64_t clock) {
  auto& last = pushed_[index(worker)][layer];
  last = std::max(last, clock);
}

void ClockTable::advance(int worker) {
  const std::size_t i = index(worker);
  const std::int64_t next = clocks_[i] + 1;
  for (int layer : required_) {
    auto it = pushed_[i].find(layer);
    if (it == pushed_[i].end() || it->second < next)
      throw ProtocolError("worker " + std::to_string(worker) + " advanced to clock " +
                          std::to_string(next) + " before pushing layer " +
                          std::to_string(layer));
  }
  clocks_[i] = next;
}

ReadGrant ClockTable::try_read(int worker, std::int64_t iteration) const {
  index(worker);
  ReadGrant g;
  g.worker = worker;
  g.iteration = iteration;
  g.guaranteed_through = min_clock();
  g.granted = g.guaranteed_through >= iteration - staleness_ - 1;
  return g;
}

void ClockTable::restore(std::vector<std::int64_t> clocks) {
  if (clocks.size() != clocks_.size()) throw ProtocolError("clock vector size mismatch");
  clocks_ = std::move(clocks);
  for (std::size_t i = 0; i < clocks_.size(); ++i)
    for (int layer : required_) pushed_[i][layer] = clocks_[i];
}

ConsistencyManager::ConsistencyManager(int workers, int staleness,
                                       std::vector<int> required_layers)
    : table_(workers, staleness, std::move(required_layers)) {}

void ConsistencyManager::record_push(int worker, int layer, std::int64_t clock) {
  std::lock_guard lock(mu_);
  table_.record_push(worker, layer, clock);
}

std::int64_t ConsistencyManager::advance(int worker) {
  std::int64_t now;
  {
    std::lock_guard lock(mu_);
    const std::int64_t before = table_.min_clock();
    table_.advance(worker);
    now = table_.min_clock();
    if (now == before) return now;
  }
  advanced_.notify_all();
  return now;
}

ReadGrant ConsistencyManager::try_read(int worker, std::int64_t iteration) const {
  std::lock_guard lock(mu_);
  return table_.try_read(worker, iteration);
}

ReadGrant ConsistencyManager::wait_read(int worker, std::int64_t iteration,
                                        std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  ReadGrant g = table_.try_read(worker, iteration);
  advanced_.wait_for(lock, timeout, [&] {
    g = table_.try_read(worker, iteration);
    return g.granted;
  });
  return g;
}

std::int64_t ConsistencyManager::min_clock() const {
  std::lock_guard lock(mu_);
  return table_.min_clock();
}

ClockTable ConsistencyManager::snapshot() const {
  std::lock_guard lock(mu_);
  return table_;
}

void ConsistencyManager::restore(std::vector<std::int64_t> clocks) {
  {
    std::lock_guard lock(mu_);
    table_.restore(std::move(clocks));
  }
  advanced_.notify_all();
}

}  // namespace strata

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
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string_view>

namespace strata {

using Nanos = std::chrono::nanoseconds;

enum class PriorityPolicy { kFifo, kUpperLayersFirst };

PriorityPolicy parse_priority_policy(std::string_view name);
std::string_view to_string(PriorityPolicy p);

/// Shaping applied to one directed link.
struct LinkShape {
  double bandwidth = 0.0;   // bytes per second; 0 means unlimited
  double latency_ms = 0.0;  // one-way propagation delay
  PriorityPolicy priority = PriorityPolicy::kFifo;
  double burst_bytes = 0.0;  // token-bucket depth; the bucket starts empty

  void validate() const;
  Nanos latency() const;
};

/// Token bucket refilled at `rate` bytes/s up to `capacity` bytes. A frame
/// larger than the bucket waits until the deficit has been earned, so over any
/// window the bytes released are at most rate * window + capacity.
class TokenBucket {
 public:
  TokenBucket(double rate, double capacity);

  /// Reserves `bytes` at time `now`; returns when they may leave (>= now).
  Nanos reserve(Nanos now, std::uint64_t bytes);

  double rate() const { return rate_; }
  bool unlimited() const { return rate_ <= 0.0; }

 private:
  void refill(Nanos now);

  double rate_;
  double capacity_;
  double tokens_ = 0.0;
  Nanos last_{0};
};

/// Queue of frames awaiting a link. Under kUpperLayersFirst higher layer ids
/// leave first; within a layer (and always under kFifo) order is FIFO.
template <typename Item>
class SendQueue {
 public:
  explicit SendQueue(PriorityPolicy policy) : policy_(policy) {}

  void push(int layer_id, Item item) {
    const int key = policy_ == PriorityPolicy::kUpperLayersFirst ? -layer_id : 0;
    items_.emplace(Key{key, seq_++}, std::move(item));
  }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  Item pop() {
    auto node = items_.extract(items_.begin());
    return std::move(node.mapped());
  }

 private:
  struct Key {
    int priority;
    std::uint64_t seq;
    bool operator<(const Key& o) const {
      return priority != o.priority ? priority < o.priority : seq < o.seq;
    }
  };
  PriorityPolicy policy_;
  std::uint64_t seq_ = 0;
  std::map<Key, Item> items_;
};

struct Tally {
  std::uint64_t frames = 0;
  std::uint64_t bytes = 0;
  std::uint64_t floats = 0;

  Tally& operator+=(const Tally& o) {
    frames += o.frames;
    bytes += o.bytes;
    floats += o.floats;
    return *this;
  }
  friend bool operator==(const Tally&, const Tally&) = default;
};

/// Monotonic per-layer tallies of one directed link. Layer 0 collects
/// control frames (clock advances, acks). Safe to read while writers run.
class ByteCounter {
 public:
  void add(int layer_id, std::uint64_t bytes, std::uint64_t floats);
  std::map<int, Tally> by_layer() const;
  Tally layer(int layer_id) const;
  Tally total() const;

 private:
  mutable std::mutex mu_;
  std::map<int, Tally> tallies_;
};

}  // namespace strata

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

#include "strata/link.hpp"

#include <cmath>
#include <string>

#include "strata/errors.hpp"

namespace strata {

PriorityPolicy parse_priority_policy(std::string_view name) {
  if (name == "fifo") return PriorityPolicy::kFifo;
  if (name == "upper_layers_first" || name == "upper-layers-first")
    return PriorityPolicy::kUpperLayersFirst;
  throw ConfigError("unknown priority policy '" + std::string(name) + "'");
}

std::string_view to_string(PriorityPolicy p) {
  return p == PriorityPolicy::kFifo ? "fifo" : "upper_layers_first";
}

void LinkShape::validate() const {
  if (!(bandwidth >= 0.0) || !std::isfinite(bandwidth))
    throw ConfigError("bandwidth must be a non-negative number");
  if (!(latency_ms >= 0.0) || !std::isfinite(latency_ms))
    throw ConfigError("latency must be a non-negative number");
  if (!(burst_bytes >= 0.0)) throw ConfigError("burst must be non-negative");
}

Nanos LinkShape::latency() const {
  return Nanos(static_cast<std::int64_t>(std::llround(latency_ms * 1e6)));
}

TokenBucket::TokenBucket(double rate, double capacity) : rate_(rate), capacity_(capacity) {}

void TokenBucket::refill(Nanos now) {
  if (now <= last_) return;
  const double earned = rate_ * static_cast<double>((now - last_).count()) * 1e-9;
  tokens_ = std::min(capacity_, tokens_ + earned);
  last_ = now;
}

Nanos TokenBucket::reserve(Nanos now, std::uint64_t bytes) {
  if (unlimited()) return now;
  if (now < last_) now = last_;
  refill(now);
  const double need = static_cast<double>(bytes);
  if (tokens_ >= need) {
    tokens_ -= need;
    return now;
  }
  const double deficit = need - tokens_;
  const auto wait = Nanos(static_cast<std::int64_t>(std::ceil(deficit / rate_ * 1e9)));
  // The deficit is paid by tokens earned during the wait; whatever rounding
  // left over stays in the bucket.
  const double earned = rate_ * static_cast<double>(wait.count()) * 1e-9;
  tokens_ = std::min(capacity_, std::max(0.0, earned - deficit));
  last_ = now + wait;
  return last_;
}

void ByteCounter::add(int layer_id, std::uint64_t bytes, std::uint64_t floats) {
  std::lock_guard lock(mu_);
  auto& t = tallies_[layer_id];
  ++t.frames;
  t.bytes += bytes;
  t.floats += floats;
}

std::map<int, Tally> ByteCounter::by_layer() const {
  std::lock_guard lock(mu_);
  return tallies_;
}

Tally ByteCounter::layer(int layer_id) const {
  std::lock_guard lock(mu_);
  auto it = tallies_.find(layer_id);
  return it == tallies_.end() ? Tally{} : it->second;
}

Tally ByteCounter::total() const {
  std::lock_guard lock(mu_);
  Tally t;
  for (const auto& [_, v] : tallies_) t += v;
  return t;
}

}  // namespace strata

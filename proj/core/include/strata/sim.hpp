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
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "strata/link.hpp"
#include "strata/wire.hpp"

namespace strata {

/// Deterministic discrete-event loop over virtual time. Events at equal
/// timestamps run in scheduling order.
class EventLoop {
 public:
  Nanos now() const { return now_; }
  void at(Nanos when, std::function<void()> fn);
  void after(Nanos delay, std::function<void()> fn) { at(now_ + delay, std::move(fn)); }

  /// Runs one event; false when nothing is pending.
  bool step();
  void run();
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t executed() const { return executed_; }

 private:
  struct Entry {
    Nanos when;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Entry& o) const {
      return when != o.when ? when > o.when : seq > o.seq;
    }
  };
  Nanos now_{0};
  std::uint64_t seq_ = 0;
  std::uint64_t executed_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
};

/// Lifecycle of one frame on a link; filled in as the frame moves.
struct Delivery {
  Nanos sent_at{0};
  std::optional<Nanos> departed_at;   // last byte left the sender
  std::optional<Nanos> delivered_at;  // handed to the receiver
};
using DeliveryHandle = std::shared_ptr<const Delivery>;

/// One directed simulated link. Frames queue under the shape's priority
/// policy, leave when the token bucket allows and arrive `latency` later.
class SimLink {
 public:
  using Receiver = std::function<void(std::vector<std::uint8_t>)>;

  SimLink(EventLoop& loop, LinkShape shape, Receiver receiver);
  SimLink(const SimLink&) = delete;
  SimLink& operator=(const SimLink&) = delete;

  /// Throws TransportError once the link is closed.
  DeliveryHandle send(int layer_id, std::vector<std::uint8_t> frame, std::uint64_t floats);
  void close() { closed_ = true; }
  bool closed() const { return closed_; }

  const LinkShape& shape() const { return shape_; }
  const ByteCounter& counter() const { return counter_; }
  std::size_t queued() const { return queue_.size(); }

 private:
  struct Pending {
    std::vector<std::uint8_t> frame;
    std::shared_ptr<Delivery> delivery;
  };
  void schedule_pump();
  void pump();

  EventLoop* loop_;
  LinkShape shape_;
  Receiver receiver_;
  TokenBucket bucket_;
  SendQueue<Pending> queue_;
  ByteCounter counter_;
  bool busy_ = false;
  bool pump_scheduled_ = false;
  bool closed_ = false;
};

/// Typed view of a SimLink: encodes on send, decodes on arrival.
template <Real T>
class SimChannel {
 public:
  using Handler = std::function<void(UpdateMessage<T>)>;

  SimChannel(EventLoop& loop, LinkShape shape, Handler handler)
      : link_(loop, shape, [h = std::move(handler)](std::vector<std::uint8_t> bytes) {
          h(decode<T>(bytes));
        }) {}

  DeliveryHandle send(const UpdateMessage<T>& msg) {
    return link_.send(msg.layer_id, encode(msg), float_count(msg));
  }
  SimLink& link() { return link_; }
  const SimLink& link() const { return link_; }

 private:
  SimLink link_;
};

}  // namespace strata

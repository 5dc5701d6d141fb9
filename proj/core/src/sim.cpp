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

#include "strata/sim.hpp"

#include "strata/errors.hpp"

namespace strata {

void EventLoop::at(Nanos when, std::function<void()> fn) {
  if (when < now_) when = now_;
  queue_.push(Entry{when, seq_++, std::move(fn)});
}

bool EventLoop::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; the callback is moved out via const_cast
  // before pop, which is safe because the entry is discarded right after.
  auto& top = const_cast<Entry&>(queue_.top());
  now_ = top.when;
  auto fn = std::move(top.fn);
  queue_.pop();
  ++executed_;
  fn();
  return true;
}

void EventLoop::run() {
  while (step()) {
  }
}

SimLink::SimLink(EventLoop& loop, LinkShape shape, Receiver receiver)
    : loop_(&loop),
      shape_(shape),
      receiver_(std::move(receiver)),
      bucket_(shape.bandwidth, shape.burst_bytes),
      queue_(shape.priority) {
  shape_.validate();
}

DeliveryHandle SimLink::send(int layer_id, std::vector<std::uint8_t> frame,
                             std::uint64_t floats) {
  if (closed_) throw TransportError("send on a closed link");
  auto d = std::make_shared<Delivery>();
  d->sent_at = loop_->now();
  counter_.add(layer_id, frame.size(), floats);
  queue_.push(layer_id, Pending{std::move(frame), d});
  schedule_pump();
  return d;
}

void SimLink::schedule_pump() {
  if (busy_ || pump_scheduled_) return;
  pump_scheduled_ = true;
  // Deferred to an event so frames sent at the same instant compete on
  // priority before the first one claims the link.
  loop_->at(loop_->now(), [this] {
    pump_scheduled_ = false;
    pump();
  });
}

void SimLink::pump() {
  if (busy_ || queue_.empty()) return;
  Pending p = queue_.pop();
  const Nanos departs = bucket_.reserve(loop_->now(), p.frame.size());
  busy_ = true;
  loop_->at(departs, [this, p = std::move(p)]() mutable {
    p.delivery->departed_at = loop_->now();
    loop_->after(shape_.latency(), [this, p = std::move(p)]() mutable {
      p.delivery->delivered_at = loop_->now();
      receiver_(std::move(p.frame));
    });
    busy_ = false;
    pump();
  });
}

}  // namespace strata

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

#include <gtest/gtest.h>

#include <random>

#include "strata/errors.hpp"
#include "strata/link.hpp"
#include "strata/sim.hpp"

namespace strata {
namespace {

using namespace std::chrono_literals;

double seconds(Nanos n) { return static_cast<double>(n.count()) * 1e-9; }

// For random send patterns, the bytes whose release falls in any window
// [a, b] never exceed rate * (b - a) + capacity + one rounding byte.
TEST(TokenBucket, WindowBound) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const double rate = 1000.0 * (1 + trial % 5);
    const double capacity = 100.0 * (trial % 3);
    TokenBucket b(rate, capacity);
    std::vector<std::pair<Nanos, std::uint64_t>> released;
    Nanos now{0};
    for (int i = 0; i < 60; ++i) {
      now += Nanos(static_cast<std::int64_t>(rng() % 200'000'000));
      const std::uint64_t bytes = 1 + rng() % 900;
      const Nanos at = b.reserve(now, bytes);
      ASSERT_GE(at, now);
      if (!released.empty()) ASSERT_GE(at, released.back().first);
      released.emplace_back(at, bytes);
      now = at;  // a link sends one frame at a time
    }
    for (std::size_t i = 0; i < released.size(); ++i) {
      double sum = 0;
      for (std::size_t j = i; j < released.size(); ++j) {
        sum += static_cast<double>(released[j].second);
        const double window = seconds(released[j].first - released[i].first);
        // The frame released at the window start was earned before it, so
        // bytes after it are what the window has to pay for.
        ASSERT_LE(sum - static_cast<double>(released[i].second),
                  rate * window + capacity + 1.0);
      }
    }
  }
}

TEST(TokenBucket, UnlimitedNeverWaits) {
  TokenBucket b(0.0, 0.0);
  EXPECT_TRUE(b.unlimited());
  EXPECT_EQ(b.reserve(5ns, 1'000'000), 5ns);
}

TEST(SendQueue, UpperLayersFirst) {
  SendQueue<int> q(PriorityPolicy::kUpperLayersFirst);
  q.push(2, 20);
  q.push(7, 70);
  q.push(2, 21);
  q.push(5, 50);
  std::vector<int> out;
  while (!q.empty()) out.push_back(q.pop());
  EXPECT_EQ(out, (std::vector<int>{70, 50, 20, 21}));

  SendQueue<int> f(PriorityPolicy::kFifo);
  f.push(2, 20);
  f.push(7, 70);
  EXPECT_EQ(f.pop(), 20);
}

TEST(LinkShape, Validation) {
  LinkShape s;
  s.bandwidth = -1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.latency_ms = 2.5;
  EXPECT_EQ(s.latency(), 2'500'000ns);
  EXPECT_EQ(parse_priority_policy("fifo"), PriorityPolicy::kFifo);
  EXPECT_THROW(parse_priority_policy("lifo"), ConfigError);
}

TEST(ByteCounter, TalliesPerLayer) {
  ByteCounter c;
  c.add(1, 100, 10);
  c.add(1, 50, 5);
  c.add(0, 20, 0);
  EXPECT_EQ(c.layer(1), (Tally{2, 150, 15}));
  EXPECT_EQ(c.layer(9), Tally{});
  EXPECT_EQ(c.total(), (Tally{3, 170, 15}));
}

TEST(EventLoop, TimeThenSchedulingOrder) {
  EventLoop loop;
  std::vector<int> order;
  loop.at(10ns, [&] { order.push_back(2); });
  loop.at(5ns, [&] { order.push_back(1); });
  loop.at(10ns, [&] {
    order.push_back(3);
    loop.at(1ns, [&] { order.push_back(4); });  // the past clamps to now
  });
  loop.run();
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3, 4}));
  EXPECT_EQ(loop.now(), 10ns);
  EXPECT_EQ(loop.executed(), 4u);
}

TEST(SimLink, SerializationThenLatency) {
  EventLoop loop;
  LinkShape shape;
  shape.bandwidth = 1000;  // bytes per second
  shape.latency_ms = 5;
  std::vector<Nanos> arrivals;
  SimLink link(loop, shape, [&](std::vector<std::uint8_t>) { arrivals.push_back(loop.now()); });
  const auto a = link.send(1, std::vector<std::uint8_t>(100), 0);
  const auto b = link.send(1, std::vector<std::uint8_t>(50), 0);
  loop.run();
  EXPECT_EQ(*a->departed_at, 100ms);
  EXPECT_EQ(*a->delivered_at, 105ms);
  EXPECT_EQ(*b->departed_at, 150ms);
  EXPECT_EQ(arrivals, (std::vector<Nanos>{105ms, 155ms}));
  EXPECT_EQ(link.counter().total(), (Tally{2, 150, 0}));
  link.close();
  EXPECT_THROW(link.send(1, {}, 0), TransportError);
}

TEST(SimLink, SameInstantFramesCompeteOnPriority) {
  EventLoop loop;
  LinkShape shape;
  shape.bandwidth = 1e6;
  shape.priority = PriorityPolicy::kUpperLayersFirst;
  std::vector<std::size_t> got;
  SimLink link(loop, shape, [&](std::vector<std::uint8_t> f) { got.push_back(f.size()); });
  link.send(2, std::vector<std::uint8_t>(2), 0);
  link.send(7, std::vector<std::uint8_t>(7), 0);
  loop.run();
  EXPECT_EQ(got, (std::vector<std::size_t>{7, 2}));
}

TEST(SimChannel, DeliversDecodedMessages) {
  EventLoop loop;
  std::vector<UpdateMessage<double>> got;
  SimChannel<double> ch(loop, LinkShape{}, [&](UpdateMessage<double> m) { got.push_back(m); });
  const auto msg = make_ack<double>(0, 3, 4, AckStatus::kStale);
  ch.send(msg);
  loop.run();
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0], msg);
}

}  // namespace
}  // namespace strata

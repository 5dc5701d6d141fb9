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
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "strata/link.hpp"

namespace strata {

/// Owning file descriptor of a connected TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  /// Throws TransportError on failure.
  void send_all(std::span<const std::uint8_t> bytes);
  /// Fills `out` completely; false on a clean EOF before the first byte.
  /// Throws TransportError on an error or an EOF part-way through.
  bool recv_exact(std::span<std::uint8_t> out);
  void shutdown_write();
  /// Unblocks any thread parked in recv on this socket.
  void shutdown_both();
  void close();

 private:
  int fd_ = -1;
};

class Listener {
 public:
  /// Port 0 picks a free port; see port().
  Listener(const std::string& host, std::uint16_t port);
  Listener(Listener&&) = default;
  Listener& operator=(Listener&&) = default;

  std::uint16_t port() const { return port_; }
  /// Throws TransportError on timeout.
  Socket accept(std::chrono::milliseconds timeout);

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// Retries refused connections until `timeout` elapses.
Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Reads one whole frame (header plus payload); nullopt on a clean EOF.
std::optional<std::vector<std::uint8_t>> read_frame(Socket& sock);

/// Outbound half of a directed connection. Frames queue under the link's
/// priority policy; a shaper thread releases one at a time when the token
/// bucket allows, and a writer thread puts it on the socket `latency` later.
class TcpLink {
 public:
  TcpLink(Socket sock, LinkShape shape);
  TcpLink(const TcpLink&) = delete;
  TcpLink& operator=(const TcpLink&) = delete;
  ~TcpLink();

  /// Throws TransportError after close() or a write failure.
  void send(int layer_id, std::vector<std::uint8_t> frame, std::uint64_t floats);
  /// Flushes everything queued, then half-closes the socket. Idempotent.
  void close();
  /// Non-null if a write failed.
  std::exception_ptr failure() const;

  const ByteCounter& counter() const { return counter_; }

 private:
  using Clock = std::chrono::steady_clock;
  struct Timed {
    Clock::time_point release;
    std::vector<std::uint8_t> frame;
  };

  void shape_loop();
  void write_loop();
  Nanos since_start(Clock::time_point t) const { return t - start_; }

  Socket sock_;
  LinkShape shape_;
  Clock::time_point start_;
  ByteCounter counter_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  SendQueue<std::vector<std::uint8_t>> queue_;
  std::deque<Timed> line_;  // released, waiting out the latency
  TokenBucket bucket_;
  bool closing_ = false;
  bool shaper_done_ = false;
  std::exception_ptr failure_;
  std::thread shaper_;
  std::thread writer_;
};

}  // namespace strata

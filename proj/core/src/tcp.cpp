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

#include "strata/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "strata/errors.hpp"
#include "strata/wire.hpp"

namespace strata {

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr)
    throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

}  // namespace

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool Socket::recv_exact(std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + off, out.size() - off, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("recv"));
    }
    if (n == 0) {
      if (off == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void Socket::shutdown_write() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::shutdown_both() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Listener::Listener(const std::string& host, std::uint16_t port) {
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
  if (!sock_.valid()) throw TransportError(sys_error("socket"));
  int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(host, port);
  if (::bind(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw TransportError(sys_error("bind " + host + ":" + std::to_string(port)));
  if (::listen(sock_.fd(), 64) != 0) throw TransportError(sys_error("listen"));
  socklen_t len = sizeof addr;
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Socket Listener::accept(std::chrono::milliseconds timeout) {
  pollfd p{sock_.fd(), POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw TransportError(sys_error("poll"));
    if (rc == 0) throw TransportError("timed out waiting for a connection");
    break;
  }
  Socket s(::accept(sock_.fd(), nullptr, nullptr));
  if (!s.valid()) throw TransportError(sys_error("accept"));
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

Socket connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(host, port);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw TransportError(sys_error("socket"));
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    if (errno != ECONNREFUSED && errno != EINTR && errno != ECONNRESET)
      throw TransportError(sys_error("connect " + host + ":" + std::to_string(port)));
    if (std::chrono::steady_clock::now() >= deadline)
      throw TransportError("timed out connecting to " + host + ":" + std::to_string(port));
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::optional<std::vector<std::uint8_t>> read_frame(Socket& sock) {
  std::vector<std::uint8_t> frame(kFrameHeaderSize);
  if (!sock.recv_exact(frame)) return std::nullopt;
  const FrameHeader h = parse_header(frame);
  if (h.payload_len > (std::uint64_t{1} << 34)) throw ProtocolError("frame payload too large");
  frame.resize(h.frame_size());
  if (h.payload_len > 0 &&
      !sock.recv_exact(std::span(frame).subspan(kFrameHeaderSize)))
    throw TransportError("connection closed mid-frame");
  return frame;
}

TcpLink::TcpLink(Socket sock, LinkShape shape)
    : sock_(std::move(sock)),
      shape_(shape),
      start_(Clock::now()),
      queue_(shape.priority),
      bucket_(shape.bandwidth, shape.burst_bytes) {
  shape_.validate();
  shaper_ = std::thread([this] { shape_loop(); });
  writer_ = std::thread([this] { write_loop(); });
}

TcpLink::~TcpLink() {
  try {
    close();
  } catch (...) {
  }
}

void TcpLink::send(int layer_id, std::vector<std::uint8_t> frame, std::uint64_t floats) {
  {
    std::lock_guard lock(mu_);
    if (failure_) std::rethrow_exception(failure_);
    if (closing_) throw TransportError("send on a closed link");
    counter_.add(layer_id, frame.size(), floats);
    queue_.push(layer_id, std::move(frame));
  }
  cv_.notify_all();
}

void TcpLink::shape_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return !queue_.empty() || closing_; });
    if (queue_.empty()) break;
    auto frame = queue_.pop();
    const Nanos departs = bucket_.reserve(since_start(Clock::now()), frame.size());
    const auto depart_at = start_ + std::chrono::duration_cast<Clock::duration>(departs);
    // The link stays busy until the frame has left, so later arrivals can
    // still overtake anything queued behind it.
    cv_.wait_until(lock, depart_at, [&] { return failure_ != nullptr; });
    if (failure_) break;
    line_.push_back(Timed{depart_at + std::chrono::duration_cast<Clock::duration>(shape_.latency()),
                          std::move(frame)});
    cv_.notify_all();
  }
  shaper_done_ = true;
  cv_.notify_all();
}

void TcpLink::write_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] { return !line_.empty() || shaper_done_; });
    if (line_.empty()) break;
    const auto release = line_.front().release;
    if (Clock::now() < release) {
      cv_.wait_until(lock, release);
      continue;
    }
    Timed t = std::move(line_.front());
    line_.pop_front();
    lock.unlock();
    try {
      sock_.send_all(t.frame);
    } catch (...) {
      lock.lock();
      failure_ = std::current_exception();
      cv_.notify_all();
      break;
    }
    lock.lock();
  }
}

void TcpLink::close() {
  {
    std::lock_guard lock(mu_);
    closing_ = true;
  }
  cv_.notify_all();
  if (shaper_.joinable()) shaper_.join();
  if (writer_.joinable()) writer_.join();
  sock_.shutdown_write();
}

std::exception_ptr TcpLink::failure() const {
  std::lock_guard lock(mu_);
  return failure_;
}

}  // namespace strata

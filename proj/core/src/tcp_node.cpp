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

#include "strata/tcp_node.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <string>
#include <thread>

#include "strata/errors.hpp"

namespace strata {

/// Connections of one node: an outbound TcpLink per destination and a
/// reader thread per inbound connection.
template <Real T>
class Mesh {
 public:
  using Handler = std::function<void(UpdateMessage<T>)>;

  Mesh(int self, const Manifest& manifest, LinkShape link, NodeTimeouts timeouts, Handler handler)
      : self_(self), manifest_(manifest), link_(link), timeouts_(timeouts),
        handler_(std::move(handler)) {}

  ~Mesh() {
    for (auto& s : inbound_) s.shutdown_both();
    for (auto& t : readers_)
      if (t.joinable()) t.join();
    for (auto& [id, l] : outbound_) l.reset();
  }

  /// Accepts `in_ids.size()` connections while connecting to `out_ids`.
  void start(Listener& listener, const std::vector<int>& out_ids, std::size_t inbound) {
    std::exception_ptr accept_error;
    std::thread acceptor([&] {
      try {
        for (std::size_t i = 0; i < inbound; ++i) {
          Socket s = listener.accept(timeouts_.connect);
          auto hello = read_frame(s);
          if (!hello) throw TransportError("peer closed before its hello");
          const auto msg = decode<T>(*hello);
          const auto* st = std::get_if<AckStatus>(&msg.payload);
          if (msg.type != MsgType::kAck || st == nullptr || *st != AckStatus::kHello)
            throw ProtocolError("expected a hello frame");
          inbound_.push_back(std::move(s));
        }
      } catch (...) {
        accept_error = std::current_exception();
      }
    });
    try {
      for (int id : out_ids) {
        const Endpoint& e = manifest_.node(id);
        Socket s = connect_to(e.host, e.port, timeouts_.connect);
        s.send_all(encode(make_ack<T>(self_, 0, 0, AckStatus::kHello)));
        outbound_[id] = std::make_unique<TcpLink>(std::move(s), link_);
      }
    } catch (...) {
      acceptor.join();
      throw;
    }
    acceptor.join();
    if (accept_error) std::rethrow_exception(accept_error);
    for (auto& s : inbound_) readers_.emplace_back([this, &s] { read_loop(s); });
  }

  void send(int dest, const UpdateMessage<T>& msg) {
    auto it = outbound_.find(dest);
    if (it == outbound_.end()) throw TransportError("no link to node " + std::to_string(dest));
    it->second->send(msg.layer_id, encode(msg), float_count(msg));
  }

  void close_outbound() {
    for (auto& [id, l] : outbound_) {
      l->close();
      if (auto f = l->failure()) std::rethrow_exception(f);
    }
  }

  /// Joins the readers once every peer has closed; rethrows their failures.
  void wait_inbound_closed() {
    const auto deadline = std::chrono::steady_clock::now() + timeouts_.idle;
    while (open_.load() > 0) {
      check();
      if (std::chrono::steady_clock::now() > deadline)
        throw TransportError("timed out waiting for peers to finish");
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(50));
    }
    for (auto& t : readers_) t.join();
    readers_.clear();
    check();
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lock(mu_);
      if (!failure_) failure_ = e;
    }
    cv_.notify_all();
  }

  void check() const {
    std::lock_guard lock(mu_);
    if (failure_) std::rethrow_exception(failure_);
  }

  std::map<int, Tally> sent() const {
    std::map<int, Tally> out;
    for (const auto& [id, l] : outbound_)
      for (const auto& [layer, t] : l->counter().by_layer()) out[layer] += t;
    return out;
  }

 private:
  void read_loop(Socket& s) {
    try {
      while (auto frame = read_frame(s)) handler_(decode<T>(*frame));
    } catch (...) {
      fail(std::current_exception());
    }
    open_.fetch_sub(1);
    cv_.notify_all();
  }

 public:
  void expect_open(std::size_t n) { open_.store(static_cast<int>(n)); }

 private:
  int self_;
  Manifest manifest_;
  LinkShape link_;
  NodeTimeouts timeouts_;
  Handler handler_;
  std::map<int, std::unique_ptr<TcpLink>> outbound_;
  std::vector<Socket> inbound_;
  std::vector<std::thread> readers_;
  std::atomic<int> open_{0};
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::exception_ptr failure_;
};

namespace {

std::vector<int> worker_ids(const Manifest& m) {
  std::vector<int> out;
  for (const auto& w : m.workers) out.push_back(w.id);
  return out;
}

}  // namespace

template <Real T>
TcpServerNode<T>::TcpServerNode(Listener listener, Manifest manifest, ServerConfig cfg,
                                ModelState<T> initial, LinkShape link, NodeTimeouts timeouts)
    : listener_(std::move(listener)),
      manifest_(std::move(manifest)),
      link_(link),
      timeouts_(timeouts),
      shard_(std::move(cfg), std::move(initial)) {
  manifest_.validate();
  if (manifest_.worker_count() != shard_.config().workers)
    throw ConfigError("manifest lists " + std::to_string(manifest_.worker_count()) +
                      " workers, the run expects " + std::to_string(shard_.config().workers));
}

template <Real T>
TcpServerNode<T>::~TcpServerNode() = default;

template <Real T>
void TcpServerNode<T>::run() {
  mesh_ = std::make_unique<Mesh<T>>(kServerNode, manifest_, link_, timeouts_,
                                    [this](UpdateMessage<T> msg) {
                                      for (auto& o : shard_.handle(msg)) mesh_->send(o.dest, o.msg);
                                    });
  const auto ids = worker_ids(manifest_);
  mesh_->expect_open(ids.size());
  mesh_->start(listener_, ids, ids.size());
  mesh_->wait_inbound_closed();
  mesh_->close_outbound();
}

template <Real T>
std::map<int, Tally> TcpServerNode<T>::sent() const {
  return mesh_ ? mesh_->sent() : std::map<int, Tally>{};
}

template <Real T>
TcpWorkerNode<T>::TcpWorkerNode(Listener listener, Manifest manifest, WorkerConfig cfg,
                                const Network<T>& net, ModelState<T> initial, SolverConfig solver,
                                const Dataset& data, BatchSampler sampler, LinkShape link,
                                NodeTimeouts timeouts)
    : listener_(std::move(listener)),
      manifest_(std::move(manifest)),
      link_(link),
      timeouts_(timeouts),
      start_(std::chrono::steady_clock::now()),
      core_(cfg, net, std::move(initial), solver, data, std::move(sampler),
            [this] { return Nanos{std::chrono::steady_clock::now() - start_}; }) {
  manifest_.validate();
  if (manifest_.worker_count() != cfg.workers)
    throw ConfigError("manifest lists " + std::to_string(manifest_.worker_count()) +
                      " workers, the run expects " + std::to_string(cfg.workers));
}

template <Real T>
TcpWorkerNode<T>::~TcpWorkerNode() = default;

namespace {

/// One thread per parameterized layer turning finished gradients into
/// queued frames, so compute never waits on encoding.
class CommThreads {
 public:
  using Job = std::function<void(int layer)>;

  CommThreads(const std::vector<int>& layers, Job job, std::function<void(std::exception_ptr)> fail)
      : job_(std::move(job)), fail_(std::move(fail)) {
    for (int l : layers) lanes_.emplace(l, std::make_unique<Lane>());
    for (auto& [l, lane] : lanes_) {
      lane->thread = std::thread([this, l = l, ln = lane.get()] { loop(l, *ln); });
    }
  }

  ~CommThreads() { stop(); }

  void submit(int layer) {
    auto& lane = *lanes_.at(layer);
    {
      std::lock_guard lock(lane.mu);
      ++lane.pending;
    }
    lane.cv.notify_one();
  }

  void stop() {
    for (auto& [l, lane] : lanes_) {
      {
        std::lock_guard lock(lane->mu);
        lane->stop = true;
      }
      lane->cv.notify_one();
    }
    for (auto& [l, lane] : lanes_)
      if (lane->thread.joinable()) lane->thread.join();
  }

 private:
  struct Lane {
    std::mutex mu;
    std::condition_variable cv;
    int pending = 0;
    bool stop = false;
    std::thread thread;
  };

  void loop(int layer, Lane& lane) {
    std::unique_lock lock(lane.mu);
    for (;;) {
      lane.cv.wait(lock, [&] { return lane.pending > 0 || lane.stop; });
      if (lane.pending == 0) return;
      --lane.pending;
      lock.unlock();
      try {
        job_(layer);
      } catch (...) {
        fail_(std::current_exception());
      }
      lock.lock();
    }
  }

  Job job_;
  std::function<void(std::exception_ptr)> fail_;
  std::map<int, std::unique_ptr<Lane>> lanes_;
};

}  // namespace

template <Real T>
void TcpWorkerNode<T>::run(std::int64_t until) {
  const int me = core_.id();
  const int workers = core_.config().workers;
  mesh_ = std::make_unique<Mesh<T>>(me, manifest_, link_, timeouts_,
                                    [this](UpdateMessage<T> msg) { core_.on_message(msg); });
  std::vector<int> out{kServerNode};
  std::size_t inbound = 1;
  if (core_.uses_peers()) {
    for (int q = 1; q <= workers; ++q)
      if (q != me) out.push_back(q);
    inbound += static_cast<std::size_t>(workers - 1);
  }
  mesh_->expect_open(inbound);
  mesh_->start(listener_, out, inbound);

  auto dispatch = [this](std::vector<Outgoing<T>> msgs) {
    for (auto& o : msgs) mesh_->send(o.dest, o.msg);
  };
  CommThreads comm(
      core_.param_layers(),
      [&](int layer) {
        dispatch(core_.prepare_comm(layer));
        core_.mark_handed(layer);
      },
      [this](std::exception_ptr e) { mesh_->fail(e); });

  auto await = [&](auto&& ready, const char* what) {
    const auto deadline = std::chrono::steady_clock::now() + timeouts_.idle;
    while (!ready(std::chrono::milliseconds(50))) {
      mesh_->check();
      if (std::chrono::steady_clock::now() > deadline)
        throw TransportError(std::string("worker timed out waiting for ") + what);
    }
  };

  const auto& net_layers = core_.param_layers();
  const int layers = static_cast<int>(core_.model().params.size());
  for (std::int64_t t = core_.iteration() + 1; t <= until; ++t) {
    await([&](auto d) { return core_.wait_ready_to_begin(d); }, "the previous iteration");
    core_.begin_iteration();
    for (int l = 1; l <= layers; ++l) {
      await([&](auto d) { return core_.wait_layer_ready(l, d); }, "fresh parameters");
      core_.forward_layer(l);
      core_.mark(EventKind::kForwardEnd, l);
    }
    for (int l = layers; l >= 1; --l) {
      core_.backward_layer(l);
      core_.mark(EventKind::kBackwardEnd, l);
      if (core_.config().dwbp &&
          std::find(net_layers.begin(), net_layers.end(), l) != net_layers.end())
        comm.submit(l);
    }
    if (!core_.config().dwbp)
      for (auto it = net_layers.rbegin(); it != net_layers.rend(); ++it) comm.submit(*it);
    await([&](auto d) { return core_.wait_all_handed(d); }, "outgoing updates");
    dispatch(core_.commit_clock());
  }
  await([&](auto d) { return core_.wait_drained(d); }, "the final updates");
  comm.stop();
  mesh_->close_outbound();
  mesh_->wait_inbound_closed();
}

template <Real T>
std::map<int, Tally> TcpWorkerNode<T>::sent() const {
  return mesh_ ? mesh_->sent() : std::map<int, Tally>{};
}

template class TcpServerNode<float>;
template class TcpServerNode<double>;
template class TcpWorkerNode<float>;
template class TcpWorkerNode<double>;

}  // namespace strata

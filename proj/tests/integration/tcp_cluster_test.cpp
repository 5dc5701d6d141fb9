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

#include <exception>
#include <filesystem>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "strata/cluster.hpp"
#include "strata/harness.hpp"
#include "strata/tcp_node.hpp"

namespace strata {
namespace {

using namespace strata::testing;
namespace fs = std::filesystem;

struct TcpRun {
  ModelState<double> model;
  std::vector<ModelState<double>> replicas;
  std::vector<std::vector<ReadObservation>> reads;
};

// Server and workers on localhost threads, each with its own listener.
TcpRun run_tcp(const Network<double>& net, const ModelState<double>& init, const Dataset& data,
               const ClusterConfig& cc, std::int64_t iterations) {
  Listener server_listener("127.0.0.1", 0);
  std::vector<Listener> listeners;
  Manifest manifest;
  manifest.server = Endpoint{0, "127.0.0.1", server_listener.port()};
  for (int p = 1; p <= cc.workers; ++p) {
    listeners.emplace_back("127.0.0.1", 0);
    manifest.workers.push_back(Endpoint{p, "127.0.0.1", listeners.back().port()});
  }
  std::vector<int> served;
  for (int l : net.parameterized_layers())
    if (strategy_for(net.profile(l), cc.workers, cc.batch, cc.protocol) !=
        CommStrategy::kSufficientFactorBroadcast)
      served.push_back(l);
  NodeTimeouts timeouts{std::chrono::seconds(10), std::chrono::seconds(60)};
  TcpServerNode<double> server(std::move(server_listener), manifest,
                               ServerConfig{cc.workers, cc.staleness, cc.solver, served}, init,
                               cc.link, timeouts);
  const BatchSampler sampler(data.size(), cc.data_seed);
  std::vector<std::unique_ptr<TcpWorkerNode<double>>> nodes;
  for (int p = 1; p <= cc.workers; ++p)
    nodes.push_back(std::make_unique<TcpWorkerNode<double>>(
        std::move(listeners[p - 1]), manifest,
        WorkerConfig{p, cc.workers, cc.batch, cc.staleness, cc.protocol, cc.dwbp}, net, init,
        cc.solver, data, sampler, cc.link, timeouts));
  std::vector<std::exception_ptr> errors(nodes.size() + 1);
  std::vector<std::thread> threads;
  threads.emplace_back([&] {
    try {
      server.run();
    } catch (...) {
      errors[0] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < nodes.size(); ++i)
    threads.emplace_back([&, i] {
      try {
        nodes[i]->run(iterations);
      } catch (...) {
        errors[i + 1] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  TcpRun out;
  out.model = server.shard().model();
  for (const auto& n : nodes) {
    out.replicas.push_back(n->core().model());
    out.reads.push_back(n->core().reads());
  }
  for (int l : net.parameterized_layers())
    if (!std::count(served.begin(), served.end(), l)) out.model.layer(l) = out.replicas[0].layer(l);
  return out;
}

Dataset data() {
  SynthOptions o;
  o.classes = 3;
  o.shape = Shape3{1, 1, 10};
  o.samples = 300;
  return synth_dataset(o);
}

ClusterConfig config(ProtocolChoice protocol, int staleness) {
  ClusterConfig c;
  c.workers = 3;
  c.batch = 4;
  c.staleness = staleness;
  c.protocol = protocol;
  c.solver.epsilon = 0.05;
  c.solver.momentum = 0.9;
  c.solver.total_iters = 100;
  c.data_seed = 3;
  return c;
}

class TcpVsInProc : public ::testing::TestWithParam<ProtocolChoice> {};

// Under BSP the result does not depend on timing, so real sockets must give
// exactly what the simulator gives.
TEST_P(TcpVsInProc, BspModelsAreIdentical) {
  const auto d = data();
  const Network<double> net(mlp(10, 12, 3));
  const auto init = net.init_params(4);
  const auto cc = config(GetParam(), 0);
  SimCluster<double> sim(net, init, d, cc);
  sim.run(15);
  const auto tcp = run_tcp(net, init, d, cc, 15);
  EXPECT_EQ(tcp.model, sim.final_model());
}

INSTANTIATE_TEST_SUITE_P(All, TcpVsInProc,
                         ::testing::Values(ProtocolChoice::kFullPS, ProtocolChoice::kSFPS,
                                           ProtocolChoice::kSFB, ProtocolChoice::kAuto));

TEST(Tcp, StaleRunKeepsItsBoundAndReplicas) {
  const auto d = data();
  const Network<double> net(mlp(10, 12, 3));
  for (auto protocol : {ProtocolChoice::kFullPS, ProtocolChoice::kSFB}) {
    auto cc = config(protocol, 2);
    cc.link.latency_ms = 1;
    const auto tcp = run_tcp(net, net.init_params(5), d, cc, 20);
    for (const auto& reads : tcp.reads)
      for (const auto& r : reads) ASSERT_GE(r.min_stamp, r.iteration - 3);
    if (protocol == ProtocolChoice::kSFB)
      for (const auto& rep : tcp.replicas) EXPECT_EQ(rep, tcp.replicas[0]);
  }
}

TEST(Tcp, TrainEntryPointMatchesInProc) {
  const auto dir = fs::temp_directory_path() / "strata_tcp_test";
  fs::create_directories(dir);
  auto cfg = parse_run_config(R"({
    "model": {"input": [1, 1, 8], "classes": 3,
              "layers": [{"type": "fc", "outputs": 6}, {"type": "relu"},
                         {"type": "fc", "outputs": 3}, {"type": "softmax_loss"}]},
    "cluster": {"workers": 2, "batch_size": 4},
    "data": {"synthetic": {"samples": 200}},
    "run": {"iterations": 10, "precision": "f64"}
  })");
  std::ostringstream log;
  auto inproc = cfg;
  inproc.checkpoint_out = (dir / "inproc.ckpt").string();
  auto tcp = cfg;
  tcp.transport = Transport::kTcp;
  tcp.checkpoint_out = (dir / "tcp.ckpt").string();
  const auto a = train(inproc, log);
  const auto b = train(tcp, log);
  EXPECT_EQ(a.final_train_loss, b.final_train_loss);
  EXPECT_EQ(a.test_accuracy, b.test_accuracy);
  EXPECT_EQ(read_file(dir / "inproc.ckpt"), read_file(dir / "tcp.ckpt"));
}

}  // namespace
}  // namespace strata

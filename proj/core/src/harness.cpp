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

#include "strata/harness.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "strata/errors.hpp"

namespace strata {

using json = nlohmann::json;

namespace {

double seconds(Nanos d) { return static_cast<double>(d.count()) / 1e9; }

std::uint64_t expected_floats(const LayerProfile& p, CommStrategy s, std::uint64_t P,
                              std::uint64_t K) {
  const std::uint64_t b = p.bias ? 1 : 0;
  const std::uint64_t params = p.m * (p.n + b);
  const std::uint64_t factors = K * (p.m + p.n) + b * (p.m + 1);
  switch (s) {
    case CommStrategy::kFullMatrixPS: return 2 * P * params;
    case CommStrategy::kSufficientFactorPS: return P * factors + P * params;
    case CommStrategy::kSufficientFactorBroadcast: return P * (P - 1) * factors;
  }
  return 0;
}

}  // namespace

std::vector<IterationMetrics> assemble_metrics(
    const std::vector<LayerProfile>& profiles, const std::vector<CommStrategy>& strategies,
    int workers, int batch, const std::vector<std::vector<IterationReport>>& reports,
    const std::vector<std::vector<ReadObservation>>& reads) {
  std::map<std::int64_t, IterationMetrics> by_t;
  std::map<std::int64_t, int> contributors;
  const auto P = static_cast<std::uint64_t>(workers);
  const auto K = static_cast<std::uint64_t>(batch);
  for (const auto& worker_reports : reports) {
    for (const auto& r : worker_reports) {
      auto& m = by_t[r.iteration];
      m.iteration = r.iteration;
      m.time_s = std::max(m.time_s, seconds(r.end));
      m.loss += r.loss;
      ++contributors[r.iteration];
      if (m.layers.empty()) {
        for (const auto& p : profiles) {
          if (!is_parameterized(p.kind)) continue;
          LayerMetrics lm;
          lm.layer = p.layer_id;
          lm.kind = p.kind;
          lm.strategy = strategies.at(static_cast<std::size_t>(p.layer_id - 1));
          lm.floats_expected = expected_floats(p, lm.strategy, P, K);
          lm.floats_formula = cost(lm.strategy, P, K, p.m, p.n).floats;
          m.layers.push_back(lm);
        }
      }
      for (auto& lm : m.layers) {
        if (auto it = r.floats_sent.find(lm.layer); it != r.floats_sent.end())
          lm.floats_sent += it->second;
        if (auto it = r.floats_received.find(lm.layer); it != r.floats_received.end())
          lm.floats_received += it->second;
      }
    }
  }
  for (const auto& worker_reads : reads)
    for (const auto& o : worker_reads) {
      auto it = by_t.find(o.iteration);
      if (it == by_t.end()) continue;
      it->second.staleness = std::max(it->second.staleness, o.iteration - 1 - o.min_stamp);
    }
  std::vector<IterationMetrics> out;
  for (auto& [t, m] : by_t) {
    m.loss /= contributors[t];
    for (auto& lm : m.layers) {
      // Peer broadcasts are counted once, on the sending side.
      lm.floats_total = lm.floats_sent + (lm.strategy == CommStrategy::kSufficientFactorBroadcast
                                              ? 0
                                              : lm.floats_received);
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_metrics_jsonl(std::ostream& out, const std::vector<IterationMetrics>& metrics) {
  for (const auto& m : metrics) {
    json layers = json::array();
    for (const auto& l : m.layers) {
      layers.push_back({{"layer", l.layer},
                        {"kind", std::string(to_string(l.kind))},
                        {"strategy", std::string(to_string(l.strategy))},
                        {"floats_sent", l.floats_sent},
                        {"floats_received", l.floats_received},
                        {"floats_total", l.floats_total},
                        {"floats_expected", l.floats_expected},
                        {"floats_formula", l.floats_formula},
                        {"formula_divergence", static_cast<std::int64_t>(l.floats_total) -
                                                   static_cast<std::int64_t>(l.floats_formula)}});
    }
    out << json{{"iteration", m.iteration},
                {"time_s", m.time_s},
                {"loss", m.loss},
                {"staleness", m.staleness},
                {"layers", layers}}
               .dump()
        << '\n';
  }
}

void write_curve_csv(std::ostream& out, const std::vector<IterationMetrics>& metrics) {
  out << "iteration,time_s,loss\n";
  out << std::setprecision(10);
  for (const auto& m : metrics) out << m.iteration << ',' << m.time_s << ',' << m.loss << '\n';
}

void write_events_csv(std::ostream& out, int worker, const std::vector<WorkerEvent>& events) {
  out << "worker,time_ns,iteration,layer,event\n";
  for (const auto& e : events)
    out << worker << ',' << e.time.count() << ',' << e.iteration << ',' << e.layer << ','
        << to_string(e.kind) << '\n';
}

void write_reports_jsonl(std::ostream& out, const std::vector<IterationReport>& reports) {
  for (const auto& r : reports) {
    json sent = json::object();
    json recv = json::object();
    for (const auto& [l, n] : r.floats_sent) sent[std::to_string(l)] = n;
    for (const auto& [l, n] : r.floats_received) recv[std::to_string(l)] = n;
    out << json{{"worker", r.worker},
                {"iteration", r.iteration},
                {"loss", r.loss},
                {"start_s", seconds(r.start)},
                {"end_s", seconds(r.end)},
                {"floats_sent", sent},
                {"floats_received", recv}}
               .dump()
        << '\n';
  }
}

std::string bench_comm_csv(const std::vector<std::uint64_t>& workers,
                           const std::vector<std::uint64_t>& batches, std::uint64_t m,
                           std::uint64_t n) {
  if (workers.empty() || batches.empty()) throw ConfigError("bench-comm: empty P or K range");
  std::ostringstream out;
  out << "P,K,M,N,strategy,floats,sacp_choice\n";
  for (auto P : workers)
    for (auto K : batches) {
      const auto choice = to_string(sacp_decide_fc(P, K, m, n));
      for (auto s : {CommStrategy::kFullMatrixPS, CommStrategy::kSufficientFactorBroadcast,
                     CommStrategy::kSufficientFactorPS})
        out << P << ',' << K << ',' << m << ',' << n << ',' << to_string(s) << ','
            << cost(s, P, K, m, n).floats << ',' << choice << '\n';
    }
  return out.str();
}

template <Real T>
ReferenceRun<T> reference_train(const Network<T>& net, ModelState<T> initial, const Dataset& data,
                                const SolverConfig& solver, int global_batch,
                                std::uint64_t data_seed, std::int64_t iterations) {
  if (global_batch < 1) throw ConfigError("reference: batch must be >= 1");
  const BatchSampler sampler(data.size(), data_seed);
  ReferenceRun<T> run{std::move(initial), {}};
  SolverState<T> state = SolverState<T>::zeros_like(run.model);
  for (std::int64_t t = 1; t <= iterations; ++t) {
    const auto idx = sampler.global_batch(t, static_cast<std::size_t>(global_batch));
    const auto batch = make_batch<T>(data, idx);
    const auto trace = net.forward(run.model, batch);
    run.losses.push_back(trace.loss);
    for (const auto& rec : net.backward(run.model, trace)) {
      if (rec.gradient.empty()) continue;
      apply_update(run.model.layer(rec.layer_id), rec.gradient, state.layer(rec.layer_id), solver,
                   t - 1);
    }
  }
  return run;
}

namespace {

template <Real T>
std::vector<CommStrategy> strategies_of(const Network<T>& net, const ClusterConfig& c) {
  std::vector<CommStrategy> out(static_cast<std::size_t>(net.layer_count()),
                                CommStrategy::kFullMatrixPS);
  for (int l : net.parameterized_layers())
    out[l - 1] = strategy_for(net.profile(l), c.workers, c.batch, c.protocol);
  return out;
}

template <Real T>
std::vector<int> served_layers(const Network<T>& net, const std::vector<CommStrategy>& s) {
  std::vector<int> out;
  for (int l : net.parameterized_layers())
    if (s[l - 1] != CommStrategy::kSufficientFactorBroadcast) out.push_back(l);
  return out;
}

template <typename F>
void write_to(const std::string& path, F&& fn) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  fn(out);
}

void write_events(const std::string& dir, int worker, const std::vector<WorkerEvent>& events) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  write_to((std::filesystem::path(dir) / ("worker_" + std::to_string(worker) + ".csv")).string(),
           [&](std::ostream& o) { write_events_csv(o, worker, events); });
}

struct Collected {
  std::vector<std::vector<IterationReport>> reports;
  std::vector<std::vector<ReadObservation>> reads;
  std::vector<std::vector<WorkerEvent>> events;
};

template <Real T>
void collect(Collected& c, const WorkerCore<T>& w) {
  c.reports.push_back(w.reports());
  c.reads.push_back(w.reads());
  c.events.push_back(w.events());
}

template <Real T>
TrainSummary train_as(const RunConfig& cfg, std::ostream& log) {
  const Network<T> net(cfg.model);
  auto [train_set, test_set] = load_data(cfg.data, cfg.model);
  const auto& cc = cfg.cluster;
  if (static_cast<std::size_t>(cc.workers) * static_cast<std::size_t>(cc.batch) > train_set.size())
    throw ConfigError("batch size times workers exceeds the training set");
  ModelState<T> init = net.init_params(cfg.seed);
  std::optional<ClusterSnapshot<T>> resume;
  if (!cfg.resume_from.empty()) {
    resume = decode_checkpoint<T>(read_file(cfg.resume_from), fingerprint(cfg.model));
    if (resume->iteration >= cfg.iterations)
      throw ConfigError("checkpoint is already at iteration " + std::to_string(resume->iteration));
    log << "resuming from iteration " << resume->iteration << '\n';
  }
  const auto strategies = strategies_of(net, cc);
  TrainSummary summary;
  for (int l : net.parameterized_layers()) {
    summary.decisions.emplace_back(l, strategies[l - 1]);
    log << "layer " << l << " (" << to_string(net.profile(l).kind) << ", " << net.profile(l).m
        << "x" << net.profile(l).n << "): " << to_string(strategies[l - 1]) << '\n';
  }

  Collected col;
  ModelState<T> model;
  std::optional<ClusterSnapshot<T>> snap;
  auto evaluate = [&](std::int64_t t, const ModelState<T>& m) {
    if (test_set.size() == 0) return;
    log << "iteration " << t << ": test accuracy " << accuracy(net, m, test_set) << '\n';
  };

  if (cfg.transport == Transport::kInProc) {
    SimCluster<T> cluster(net, init, train_set, cc);
    if (resume) cluster.restore(*resume);
    if (cfg.eval_every > 0) {
      while (cluster.iteration() < cfg.iterations) {
        cluster.run(std::min(cfg.iterations, cluster.iteration() + cfg.eval_every));
        evaluate(cluster.iteration(), cluster.final_model());
      }
    } else {
      cluster.run(cfg.iterations);
    }
    for (int p = 1; p <= cc.workers; ++p) collect(col, cluster.worker(p));
    model = cluster.final_model();
    if (!cfg.checkpoint_out.empty()) snap = cluster.snapshot();
  } else {
    Listener server_listener("127.0.0.1", 0);
    std::vector<Listener> worker_listeners;
    Manifest manifest;
    manifest.server = Endpoint{0, "127.0.0.1", server_listener.port()};
    for (int p = 1; p <= cc.workers; ++p) {
      worker_listeners.emplace_back("127.0.0.1", 0);
      manifest.workers.push_back(Endpoint{p, "127.0.0.1", worker_listeners.back().port()});
    }
    TcpServerNode<T> server(std::move(server_listener), manifest,
                            ServerConfig{cc.workers, cc.staleness, cc.solver,
                                         served_layers(net, strategies)},
                            init, cc.link);
    const BatchSampler sampler(train_set.size(), cc.data_seed);
    std::vector<std::unique_ptr<TcpWorkerNode<T>>> nodes;
    for (int p = 1; p <= cc.workers; ++p)
      nodes.push_back(std::make_unique<TcpWorkerNode<T>>(
          std::move(worker_listeners[static_cast<std::size_t>(p - 1)]), manifest,
          WorkerConfig{p, cc.workers, cc.batch, cc.staleness, cc.protocol, cc.dwbp}, net, init,
          cc.solver, train_set, sampler, cc.link));
    if (resume) {
      if (resume->workers.size() != nodes.size())
        throw FormatError("checkpoint worker count does not match the run");
      server.restore(resume->server);
      for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i]->restore(resume->workers[i]);
    }
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
          nodes[i]->run(cfg.iterations);
        } catch (...) {
          errors[i + 1] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (const auto& n : nodes) collect(col, n->core());
    model = server.shard().model();
    const auto replica = nodes[0]->core().model();
    for (int l : net.parameterized_layers())
      if (strategies[l - 1] == CommStrategy::kSufficientFactorBroadcast)
        model.layer(l) = replica.layer(l);
    if (!cfg.checkpoint_out.empty()) {
      snap.emplace();
      snap->iteration = cfg.iterations;
      snap->server = server.shard().snapshot();
      for (const auto& n : nodes) snap->workers.push_back(n->core().snapshot());
      snap->data_cursor = nodes[0]->core().data_cursor();
    }
  }

  summary.metrics = assemble_metrics(net.profiles(), strategies, cc.workers, cc.batch,
                                     col.reports, col.reads);
  summary.iterations = cfg.iterations;
  summary.time_s = summary.metrics.empty() ? 0.0 : summary.metrics.back().time_s;
  summary.final_train_loss = mean_loss(net, model, train_set);
  if (test_set.size() > 0) summary.test_accuracy = accuracy(net, model, test_set);

  write_to(cfg.metrics_out, [&](std::ostream& o) { write_metrics_jsonl(o, summary.metrics); });
  write_to(cfg.curve_out, [&](std::ostream& o) { write_curve_csv(o, summary.metrics); });
  for (std::size_t i = 0; i < col.events.size(); ++i)
    write_events(cfg.events_out, static_cast<int>(i) + 1, col.events[i]);
  if (snap) {
    write_file_atomic(cfg.checkpoint_out, encode_checkpoint(*snap, fingerprint(cfg.model)));
    log << "checkpoint written to " << cfg.checkpoint_out << '\n';
  }
  log << "done: " << summary.iterations << " iterations, " << summary.time_s
      << " s, final training loss " << summary.final_train_loss;
  if (summary.test_accuracy) log << ", test accuracy " << *summary.test_accuracy;
  log << '\n';
  return summary;
}

template <Real T>
void server_node_as(const RunConfig& cfg, const Manifest& manifest, std::ostream& log) {
  const Network<T> net(cfg.model);
  const auto& cc = cfg.cluster;
  const auto strategies = strategies_of(net, cc);
  Listener listener(manifest.server.host, manifest.server.port);
  TcpServerNode<T> node(std::move(listener), manifest,
                        ServerConfig{cc.workers, cc.staleness, cc.solver,
                                     served_layers(net, strategies)},
                        net.init_params(cfg.seed), cc.link);
  log << "server listening on " << manifest.server.host << ':' << manifest.server.port << '\n';
  node.run();
  if (node.shard().config().layers.empty())
    log << "server done: every layer used peer broadcast, nothing was served\n";
  else
    log << "server done at clock " << node.shard().min_clock() << '\n';
}

template <Real T>
void worker_node_as(const RunConfig& cfg, const Manifest& manifest, int id, std::ostream& log) {
  const Network<T> net(cfg.model);
  auto [train_set, test_set] = load_data(cfg.data, cfg.model);
  const auto& cc = cfg.cluster;
  const Endpoint& me = manifest.node(id);
  if (id < 1) throw ConfigError("worker id must be >= 1");
  TcpWorkerNode<T> node(Listener(me.host, me.port), manifest,
                        WorkerConfig{id, cc.workers, cc.batch, cc.staleness, cc.protocol, cc.dwbp},
                        net, net.init_params(cfg.seed), cc.solver, train_set,
                        BatchSampler(train_set.size(), cc.data_seed), cc.link);
  log << "worker " << id << " listening on " << me.host << ':' << me.port << '\n';
  node.run(cfg.iterations);
  const auto reports = node.core().reports();
  write_to(cfg.metrics_out, [&](std::ostream& o) { write_reports_jsonl(o, reports); });
  if (!cfg.events_out.empty()) write_events(cfg.events_out, id, node.core().events());
  log << "worker " << id << " done: " << reports.size() << " iterations, last loss "
      << (reports.empty() ? 0.0 : reports.back().loss) << '\n';
}

}  // namespace

TrainSummary train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  return cfg.precision == Precision::kF32 ? train_as<float>(cfg, log) : train_as<double>(cfg, log);
}

void run_server_node(const RunConfig& cfg, const Manifest& manifest, std::ostream& log) {
  cfg.validate();
  manifest.validate();
  if (manifest.worker_count() != cfg.cluster.workers)
    throw ConfigError("manifest lists " + std::to_string(manifest.worker_count()) +
                      " workers but the config has " + std::to_string(cfg.cluster.workers));
  if (cfg.precision == Precision::kF32)
    server_node_as<float>(cfg, manifest, log);
  else
    server_node_as<double>(cfg, manifest, log);
}

void run_worker_node(const RunConfig& cfg, const Manifest& manifest, int worker_id,
                     std::ostream& log) {
  cfg.validate();
  manifest.validate();
  if (manifest.worker_count() != cfg.cluster.workers)
    throw ConfigError("manifest lists " + std::to_string(manifest.worker_count()) +
                      " workers but the config has " + std::to_string(cfg.cluster.workers));
  if (cfg.precision == Precision::kF32)
    worker_node_as<float>(cfg, manifest, worker_id, log);
  else
    worker_node_as<double>(cfg, manifest, worker_id, log);
}

std::string describe_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const CheckpointInfo info = inspect_checkpoint(bytes);
  std::ostringstream out;
  out << "file:        " << path.string() << '\n'
      << "size:        " << info.file_bytes << " bytes\n"
      << "version:     " << info.version << '\n'
      << "precision:   " << (info.scalar_bytes == 4 ? "f32" : "f64") << '\n'
      << "fingerprint: " << std::hex << std::setw(16) << std::setfill('0') << info.fingerprint
      << std::dec << '\n'
      << "iteration:   " << info.iteration << '\n'
      << "data cursor: " << info.data_cursor << '\n'
      << "workers:     " << info.workers << '\n'
      << "checksum:    ok\n";
  return out.str();
}

template ReferenceRun<float> reference_train(const Network<float>&, ModelState<float>,
                                             const Dataset&, const SolverConfig&, int,
                                             std::uint64_t, std::int64_t);
template ReferenceRun<double> reference_train(const Network<double>&, ModelState<double>,
                                              const Dataset&, const SolverConfig&, int,
                                              std::uint64_t, std::int64_t);

}  // namespace strata

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

// strata: train, serve and inspect data-parallel runs.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "strata/config.hpp"
#include "strata/errors.hpp"
#include "strata/harness.hpp"

namespace {

using strata::ConfigError;
using strata::ConfigOverrides;

/// "2,4,8" or "2-16" or a mix: "2-4,8".
std::vector<std::uint64_t> parse_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if (const auto dash = item.find('-'); dash != std::string::npos) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (lo > hi) throw ConfigError("empty range '" + item + "'");
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse '" + item + "' as a number or range");
    }
  }
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

struct RunFlags {
  std::string config;
  ConfigOverrides o;
  std::string dwbp;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--workers", o.workers, "Number of workers P");
    app->add_option("--batch-size", o.batch_size, "Per-worker batch size K");
    app->add_option("--staleness", o.staleness, "SSP staleness bound s (0 = BSP)");
    app->add_option("--protocol", o.protocol, "auto | full-ps | sf-ps | sfb");
    app->add_option("--dwbp", dwbp, "Wait-free backprop: on | off")
        ->check(CLI::IsMember({"on", "off"}));
    app->add_option("--transport", o.transport, "inproc | tcp");
    app->add_option("--bandwidth", o.bandwidth, "Link bandwidth in bytes/s (0 = unlimited)");
    app->add_option("--latency-ms", o.latency_ms, "One-way link latency in ms");
    app->add_option("--seed", o.seed, "Parameter initialization seed");
    app->add_option("--iters", o.iterations, "Iterations to run");
    app->add_option("--precision", o.precision, "f32 | f64");
    app->add_option("--metrics-out", o.metrics_out, "Per-iteration metrics (JSON lines)");
  }

  strata::RunConfig load() {
    if (!dwbp.empty()) o.dwbp = dwbp == "on";
    return strata::load_run_config(config, o);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-parallel deep learning over a stale-synchronous parameter server"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Run a whole training job");
  train_flags.add(train);
  train->add_option("--curve-out", train_flags.o.curve_out, "Convergence curve (CSV)");
  train->add_option("--events-out", train_flags.o.events_out, "Directory for per-worker event logs");
  train->add_option("--checkpoint-out", train_flags.o.checkpoint_out, "Checkpoint written at the end");
  train->add_option("--resume", train_flags.o.resume_from, "Checkpoint to resume from")
      ->check(CLI::ExistingFile);

  RunFlags server_flags;
  std::string server_manifest;
  auto* server = app.add_subcommand("server", "Run the parameter server of a TCP cluster");
  server_flags.add(server);
  server->add_option("--manifest", server_manifest, "Cluster manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);

  RunFlags worker_flags;
  std::string worker_manifest;
  int worker_id = 0;
  auto* worker = app.add_subcommand("worker", "Run one worker of a TCP cluster");
  worker_flags.add(worker);
  worker->add_option("--manifest", worker_manifest, "Cluster manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  worker->add_option("--id", worker_id, "Worker id (1..P)")->required();
  worker->add_option("--events-out", worker_flags.o.events_out, "Directory for the event log");

  std::string bench_p = "2-16";
  std::string bench_k = "32,256";
  std::uint64_t bench_m = 4096;
  std::uint64_t bench_n = 4096;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench-comm", "Tabulate per-layer communication cost");
  bench->add_option("--workers", bench_p, "Worker counts, e.g. 2-16 or 4,8");
  bench->add_option("--batch", bench_k, "Batch sizes, e.g. 32,256");
  bench->add_option("--m", bench_m, "Layer output size M");
  bench->add_option("--n", bench_n, "Layer input size N");
  bench->add_option("--out", bench_out, "Write the CSV here instead of stdout");

  std::string ckpt_path;
  auto* inspect = app.add_subcommand("checkpoint-inspect", "Print a checkpoint header");
  inspect->add_option("path", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      strata::train(train_flags.load(), std::cout);
    } else if (*server) {
      strata::run_server_node(server_flags.load(), strata::load_manifest(server_manifest),
                              std::cout);
    } else if (*worker) {
      strata::run_worker_node(worker_flags.load(), strata::load_manifest(worker_manifest),
                              worker_id, std::cout);
    } else if (*bench) {
      const auto csv = strata::bench_comm_csv(parse_list(bench_p), parse_list(bench_k), bench_m,
                                              bench_n);
      if (bench_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(bench_out);
        if (!out) throw ConfigError("cannot write " + bench_out);
        out << csv;
      }
    } else if (*inspect) {
      std::cout << strata::describe_checkpoint(ckpt_path);
    }
  } catch (const strata::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const strata::ChecksumError& e) {
    std::cerr << "checksum error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

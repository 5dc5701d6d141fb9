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

// Acceptance runner: one PASS/FAIL line per criterion. Tolerances and time
// limits are pinned below; a criterion that overruns its limit fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "strata/checkpoint.hpp"
#include "strata/cluster.hpp"
#include "strata/config.hpp"
#include "strata/harness.hpp"
#include "strata/sufficient_factor.hpp"

namespace strata {
namespace {

using namespace strata::testing;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<ProtocolChoice> kForced = {ProtocolChoice::kFullPS, ProtocolChoice::kSFPS,
                                             ProtocolChoice::kSFB};

// Largest |a - b| / ||b|| over the layers, with ||.|| the Frobenius norm.
template <Real T>
double layer_norm_diff(const ModelState<T>& a, const ModelState<T>& b) {
  double worst = 0;
  for (std::size_t l = 0; l < a.params.size(); ++l) {
    if (a.params[l].empty()) continue;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.params[l].size(); ++i) {
      const double d = static_cast<double>(a.params[l].data()[i]) - b.params[l].data()[i];
      num += d * d;
      den += static_cast<double>(b.params[l].data()[i]) * b.params[l].data()[i];
    }
    worst = std::max(worst, std::sqrt(num / std::max(den, 1e-300)));
  }
  return worst;
}

Dataset synthetic(std::size_t dim, int classes, std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.shape = Shape3{1, 1, dim};
  o.classes = classes;
  o.samples = n;
  o.seed = seed;
  return synth_dataset(o);
}

// 1. Closed-form costs at P=4, K=256, M=N=4096 and the quoted ratios.
Outcome cost_model() {
  const std::uint64_t full = cost(CommStrategy::kFullMatrixPS, 4, 256, 4096, 4096).floats;
  const std::uint64_t sfb = cost(CommStrategy::kSufficientFactorBroadcast, 4, 256, 4096, 4096).floats;
  const std::uint64_t sfps = cost(CommStrategy::kSufficientFactorPS, 4, 256, 4096, 4096).floats;
  const std::string csv = bench_comm_csv({4}, {256}, 4096, 4096);
  const bool rows = csv.find("4,256,4096,4096,FullMatrixPS,134217728,") != std::string::npos &&
                    csv.find("4,256,4096,4096,SufficientFactorBroadcast,18874368,") != std::string::npos &&
                    csv.find("4,256,4096,4096,SufficientFactorPS,75497472,") != std::string::npos;
  // Ratios of the figures as quoted, in millions to one decimal.
  const double quoted_full = std::round(full / 1e5) / 10, quoted_sfb = std::round(sfb / 1e5) / 10,
               quoted_sfps = std::round(sfps / 1e5) / 10;
  const double r1 = quoted_full / quoted_sfb, r2 = quoted_sfps / quoted_sfb;
  const bool ratios = std::round(r1 * 10) / 10 == 7.1 && std::round(r2) == 4.0;
  return {full == 134217728 && sfb == 18874368 && sfps == 75497472 && rows && ratios,
          fmt("full=%llu sfb=%llu sfps=%llu ratios %.2f %.2f", (unsigned long long)full,
              (unsigned long long)sfb, (unsigned long long)sfps, r1, r2)};
}

// 2. Conv layers never leave the server path; for FC the choice flips once,
// at the first integer P past the positive root of the cost difference.
Outcome sacp_table() {
  ModelSpec s;
  s.input = Shape3{3, 16, 16};
  s.classes = 10;
  s.layers = {conv(8, 3, 1, 1), fc(10), softmax()};
  const Network<float> net(s);
  int checked = 0;
  for (std::uint64_t k : {32u, 256u})
    for (std::uint64_t p = 2; p <= 64; ++p)
      if (sacp_decide(net.profile(1), p, k) != CommStrategy::kFullMatrixPS)
        return {false, fmt("conv layer left full-matrix PS at P=%llu", (unsigned long long)p)};

  for (std::uint64_t k : {32u, 256u})
    for (auto [m, n] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{
             {4096, 4096}, {4096, 9216}, {1000, 4096}, {10, 64}, {512, 512}}) {
      // (P-1)^2 a = P a + P m n with a = K (M+N):  a P^2 - (3a + mn) P + a = 0.
      const double a = static_cast<double>(k * (m + n));
      const double b = 3 * a + static_cast<double>(m * n);
      const double root = (b + std::sqrt(b * b - 4 * a * a)) / (2 * a);
      bool flipped = false;
      for (std::uint64_t p = 2; p <= 64; ++p) {
        const auto got = sacp_decide_fc(p, k, m, n);
        const auto sfb = (p - 1) * (p - 1) * k * (m + n), sfps = p * k * (m + n) + p * m * n;
        const auto brute = sfb <= sfps ? CommStrategy::kSufficientFactorBroadcast
                                       : CommStrategy::kSufficientFactorPS;
        const auto by_root = static_cast<double>(p) <= root ? CommStrategy::kSufficientFactorBroadcast
                                                            : CommStrategy::kSufficientFactorPS;
        ++checked;
        if (got != brute || got != by_root)
          return {false, fmt("mismatch at P=%llu K=%llu M=%llu N=%llu", (unsigned long long)p,
                             (unsigned long long)k, (unsigned long long)m, (unsigned long long)n)};
        if (got == CommStrategy::kSufficientFactorPS) flipped = true;
        else if (flipped) return {false, "decision flipped back to broadcast"};
      }
    }
  const double a = 256.0 * 8192, b = 3 * a + 4096.0 * 4096;
  return {true, fmt("%d FC cases; crossover at K=256, M=N=4096 is P > %.2f", checked,
                    (b + std::sqrt(b * b - 4 * a * a)) / (2 * a))};
}

// 3. decompose then reconstruct against a long-double outer-product sum.
Outcome sf_round_trip() {
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> dim(1, 24);
  double worst = 0;
  int cases = 0;
  while (cases < 200) {
    const bool bias = cases % 2 == 0;
    const auto spec = mlp(dim(rng), dim(rng), 2 + cases % 5, bias);
    const Network<double> net(spec);
    const auto state = net.init_params(cases);
    const auto trace = net.forward(state, random_batch<double>(spec, dim(rng), rng));
    for (const auto& rec : net.backward(state, trace, 1 + cases % 4)) {
      if (rec.kind != LayerKind::kFullyConnected || cases >= 200) continue;
      const auto got = reconstruct(decompose(rec));
      const std::size_t m = rec.output_error.cols(), n = rec.input_activation.cols(),
                        cols = n + (bias ? 1 : 0);
      Oracle want{m, cols, std::vector<long double>(m * cols)};
      for (std::size_t k = 0; k < rec.batch_size(); ++k)
        for (std::size_t i = 0; i < m; ++i) {
          const long double e = static_cast<long double>(rec.output_error(k, i)) * rec.scale;
          for (std::size_t j = 0; j < n; ++j) want.data[i * cols + j] += e * rec.input_activation(k, j);
          if (bias) want.data[i * cols + n] += e;
        }
      worst = std::max({worst, rel_error(got, want, 1e-12), max_rel_diff(got, rec.gradient, 1e-12)});
      ++cases;
    }
  }
  return {worst < 1e-10, fmt("200 cases, max rel error %.2e (tolerance 1e-10)", worst)};
}

// 4. Central differences on every layer kind.
Outcome gradients() {
  std::mt19937_64 rng(4);
  double worst = 0;
  for (const auto& spec : gradient_check_models()) {
    const Network<double> net(spec);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto batch = random_batch<double>(spec, 4, rng);
      worst = std::max(worst, finite_difference_error(net, net.init_params(seed), batch, rng, 1e-6, 60));
    }
  }
  return {worst < 1e-4, fmt("fc, relu, conv (stride 1 and 2, padded, no bias), maxpool, softmax: "
                            "max rel error %.2e (tolerance 1e-4)", worst)};
}

// 5. P=4 BSP against one process with batch 4K, per forced protocol.
Outcome bsp_equivalence() {
  const auto data = synthetic(16, 4, 2048, 5);
  const Network<double> net(mlp(16, 32, 4));
  const auto init = net.init_params(5);
  ClusterConfig cc;
  cc.workers = 4;
  cc.batch = 16;
  cc.solver.epsilon = 0.05;
  cc.solver.momentum = 0.9;
  cc.solver.total_iters = 100;
  cc.data_seed = 5;
  const auto ref = reference_train(net, init, data, cc.solver, 64, cc.data_seed, 100);
  std::string detail;
  bool pass = true;
  for (auto protocol : kForced) {
    cc.protocol = protocol;
    SimCluster<double> c(net, init, data, cc);
    c.run(100);
    const double d = layer_norm_diff(c.final_model(), ref.model);
    const double e = model_rel_diff(c.final_model(), ref.model, 1e-6);
    pass &= d < 1e-6 && e < 1e-6;
    detail += fmt("%s %.1e/%.1e ", std::string(to_string(protocol)).c_str(), d, e);
  }
  return {pass, detail + "(layer-norm/elementwise rel, tolerance 1e-6)"};
}

// 6. Jittered runs: every granted read reflects all updates through t-s-1.
Outcome ssp_safety() {
  const auto data = synthetic(8, 3, 600, 6);
  const Network<double> net(mlp(8, 6, 3));
  std::int64_t reads = 0, worst_gap = 0, violations = 0;
  std::map<int, std::int64_t> max_seen;
  for (int p : {2, 4})
    for (int s : {0, 1, 3})
      for (auto protocol : {ProtocolChoice::kFullPS, ProtocolChoice::kSFB}) {
        ClusterConfig cc;
        cc.workers = p;
        cc.batch = 2;
        cc.staleness = s;
        cc.protocol = protocol;
        cc.solver.epsilon = 0.01;
        cc.solver.total_iters = 500;
        cc.link.bandwidth = 2e6;
        cc.link.latency_ms = 0.3;
        cc.compute.flops_per_second = 5e7;
        cc.compute.jitter = 4.0;
        cc.compute.seed = static_cast<std::uint64_t>(p * 10 + s);
        SimCluster<double> c(net, net.init_params(6), data, cc);
        c.run(500);
        for (int w = 1; w <= p; ++w)
          for (const auto& r : c.worker(w).reads()) {
            ++reads;
            const auto gap = r.iteration - r.min_stamp;
            worst_gap = std::max(worst_gap, gap - (s + 1));
            max_seen[s] = std::max(max_seen[s], gap - 1);
            if (gap > s + 1) ++violations;
          }
        for (const auto& g : c.server().grants())
          if (g.iteration - g.min_clock > s + 1) ++violations;
      }
  return {violations == 0,
          fmt("%lld reads, %lld violations; largest staleness seen s=0:%lld s=1:%lld s=3:%lld",
              (long long)reads, (long long)violations, (long long)max_seen[0],
              (long long)max_seen[1], (long long)max_seen[3])};
}

// 8-FC model with about 93% of the parameters in the top two layers.
ModelSpec eight_fc() {
  ModelSpec m;
  m.input = Shape3{1, 1, 32};
  m.classes = 10;
  for (int i = 0; i < 6; ++i) {
    m.layers.push_back(fc(32));
    m.layers.push_back(relu());
  }
  m.layers.push_back(fc(2048));
  m.layers.push_back(relu());
  m.layers.push_back(fc(10));
  m.layers.push_back(softmax());
  return m;
}

ClusterConfig overlap_config(const Network<double>& net) {
  ClusterConfig cc;
  cc.workers = 2;
  cc.batch = 8;
  cc.protocol = ProtocolChoice::kFullPS;
  cc.solver.epsilon = 0.01;
  cc.solver.total_iters = 100;
  cc.compute.forward.assign(static_cast<std::size_t>(net.layer_count()), Nanos{0});
  cc.compute.backward = cc.compute.forward;
  Nanos compute{0};
  std::uint64_t floats = 0;
  for (int l : net.parameterized_layers()) {
    cc.compute.forward[l - 1] = 1ms;
    cc.compute.backward[l - 1] = 2ms;
    compute += 3ms;
    floats += net.profile(l).param_count;
  }
  // A push and a pull per layer each cross one link; size the bandwidth so
  // both directions together take as long as one iteration's compute.
  const double bytes = static_cast<double>(floats * sizeof(double));
  cc.link.bandwidth = 2 * bytes / (static_cast<double>(compute.count()) * 1e-9);
  cc.link.latency_ms = 0.2;
  return cc;
}

// 7. Overlap invariant and virtual iteration time, DWBP on against off.
Outcome dwbp_overlap() {
  const Network<double> net(eight_fc());
  std::size_t top = 0, all = net.param_count();
  const auto layers = net.parameterized_layers();
  top = net.profile(layers[6]).param_count + net.profile(layers[7]).param_count;
  const auto data = synthetic(32, 10, 512, 7);
  const auto init = net.init_params(7);
  const int iters = 20;
  auto on = overlap_config(net);
  auto off = on;
  off.dwbp = false;
  SimCluster<double> a(net, init, data, on), b(net, init, data, off);
  a.run(iters);
  b.run(iters);

  std::int64_t checks = 0, broken = 0;
  for (int w = 1; w <= on.workers; ++w) {
    std::map<std::pair<std::int64_t, int>, Nanos> comm_start, backward_end;
    for (const auto& e : a.worker(w).events()) {
      if (e.kind == EventKind::kCommStart) comm_start[{e.iteration, e.layer}] = e.time;
      if (e.kind == EventKind::kBackwardEnd) backward_end[{e.iteration, e.layer}] = e.time;
    }
    for (std::int64_t t = 1; t <= iters; ++t)
      for (std::size_t i = 1; i < layers.size(); ++i) {
        ++checks;
        const auto hi = comm_start.find({t, layers[i]});
        const auto lo = backward_end.find({t, layers[i - 1]});
        if (hi == comm_start.end() || lo == backward_end.end() || hi->second > lo->second) ++broken;
      }
  }
  const double t_on = static_cast<double>(a.now().count()) / iters * 1e-6;
  const double t_off = static_cast<double>(b.now().count()) / iters * 1e-6;
  const double ratio = t_on / t_off;
  return {broken == 0 && ratio <= 0.7,
          fmt("top-2 share %.0f%%; overlap %lld/%lld ok; iteration %.2f ms on vs %.2f ms off, "
              "ratio %.3f (limit 0.7)",
              100.0 * top / all, (long long)(checks - broken), (long long)checks, t_on, t_off, ratio)};
}

// 8. DWBP changes no value under BSP.
Outcome dwbp_semantics() {
  const Network<double> net(eight_fc());
  const auto data = synthetic(32, 10, 512, 8);
  const auto init = net.init_params(8);
  double worst = 0;
  for (auto protocol : {ProtocolChoice::kAuto, ProtocolChoice::kFullPS, ProtocolChoice::kSFPS,
                        ProtocolChoice::kSFB}) {
    auto on = overlap_config(net);
    on.protocol = protocol;
    on.workers = 3;
    auto off = on;
    off.dwbp = false;
    SimCluster<double> a(net, init, data, on), b(net, init, data, off);
    a.run(50);
    b.run(50);
    worst = std::max(worst, model_rel_diff(a.final_model(), b.final_model(), 1e-300));
  }
  return {worst <= 1e-10, fmt("4 protocol settings, 50 iterations, max rel diff %.1e (tolerance 1e-10)", worst)};
}

// 9. Per-iteration, per-layer measured floats against the closed forms.
Outcome byte_accounting() {
  const int p = 4, k = 8, iters = 5;
  ModelSpec spec;
  spec.input = Shape3{1, 1, 24};
  spec.classes = 5;
  spec.layers = {fc(40, false), relu(), fc(5, false), softmax()};
  const Network<double> net(spec);
  const auto data = synthetic(24, 5, 400, 9);
  std::int64_t rows = 0, mismatched = 0;
  bool divergence_reported = true;
  std::string detail;
  for (auto protocol : kForced) {
    ClusterConfig cc;
    cc.workers = p;
    cc.batch = k;
    cc.protocol = protocol;
    cc.solver.total_iters = iters;
    SimCluster<double> c(net, net.init_params(9), data, cc);
    c.run(iters);
    std::vector<std::vector<IterationReport>> reports;
    std::vector<std::vector<ReadObservation>> reads;
    std::vector<CommStrategy> strategies;
    for (int w = 1; w <= p; ++w) {
      reports.push_back(c.worker(w).reports());
      reads.push_back(c.worker(w).reads());
    }
    for (int l = 1; l <= net.layer_count(); ++l) strategies.push_back(c.strategy(l));
    const auto metrics = assemble_metrics(net.profiles(), strategies, p, k, reports, reads);
    std::ostringstream jsonl;
    write_metrics_jsonl(jsonl, metrics);
    divergence_reported &= jsonl.str().find("\"formula_divergence\"") != std::string::npos;
    std::uint64_t example = 0, formula = 0;
    for (const auto& it : metrics)
      for (const auto& lm : it.layers) {
        const auto& prof = net.profile(lm.layer);
        const std::uint64_t m = prof.m, n = prof.n;
        std::uint64_t want = 0;
        switch (lm.strategy) {
          case CommStrategy::kFullMatrixPS: want = 2ull * p * m * n; break;
          case CommStrategy::kSufficientFactorPS: want = 1ull * p * k * (m + n) + 1ull * p * m * n; break;
          case CommStrategy::kSufficientFactorBroadcast: want = 1ull * p * (p - 1) * k * (m + n); break;
        }
        const auto measured = c.traffic().at(it.iteration).at(lm.layer).floats;
        ++rows;
        if (measured != want || lm.floats_total != want) ++mismatched;
        example = want;
        formula = lm.floats_formula;
      }
    detail += fmt("%s layer-3 %llu (formula %llu) ", std::string(to_string(protocol)).c_str(),
                  (unsigned long long)example, (unsigned long long)formula);
  }
  return {mismatched == 0 && divergence_reported,
          fmt("%lld layer-iterations, %lld mismatched; ", (long long)rows, (long long)mismatched) + detail};
}

// 10. Save at t=10 through a file, restore, run to 20; compare to a straight run.
Outcome checkpoint_determinism() {
  const auto data = synthetic(10, 3, 300, 10);
  const Network<double> net(mlp(10, 12, 3));
  const auto init = net.init_params(10);
  const auto path = fs::temp_directory_path() / "strata_acceptance.ckpt";
  bool pass = true;
  for (auto protocol : kForced) {
    ClusterConfig cc;
    cc.workers = 1;
    cc.batch = 8;
    cc.protocol = protocol;
    cc.solver.momentum = 0.9;
    cc.solver.total_iters = 20;
    SimCluster<double> straight(net, init, data, cc);
    straight.run(20);
    SimCluster<double> first(net, init, data, cc);
    first.run(10);
    write_file_atomic(path, encode_checkpoint(first.snapshot(), fingerprint(net.spec())));
    SimCluster<double> second(net, net.zero_params(), data, cc);
    second.restore(decode_checkpoint<double>(read_file(path), fingerprint(net.spec())));
    second.run(20);
    pass &= second.final_model() == straight.final_model() &&
            second.snapshot() == straight.snapshot();
  }
  fs::remove(path);
  return {pass, "P=1, each forced protocol: restored t=20 state bit-identical"};
}

// 11. The small convolutional model on a 5,000-image CIFAR-10 subset.
Outcome cifar_training(const fs::path& dir) {
  if (!fs::exists(dir / "data_batch_1.bin"))
    return {false, "CIFAR-10 binaries not found at " + dir.string() +
                       " (set STRATA_CIFAR10_DIR)", true};
  const std::string text = R"({
    "model": {"input": [3, 32, 32], "classes": 10, "layers": [
      {"type": "conv", "outputs": 16, "kernel": 5, "stride": 1, "pad": 2}, {"type": "relu"},
      {"type": "maxpool", "kernel": 2, "stride": 2},
      {"type": "conv", "outputs": 20, "kernel": 5, "stride": 1, "pad": 2}, {"type": "relu"},
      {"type": "maxpool", "kernel": 2, "stride": 2},
      {"type": "fc", "outputs": 10}, {"type": "softmax_loss"}]},
    "solver": {"epsilon": 0.02, "momentum": 0.9, "weight_decay": 0.0005},
    "cluster": {"workers": 4, "batch_size": 16},
    "data": {"source": "cifar10", "path": "DIR", "files": ["data_batch_1.bin"], "limit": 5000,
             "test_fraction": 0.0},
    "run": {"iterations": 300, "precision": "f32"}
  })";
  std::string with_dir = text;
  with_dir.replace(with_dir.find("DIR"), 3, dir.string());
  const auto cfg = parse_run_config(with_dir);
  const auto [train_set, test_set] = load_data(cfg.data, cfg.model);
  const Network<float> net(cfg.model);
  const auto init = net.init_params(cfg.seed);
  auto cc = cfg.cluster;

  const auto single = reference_train(net, init, train_set, cc.solver, 4 * cc.batch,
                                      cc.data_seed, cfg.iterations);
  const double single_loss = mean_loss(net, single.model, train_set);

  SimCluster<float> bsp(net, init, train_set, cc);
  bsp.run(cfg.iterations);
  const double bsp_loss = mean_loss(net, bsp.final_model(), train_set);

  cc.staleness = 1;
  cc.compute.flops_per_second = 1e9;
  cc.compute.jitter = 1.0;
  cc.link.bandwidth = 1e7;
  cc.link.latency_ms = 1;
  SimCluster<float> ssp(net, init, train_set, cc);
  ssp.run(cfg.iterations);
  const double ssp_loss = mean_loss(net, ssp.final_model(), train_set);

  const double d_bsp = std::fabs(bsp_loss - single_loss) / single_loss;
  const double d_ssp = std::fabs(ssp_loss - bsp_loss) / bsp_loss;
  return {d_bsp <= 0.02 && d_ssp <= 0.05 && bsp_loss < std::log(10.0),
          fmt("train loss single %.4f, P=4 BSP %.4f (%.2f%%, limit 2%%), s=1 %.4f (%.2f%%, "
              "limit 5%%), train accuracy %.3f",
              single_loss, bsp_loss, 100 * d_bsp, ssp_loss, 100 * d_ssp,
              accuracy(net, bsp.final_model(), train_set))};
}

struct Criterion {
  int id;
  const char* name;
  std::chrono::seconds limit;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace strata

int main(int argc, char** argv) {
  using namespace strata;
  CLI::App app{"strata acceptance criteria"};
  bool skip_cifar = false;
  int only = 0;
  std::string cifar_dir;
  if (const char* env = std::getenv("STRATA_CIFAR10_DIR")) cifar_dir = env;
  if (cifar_dir.empty()) cifar_dir = "data/cifar-10-batches-bin";
  app.add_flag("--skip-cifar", skip_cifar, "Do not run the CIFAR-10 training criterion");
  app.add_option("--only", only, "Run a single criterion")->check(CLI::Range(1, 11));
  app.add_option("--cifar-dir", cifar_dir, "Directory with the CIFAR-10 binary batches");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "cost model", 1s, cost_model},
      {2, "SACP decision table", 1s, sacp_table},
      {3, "sufficient-factor round trip", 10s, sf_round_trip},
      {4, "gradient check", 30s, gradients},
      {5, "BSP equivalence", 120s, bsp_equivalence},
      {6, "SSP safety", 120s, ssp_safety},
      {7, "DWBP overlap", 60s, dwbp_overlap},
      {8, "DWBP semantics", 60s, dwbp_semantics},
      {9, "byte accounting", 60s, byte_accounting},
      {10, "checkpoint determinism", 60s, checkpoint_determinism},
      {11, "CIFAR-10 training", 900s, [&] { return cifar_training(cifar_dir); }},
  };

  int failed = 0, skipped = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    if (c.id == 11 && skip_cifar) {
      std::cout << "criterion 11 SKIP  " << c.name << ": not requested (--skip-cifar)\n";
      ++skipped;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.skipped) {
      std::cout << "criterion " << c.id << " SKIP  " << c.name << ": " << o.detail << "\n";
      ++skipped;
      continue;
    }
    ++ran;
    const bool in_time = secs <= static_cast<double>(c.limit.count());
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << "criterion " << c.id << (pass ? " PASS  " : " FAIL  ") << c.name << ": " << o.detail
              << fmt(" [%.2fs, limit %llds]", secs, (long long)c.limit.count())
              << (in_time ? "" : " (over time)") << "\n"
              << std::flush;
  }
  if (failed) return 1;
  return ran == 0 && skipped > 0 ? 77 : 0;
}

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

#include "strata/cluster.hpp"

#include <cmath>
#include <string>

#include "strata/errors.hpp"

namespace strata {

void ComputeModel::validate(int layers) const {
  auto check = [&](const std::vector<Nanos>& v, const char* what) {
    if (!v.empty() && static_cast<int>(v.size()) != layers)
      throw ConfigError(std::string("compute: ") + what + " needs one entry per layer");
    for (auto d : v)
      if (d.count() < 0) throw ConfigError(std::string("compute: negative ") + what + " time");
  };
  check(forward, "forward");
  check(backward, "backward");
  if (!(flops_per_second >= 0)) throw ConfigError("compute: flops_per_second must be >= 0");
  if (!(backward_factor >= 0)) throw ConfigError("compute: backward_factor must be >= 0");
  if (!(jitter >= 0)) throw ConfigError("compute: jitter must be >= 0");
}

namespace {

Nanos flop_time(const LayerProfile& layer, int batch, double rate, double factor) {
  if (rate <= 0) return Nanos{0};
  const double secs = static_cast<double>(layer.flop_estimate) * batch * factor / rate;
  return Nanos{static_cast<std::int64_t>(std::llround(secs * 1e9))};
}

}  // namespace

Nanos ComputeModel::forward_cost(const LayerProfile& layer, int batch) const {
  if (!forward.empty()) return forward.at(static_cast<std::size_t>(layer.layer_id - 1));
  return flop_time(layer, batch, flops_per_second, 1.0);
}

Nanos ComputeModel::backward_cost(const LayerProfile& layer, int batch) const {
  if (!backward.empty()) return backward.at(static_cast<std::size_t>(layer.layer_id - 1));
  return flop_time(layer, batch, flops_per_second, backward_factor);
}

void ClusterConfig::validate() const {
  WorkerConfig{1, workers, batch, staleness, protocol, dwbp}.validate();
  link.validate();
  solver.validate();
}

template <Real T>
SimCluster<T>::SimCluster(const Network<T>& net, ModelState<T> initial, const Dataset& data,
                          ClusterConfig cfg)
    : net_(&net), data_(&data), cfg_(std::move(cfg)) {
  cfg_.validate();
  cfg_.compute.validate(net.layer_count());
  const BatchSampler sampler(data.size(), cfg_.data_seed);
  for (int p = 1; p <= cfg_.workers; ++p) {
    WorkerConfig wc{p, cfg_.workers, cfg_.batch, cfg_.staleness, cfg_.protocol, cfg_.dwbp};
    workers_.push_back(std::make_unique<WorkerCore<T>>(wc, net, initial, cfg_.solver, data,
                                                       sampler, [this] { return loop_.now(); }));
    Proc pr;
    pr.rng.seed(cfg_.compute.seed * 1000003ULL + static_cast<std::uint64_t>(p));
    procs_.push_back(std::move(pr));
  }
  std::vector<int> served;
  for (int l : net.parameterized_layers())
    if (workers_[0]->strategy(l) != CommStrategy::kSufficientFactorBroadcast) served.push_back(l);
  server_ = std::make_unique<ServerShard<T>>(
      ServerConfig{cfg_.workers, cfg_.staleness, cfg_.solver, served}, std::move(initial));
}

template <Real T>
bool SimCluster<T>::is_param(int layer_id) const {
  return is_parameterized(net_->profile(layer_id).kind);
}

template <Real T>
SimChannel<T>& SimCluster<T>::channel(int from, int to) {
  auto& slot = links_[{from, to}];
  if (!slot)
    slot = std::make_unique<SimChannel<T>>(
        loop_, cfg_.link, [this, to](UpdateMessage<T> msg) { deliver(to, std::move(msg)); });
  return *slot;
}

namespace {

template <Real T>
std::int64_t owning_iteration(const UpdateMessage<T>& m) {
  const bool pull = m.type == MsgType::kPullRequest || m.type == MsgType::kPullResponse;
  return static_cast<std::int64_t>(m.clock) - (pull ? 1 : 0);
}

}  // namespace

template <Real T>
void SimCluster<T>::dispatch(int from, std::vector<Outgoing<T>> out) {
  for (auto& o : out) {
    auto frame = encode(o.msg);
    const std::uint64_t floats = float_count(o.msg);
    traffic_[owning_iteration(o.msg)][o.msg.layer_id] += Tally{1, frame.size(), floats};
    channel(from, o.dest).link().send(o.msg.layer_id, std::move(frame), floats);
  }
}

template <Real T>
void SimCluster<T>::deliver(int to, UpdateMessage<T> msg) {
  if (to == kServerNode) {
    dispatch(kServerNode, server_->handle(msg));
    return;
  }
  workers_[static_cast<std::size_t>(to - 1)]->on_message(msg);
  step(to);
}

template <Real T>
void SimCluster<T>::launch(int id, int layer_id) {
  auto& w = *workers_[static_cast<std::size_t>(id - 1)];
  dispatch(id, w.prepare_comm(layer_id));
  w.mark_handed(layer_id);
}

template <Real T>
void SimCluster<T>::step(int id) {
  auto& pr = procs_[static_cast<std::size_t>(id - 1)];
  auto& w = *workers_[static_cast<std::size_t>(id - 1)];
  const int top = net_->layer_count();
  auto scaled = [&](Nanos d) {
    return Nanos{static_cast<std::int64_t>(std::llround(static_cast<double>(d.count()) * pr.stretch))};
  };
  while (!pr.busy) {
    switch (pr.phase) {
      case Proc::Phase::kIdle: {
        if (w.iteration() >= target_ || !w.ready_to_begin()) return;
        w.begin_iteration();
        if (cfg_.compute.jitter > 0) {
          std::uniform_real_distribution<double> u(0.0, 1.0);
          pr.stretch = 1.0 + cfg_.compute.jitter * u(pr.rng);
        }
        pr.phase = Proc::Phase::kForward;
        pr.next = 1;
        break;
      }
      case Proc::Phase::kForward: {
        if (!w.layer_ready(pr.next)) return;
        w.forward_layer(pr.next);
        pr.busy = true;
        loop_.after(scaled(cfg_.compute.forward_cost(net_->profile(pr.next), cfg_.batch)),
                    [this, id, top] {
                      auto& p = procs_[static_cast<std::size_t>(id - 1)];
                      workers_[static_cast<std::size_t>(id - 1)]->mark(EventKind::kForwardEnd, p.next);
                      if (++p.next > top) {
                        p.phase = Proc::Phase::kBackward;
                        p.next = top;
                      }
                      p.busy = false;
                      step(id);
                    });
        return;
      }
      case Proc::Phase::kBackward: {
        w.backward_layer(pr.next);
        pr.busy = true;
        loop_.after(scaled(cfg_.compute.backward_cost(net_->profile(pr.next), cfg_.batch)),
                    [this, id] {
                      auto& p = procs_[static_cast<std::size_t>(id - 1)];
                      auto& wk = *workers_[static_cast<std::size_t>(id - 1)];
                      const int layer = p.next;
                      wk.mark(EventKind::kBackwardEnd, layer);
                      if (cfg_.dwbp && is_param(layer)) launch(id, layer);
                      if (--p.next == 0) {
                        if (!cfg_.dwbp) {
                          const auto& params = wk.param_layers();
                          for (auto it = params.rbegin(); it != params.rend(); ++it) launch(id, *it);
                        }
                        dispatch(id, wk.commit_clock());
                        p.phase = Proc::Phase::kIdle;
                      }
                      p.busy = false;
                      step(id);
                    });
        return;
      }
    }
  }
}

template <Real T>
void SimCluster<T>::run(std::int64_t until) {
  if (until < target_) throw ConfigError("run: cannot go back to an earlier iteration");
  target_ = until;
  for (int p = 1; p <= cfg_.workers; ++p) step(p);
  loop_.run();
  for (const auto& w : workers_) {
    if (w->iteration() != target_ || !w->drained())
      throw Error("simulation stalled: worker " + std::to_string(w->id()) + " at iteration " +
                  std::to_string(w->iteration()) + " of " + std::to_string(target_));
  }
  if (!server_->quiescent()) throw Error("simulation stalled: server still holds updates");
}

template <Real T>
ModelState<T> SimCluster<T>::final_model() const {
  ModelState<T> out = server_->model();
  const ModelState<T> replica = workers_[0]->model();
  for (int l : net_->parameterized_layers())
    if (workers_[0]->strategy(l) == CommStrategy::kSufficientFactorBroadcast)
      out.layer(l) = replica.layer(l);
  return out;
}

template <Real T>
std::map<int, Tally> SimCluster<T>::link_totals() const {
  std::map<int, Tally> out;
  for (const auto& [key, ch] : links_)
    for (const auto& [layer, t] : ch->link().counter().by_layer()) out[layer] += t;
  return out;
}

template <Real T>
ClusterSnapshot<T> SimCluster<T>::snapshot() const {
  ClusterSnapshot<T> s;
  s.iteration = target_;
  s.server = server_->snapshot();
  for (const auto& w : workers_) s.workers.push_back(w->snapshot());
  s.data_cursor = workers_[0]->data_cursor();
  return s;
}

template <Real T>
void SimCluster<T>::restore(const ClusterSnapshot<T>& snap) {
  if (snap.workers.size() != workers_.size())
    throw FormatError("checkpoint has " + std::to_string(snap.workers.size()) +
                      " workers, cluster has " + std::to_string(workers_.size()));
  const auto expect = static_cast<std::uint64_t>(snap.iteration) *
                      static_cast<std::uint64_t>(cfg_.workers) *
                      static_cast<std::uint64_t>(cfg_.batch);
  if (snap.data_cursor != expect) throw FormatError("checkpoint data cursor is inconsistent");
  server_->restore(snap.server);
  for (std::size_t i = 0; i < workers_.size(); ++i) {
    if (snap.workers[i].iteration != snap.iteration)
      throw FormatError("checkpoint workers disagree on the iteration");
    workers_[i]->restore(snap.workers[i]);
  }
  target_ = snap.iteration;
}

template class SimCluster<float>;
template class SimCluster<double>;

}  // namespace strata

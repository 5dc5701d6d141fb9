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

#include "strata/worker.hpp"

#include <algorithm>
#include <string>

#include "strata/errors.hpp"

namespace strata {

ProtocolChoice parse_protocol(std::string_view name) {
  if (name == "auto") return ProtocolChoice::kAuto;
  if (name == "full-ps" || name == "full") return ProtocolChoice::kFullPS;
  if (name == "sf-ps") return ProtocolChoice::kSFPS;
  if (name == "sfb") return ProtocolChoice::kSFB;
  throw ConfigError("unknown protocol '" + std::string(name) +
                    "' (expected auto, full-ps, sf-ps or sfb)");
}

std::string_view to_string(ProtocolChoice choice) {
  switch (choice) {
    case ProtocolChoice::kAuto: return "auto";
    case ProtocolChoice::kFullPS: return "full-ps";
    case ProtocolChoice::kSFPS: return "sf-ps";
    case ProtocolChoice::kSFB: return "sfb";
  }
  return "?";
}

CommStrategy strategy_for(const LayerProfile& layer, int workers, int batch,
                          ProtocolChoice choice) {
  if (layer.kind != LayerKind::kFullyConnected) return CommStrategy::kFullMatrixPS;
  switch (choice) {
    case ProtocolChoice::kAuto:
      return sacp_decide(layer, static_cast<std::uint64_t>(workers),
                         static_cast<std::uint64_t>(batch));
    case ProtocolChoice::kFullPS: return CommStrategy::kFullMatrixPS;
    case ProtocolChoice::kSFPS: return CommStrategy::kSufficientFactorPS;
    case ProtocolChoice::kSFB: return CommStrategy::kSufficientFactorBroadcast;
  }
  return CommStrategy::kFullMatrixPS;
}

void WorkerConfig::validate() const {
  if (workers < 1 || workers > 65535) throw ConfigError("workers must be in [1, 65535]");
  if (worker_id < 1 || worker_id > workers) throw ConfigError("worker id out of range");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (staleness < 0) throw ConfigError("staleness must be >= 0");
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kIterationStart: return "iteration_start";
    case EventKind::kForwardStart: return "forward_start";
    case EventKind::kForwardEnd: return "forward_end";
    case EventKind::kBackwardStart: return "backward_start";
    case EventKind::kBackwardEnd: return "backward_end";
    case EventKind::kCommStart: return "comm_start";
    case EventKind::kCommSent: return "comm_sent";
    case EventKind::kCommEnd: return "comm_end";
    case EventKind::kClockCommit: return "clock_commit";
  }
  return "?";
}

namespace {

std::vector<int> sfb_of(const std::vector<int>& layers, const std::vector<CommStrategy>& s) {
  std::vector<int> out;
  for (int l : layers)
    if (s[l - 1] == CommStrategy::kSufficientFactorBroadcast) out.push_back(l);
  return out;
}

}  // namespace

template <Real T>
WorkerCore<T>::WorkerCore(WorkerConfig cfg, const Network<T>& net, ModelState<T> initial,
                          SolverConfig solver, const Dataset& data, BatchSampler sampler,
                          Clock clock)
    : cfg_(cfg),
      net_(&net),
      solver_cfg_(solver),
      data_(&data),
      sampler_(std::move(sampler)),
      clock_(std::move(clock)),
      strategies_(static_cast<std::size_t>(net.layer_count()), CommStrategy::kFullMatrixPS),
      param_layers_(net.parameterized_layers()),
      layer_mu_(std::make_unique<std::mutex[]>(static_cast<std::size_t>(net.layer_count()))),
      model_(std::move(initial)),
      solver_(SolverState<T>::zeros_like(model_)),
      peers_(cfg.workers, cfg.staleness),
      fresh_for_(static_cast<std::size_t>(net.layer_count()), 1),
      applied_(static_cast<std::size_t>(net.layer_count()), 0),
      min_stamp_(static_cast<std::size_t>(net.layer_count()), 0),
      records_(static_cast<std::size_t>(net.layer_count())) {
  cfg_.validate();
  solver_cfg_.validate();
  if (!clock_) throw ConfigError("worker: a clock source is required");
  if (model_.params.size() != static_cast<std::size_t>(net.layer_count()))
    throw ShapeError("worker: initial model does not match the network");
  if (data.dim() != net.spec().input.size())
    throw ShapeError("worker: dataset samples do not match the network input");
  for (int l : param_layers_) {
    strategies_[l - 1] = strategy_for(net.profile(l), cfg_.workers, cfg_.batch, cfg_.protocol);
    (strategies_[l - 1] == CommStrategy::kSufficientFactorBroadcast ? sfb_layers_ : ps_layers_)
        .push_back(l);
  }
  peers_ = ClockTable(cfg_.workers, cfg_.staleness, sfb_of(param_layers_, strategies_));
}

template <Real T>
CommStrategy WorkerCore<T>::strategy(int layer_id) const {
  return strategies_.at(static_cast<std::size_t>(layer_id - 1));
}

template <Real T>
std::mutex& WorkerCore<T>::layer_mutex(int layer_id) const {
  return layer_mu_[static_cast<std::size_t>(layer_id - 1)];
}

template <Real T>
std::int64_t WorkerCore<T>::iteration() const {
  std::lock_guard lock(mu_);
  return t_;
}

template <Real T>
std::uint64_t WorkerCore<T>::data_cursor() const {
  std::lock_guard lock(mu_);
  return static_cast<std::uint64_t>(committed_) * static_cast<std::uint64_t>(cfg_.workers) *
         static_cast<std::uint64_t>(cfg_.batch);
}

template <Real T>
void WorkerCore<T>::log(EventKind kind, std::int64_t iteration, int layer_id) {
  events_.push_back(WorkerEvent{clock_(), iteration, layer_id, kind});
}

template <Real T>
void WorkerCore<T>::mark(EventKind kind, int layer_id) {
  std::lock_guard lock(mu_);
  log(kind, t_, layer_id);
}

template <Real T>
bool WorkerCore<T>::ready_to_begin() const {
  std::lock_guard lock(mu_);
  return cfg_.dwbp || tasks_.empty();
}

template <Real T>
void WorkerCore<T>::begin_iteration() {
  std::lock_guard lock(mu_);
  if (t_ != committed_) throw ProtocolError("worker: previous iteration not committed");
  if (!cfg_.dwbp && !tasks_.empty())
    throw ProtocolError("worker: previous iteration still updating");
  ++t_;
  auto idx = sampler_.worker_batch(t_, cfg_.worker_id, cfg_.workers,
                                   static_cast<std::size_t>(cfg_.batch));
  trace_ = net_->begin_forward(make_batch<T>(*data_, idx));
  pass_.reset();
  log(EventKind::kIterationStart, t_, 0);
  auto& r = reports_[t_];
  r.worker = cfg_.worker_id;
  r.iteration = t_;
  r.start = clock_();
}

template <Real T>
bool WorkerCore<T>::ready_locked(int layer_id) const {
  const auto i = static_cast<std::size_t>(layer_id - 1);
  if (model_.params.at(i).empty()) return true;
  if (strategies_[i] == CommStrategy::kSufficientFactorBroadcast) {
    const std::int64_t need = t_ - cfg_.staleness - 1;
    return applied_[i] >= need && peers_.try_read(cfg_.worker_id, t_).granted;
  }
  return fresh_for_[i] >= t_;
}

template <Real T>
bool WorkerCore<T>::layer_ready(int layer_id) const {
  std::lock_guard lock(mu_);
  return ready_locked(layer_id);
}

template <Real T>
void WorkerCore<T>::forward_layer(int layer_id) {
  {
    std::lock_guard lock(mu_);
    if (!trace_ || t_ == committed_) throw ProtocolError("worker: no iteration in progress");
    if (!ready_locked(layer_id))
      throw ProtocolError("worker: layer " + std::to_string(layer_id) + " not ready");
    const auto i = static_cast<std::size_t>(layer_id - 1);
    if (!model_.params[i].empty()) {
      const std::int64_t stamp =
          strategies_[i] == CommStrategy::kSufficientFactorBroadcast ? applied_[i] : min_stamp_[i];
      reads_.push_back(ReadObservation{t_, layer_id, stamp});
    }
    log(EventKind::kForwardStart, t_, layer_id);
  }
  {
    std::lock_guard layer_lock(layer_mutex(layer_id));
    net_->forward_layer(model_, *trace_, layer_id);
  }
  if (layer_id == net_->layer_count()) {
    std::lock_guard lock(mu_);
    reports_[t_].loss = trace_->loss;
  }
}

template <Real T>
void WorkerCore<T>::backward_layer(int layer_id) {
  if (!trace_ || trace_->completed != net_->layer_count())
    throw ProtocolError("worker: backward before the forward pass finished");
  if (!pass_) pass_.emplace(*net_, *trace_, cfg_.workers);
  const auto i = static_cast<std::size_t>(layer_id - 1);
  const bool factored = !model_.params[i].empty() &&
                        net_->profile(layer_id).kind == LayerKind::kFullyConnected &&
                        strategies_[i] != CommStrategy::kFullMatrixPS;
  mark(EventKind::kBackwardStart, layer_id);
  BackwardRecord<T> rec;
  {
    std::lock_guard layer_lock(layer_mutex(layer_id));
    rec = pass_->step(model_, layer_id, factored ? GradientForm::kFactorsOnly : GradientForm::kDense);
  }
  std::lock_guard lock(mu_);
  if (!model_.params[i].empty()) records_[i] = std::move(rec);
}

template <Real T>
std::vector<Outgoing<T>> WorkerCore<T>::prepare_comm(int layer_id) {
  std::lock_guard lock(mu_);
  const auto i = static_cast<std::size_t>(layer_id - 1);
  if (!records_.at(i))
    throw ProtocolError("worker: no gradient for layer " + std::to_string(layer_id));
  BackwardRecord<T> rec = std::move(*records_[i]);
  records_[i].reset();
  const std::int64_t t = t_;
  const auto clock = static_cast<std::uint32_t>(t);
  const auto me = static_cast<std::uint16_t>(cfg_.worker_id);
  const auto layer = static_cast<std::uint16_t>(layer_id);
  log(EventKind::kCommStart, t, layer_id);
  tasks_[{layer_id, t}] = true;

  std::vector<Outgoing<T>> out;
  const CommStrategy s = strategies_[i];
  if (s == CommStrategy::kSufficientFactorBroadcast) {
    auto set = decompose(rec, cfg_.worker_id, clock);
    for (int q = 1; q <= cfg_.workers; ++q)
      if (q != cfg_.worker_id)
        out.push_back({q, UpdateMessage<T>{MsgType::kSFBroadcast, me, layer, clock, set}});
    auto& slot = sets_[{layer_id, t}];
    if (slot.empty()) slot.resize(static_cast<std::size_t>(cfg_.workers));
    slot[static_cast<std::size_t>(cfg_.worker_id - 1)] = std::move(set);
    peers_.record_push(cfg_.worker_id, layer_id, t);
  } else {
    if (s == CommStrategy::kSufficientFactorPS)
      out.push_back({kServerNode, UpdateMessage<T>{MsgType::kPushSF, me, layer, clock,
                                                   decompose(rec, cfg_.worker_id, clock)}});
    else
      out.push_back({kServerNode, UpdateMessage<T>{MsgType::kPushFull, me, layer, clock,
                                                   std::move(rec.gradient)}});
    out.push_back({kServerNode, UpdateMessage<T>{MsgType::kPullRequest, me, layer, clock + 1, {}}});
  }
  auto& sent = reports_[t].floats_sent[layer_id];
  for (const auto& o : out) sent += float_count(o.msg);
  if (s == CommStrategy::kSufficientFactorBroadcast) try_apply_broadcast(layer_id);
  return out;
}

template <Real T>
void WorkerCore<T>::mark_handed(int layer_id) {
  {
    std::lock_guard lock(mu_);
    ++handed_;
    log(EventKind::kCommSent, t_, layer_id);
  }
  cv_.notify_all();
}

template <Real T>
bool WorkerCore<T>::all_handed() const {
  std::lock_guard lock(mu_);
  return handed_ == static_cast<int>(param_layers_.size());
}

template <Real T>
std::vector<Outgoing<T>> WorkerCore<T>::commit_clock() {
  std::vector<Outgoing<T>> out;
  {
    std::lock_guard lock(mu_);
    if (t_ == committed_) throw ProtocolError("worker: nothing to commit");
    if (handed_ != static_cast<int>(param_layers_.size()))
      throw ProtocolError("worker: clock commit before every layer was sent");
    const auto clock = static_cast<std::uint32_t>(t_);
    if (!sfb_layers_.empty()) {
      peers_.advance(cfg_.worker_id);
      for (int q = 1; q <= cfg_.workers; ++q)
        if (q != cfg_.worker_id) out.push_back({q, make_clock_advance<T>(cfg_.worker_id, clock)});
    }
    if (!ps_layers_.empty())
      out.insert(out.begin(), Outgoing<T>{kServerNode, make_clock_advance<T>(cfg_.worker_id, clock)});
    committed_ = t_;
    handed_ = 0;
    pass_.reset();
    log(EventKind::kClockCommit, t_, 0);
    reports_[t_].end = clock_();
  }
  cv_.notify_all();
  return out;
}

template <Real T>
void WorkerCore<T>::finish_task(int layer_id, std::int64_t iteration) {
  if (tasks_.erase({layer_id, iteration}) > 0) log(EventKind::kCommEnd, iteration, layer_id);
}

template <Real T>
void WorkerCore<T>::try_apply_broadcast(int layer_id) {
  const auto i = static_cast<std::size_t>(layer_id - 1);
  for (;;) {
    const std::int64_t next = applied_[i] + 1;
    auto it = sets_.find({layer_id, next});
    if (it == sets_.end()) return;
    auto& parts = it->second;
    if (!std::all_of(parts.begin(), parts.end(), [](const auto& p) { return p.has_value(); }))
      return;
    Matrix<T> sum = reconstruct(*parts[0]);
    for (std::size_t p = 1; p < parts.size(); ++p) axpy_into(T{1}, reconstruct(*parts[p]), sum);
    {
      std::lock_guard layer_lock(layer_mutex(layer_id));
      apply_update(model_.layer(layer_id), sum, solver_.layer(layer_id), solver_cfg_, next - 1);
    }
    applied_[i] = next;
    sets_.erase(it);
    finish_task(layer_id, next);
  }
}

template <Real T>
void WorkerCore<T>::on_message(const UpdateMessage<T>& msg) {
  {
    std::lock_guard lock(mu_);
    const int layer_id = msg.layer_id;
    switch (msg.type) {
      case MsgType::kPullResponse: {
        if (layer_id < 1 || layer_id > net_->layer_count() ||
            strategies_[layer_id - 1] == CommStrategy::kSufficientFactorBroadcast ||
            model_.layer(layer_id).empty())
          throw ProtocolError("worker: pull response for layer " + std::to_string(layer_id));
        const auto* body = std::get_if<PullPayload<T>>(&msg.payload);
        if (body == nullptr) throw ProtocolError("worker: pull response without parameters");
        if (!body->params.same_shape(model_.layer(layer_id)))
          throw ProtocolError("worker: pull response shape mismatch");
        const auto i = static_cast<std::size_t>(layer_id - 1);
        const std::int64_t c = msg.clock;
        if (c > fresh_for_[i]) {
          std::lock_guard layer_lock(layer_mutex(layer_id));
          model_.layer(layer_id) = body->params;
          fresh_for_[i] = c;
          min_stamp_[i] = body->stamps.empty()
                              ? 0
                              : *std::min_element(body->stamps.begin(), body->stamps.end());
        }
        reports_[c - 1].floats_received[layer_id] += float_count(msg);
        finish_task(layer_id, c - 1);
        break;
      }
      case MsgType::kSFBroadcast: {
        if (layer_id < 1 || layer_id > net_->layer_count() ||
            strategies_[layer_id - 1] != CommStrategy::kSufficientFactorBroadcast)
          throw ProtocolError("worker: broadcast for layer " + std::to_string(layer_id));
        const auto* set = std::get_if<SufficientFactorSet<T>>(&msg.payload);
        if (set == nullptr) throw ProtocolError("worker: broadcast without factors");
        const int from = msg.worker_id;
        if (from < 1 || from > cfg_.workers || from == cfg_.worker_id)
          throw ProtocolError("worker: broadcast from unexpected worker " + std::to_string(from));
        const std::int64_t c = msg.clock;
        if (c <= applied_[layer_id - 1])
          throw ProtocolError("worker: stale broadcast for clock " + std::to_string(c));
        auto& slot = sets_[{layer_id, c}];
        if (slot.empty()) slot.resize(static_cast<std::size_t>(cfg_.workers));
        auto& part = slot[static_cast<std::size_t>(from - 1)];
        if (part) throw ProtocolError("worker: duplicate broadcast");
        part = *set;
        peers_.record_push(from, layer_id, c);
        reports_[c].floats_received[layer_id] += float_count(msg);
        try_apply_broadcast(layer_id);
        break;
      }
      case MsgType::kClockAdvance: {
        const int from = msg.worker_id;
        if (from < 1 || from > cfg_.workers || from == cfg_.worker_id)
          throw ProtocolError("worker: clock advance from unexpected worker");
        if (static_cast<std::int64_t>(msg.clock) != peers_.clock(from) + 1)
          throw ProtocolError("worker: out-of-order clock advance from worker " +
                              std::to_string(from));
        peers_.advance(from);
        break;
      }
      case MsgType::kAck: {
        const auto* st = std::get_if<AckStatus>(&msg.payload);
        if (st == nullptr || *st != AckStatus::kOk) ++unusual_acks_;
        break;
      }
      default:
        throw ProtocolError("worker: unexpected message type " +
                            std::to_string(static_cast<int>(msg.type)));
    }
  }
  cv_.notify_all();
}

template <Real T>
bool WorkerCore<T>::all_updated() const {
  std::lock_guard lock(mu_);
  return tasks_.empty();
}

template <Real T>
bool WorkerCore<T>::drained_locked() const {
  return tasks_.empty() && sets_.empty() && t_ == committed_;
}

template <Real T>
bool WorkerCore<T>::drained() const {
  std::lock_guard lock(mu_);
  return drained_locked();
}

template <Real T>
template <typename Pred>
bool WorkerCore<T>::wait(std::chrono::milliseconds timeout, Pred pred) const {
  Lock lock(mu_);
  return cv_.wait_for(lock, timeout, pred);
}

template <Real T>
bool WorkerCore<T>::wait_ready_to_begin(std::chrono::milliseconds timeout) const {
  return wait(timeout, [&] { return cfg_.dwbp || tasks_.empty(); });
}

template <Real T>
bool WorkerCore<T>::wait_layer_ready(int layer_id, std::chrono::milliseconds timeout) const {
  return wait(timeout, [&] { return ready_locked(layer_id); });
}

template <Real T>
bool WorkerCore<T>::wait_all_handed(std::chrono::milliseconds timeout) const {
  return wait(timeout, [&] { return handed_ == static_cast<int>(param_layers_.size()); });
}

template <Real T>
bool WorkerCore<T>::wait_drained(std::chrono::milliseconds timeout) const {
  return wait(timeout, [&] { return drained_locked(); });
}

template <Real T>
ModelState<T> WorkerCore<T>::model() const {
  std::lock_guard lock(mu_);
  return model_;
}

template <Real T>
std::vector<WorkerEvent> WorkerCore<T>::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

template <Real T>
std::vector<ReadObservation> WorkerCore<T>::reads() const {
  std::lock_guard lock(mu_);
  return reads_;
}

template <Real T>
std::vector<IterationReport> WorkerCore<T>::reports() const {
  std::lock_guard lock(mu_);
  std::vector<IterationReport> out;
  out.reserve(reports_.size());
  for (const auto& [t, r] : reports_) out.push_back(r);
  return out;
}

template <Real T>
std::size_t WorkerCore<T>::unusual_acks() const {
  std::lock_guard lock(mu_);
  return unusual_acks_;
}

template <Real T>
WorkerSnapshot<T> WorkerCore<T>::snapshot() const {
  std::lock_guard lock(mu_);
  if (!drained_locked()) throw ProtocolError("worker: snapshot while updates are in flight");
  return WorkerSnapshot<T>{t_, model_, solver_, peers_.clocks(), applied_, fresh_for_};
}

template <Real T>
void WorkerCore<T>::restore(const WorkerSnapshot<T>& snap) {
  std::lock_guard lock(mu_);
  if (snap.model.params.size() != model_.params.size() ||
      snap.applied.size() != applied_.size() || snap.fresh_for.size() != fresh_for_.size() ||
      snap.peer_clocks.size() != static_cast<std::size_t>(cfg_.workers))
    throw FormatError("worker: snapshot does not match this worker");
  for (std::size_t i = 0; i < model_.params.size(); ++i)
    if (!snap.model.params[i].same_shape(model_.params[i]))
      throw FormatError("worker: snapshot layer shape mismatch");
  t_ = committed_ = snap.iteration;
  model_ = snap.model;
  solver_ = snap.solver;
  applied_ = snap.applied;
  fresh_for_ = snap.fresh_for;
  peers_.restore(snap.peer_clocks);
  for (int l : sfb_layers_)
    for (int w = 1; w <= cfg_.workers; ++w) peers_.record_push(w, l, applied_[l - 1]);
  std::fill(min_stamp_.begin(), min_stamp_.end(), snap.iteration);
  handed_ = 0;
  sets_.clear();
  tasks_.clear();
  trace_.reset();
  pass_.reset();
  for (auto& r : records_) r.reset();
}

template class WorkerCore<float>;
template class WorkerCore<double>;

}  // namespace strata

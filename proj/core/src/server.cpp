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

#include "strata/server.hpp"

#include <algorithm>
#include <string>

#include "strata/errors.hpp"
#include "strata/sufficient_factor.hpp"

namespace strata {

void ServerConfig::validate() const {
  if (workers < 1) throw ConfigError("server: workers must be >= 1");
  if (staleness < 0) throw ConfigError("server: staleness must be >= 0");
  solver.validate();
}

template <Real T>
ServerShard<T>::ServerShard(ServerConfig cfg, ModelState<T> initial)
    : cfg_(std::move(cfg)),
      model_(std::move(initial)),
      solver_(SolverState<T>::zeros_like(model_)),
      table_(cfg_.workers, cfg_.staleness, cfg_.layers),
      applied_(model_.params.size(), 0),
      pushed_(model_.params.size(), std::vector<std::int64_t>(cfg_.workers, 0)) {
  cfg_.validate();
  for (int l : cfg_.layers) {
    if (l < 1 || l > static_cast<int>(model_.params.size()) || model_.layer(l).empty())
      throw ConfigError("server: layer " + std::to_string(l) + " has no parameters");
  }
}

template <Real T>
bool ServerShard<T>::serves(int layer_id) const {
  return std::find(cfg_.layers.begin(), cfg_.layers.end(), layer_id) != cfg_.layers.end();
}

template <Real T>
std::size_t ServerShard<T>::worker_index(int worker) const {
  if (worker < 1 || worker > cfg_.workers)
    throw ProtocolError("server: unknown worker " + std::to_string(worker));
  return static_cast<std::size_t>(worker - 1);
}

template <Real T>
std::vector<Outgoing<T>> ServerShard<T>::handle(const UpdateMessage<T>& msg) {
  switch (msg.type) {
    case MsgType::kPushFull:
    case MsgType::kPushSF:
      return {Outgoing<T>{msg.worker_id, handle_push(msg)}};
    case MsgType::kPullRequest: {
      auto r = handle_pull(msg);
      if (!r) return {};
      return {Outgoing<T>{msg.worker_id, std::move(*r)}};
    }
    case MsgType::kClockAdvance:
      return handle_clock(msg);
    default:
      throw ProtocolError("server: unexpected message type " +
                          std::to_string(static_cast<int>(msg.type)));
  }
}

template <Real T>
UpdateMessage<T> ServerShard<T>::handle_push(const UpdateMessage<T>& msg) {
  std::lock_guard lock(mu_);
  const int layer = msg.layer_id;
  const std::size_t w = worker_index(msg.worker_id);
  if (!serves(layer))
    throw ProtocolError("server: push for unserved layer " + std::to_string(layer));
  const std::int64_t clock = msg.clock;
  auto& last = pushed_[layer - 1][w];
  if (clock <= applied_[layer - 1])
    return make_ack<T>(msg.worker_id, layer, msg.clock, AckStatus::kStale);
  if (clock <= last) return make_ack<T>(msg.worker_id, layer, msg.clock, AckStatus::kDuplicate);
  if (clock != last + 1)
    throw ProtocolError("server: worker " + std::to_string(msg.worker_id) + " skipped to clock " +
                        std::to_string(clock) + " on layer " + std::to_string(layer));

  const Matrix<T>& params = model_.layer(layer);
  Matrix<T> contribution;
  if (msg.type == MsgType::kPushFull) {
    const auto* m = std::get_if<Matrix<T>>(&msg.payload);
    if (m == nullptr) throw ProtocolError("server: PushFull without a matrix payload");
    contribution = *m;
  } else {
    const auto* s = std::get_if<SufficientFactorSet<T>>(&msg.payload);
    if (s == nullptr) throw ProtocolError("server: PushSF without a factor payload");
    contribution = reconstruct(*s);
  }
  if (!contribution.same_shape(params))
    throw ProtocolError("server: gradient shape mismatch on layer " + std::to_string(layer));

  auto& slot = accum_[{layer, clock}];
  if (slot.empty()) slot.resize(static_cast<std::size_t>(cfg_.workers));
  slot[w] = std::move(contribution);
  last = clock;
  table_.record_push(msg.worker_id, layer, clock);
  try_apply(layer);
  return make_ack<T>(msg.worker_id, layer, msg.clock, AckStatus::kOk);
}

template <Real T>
void ServerShard<T>::try_apply(int layer_id) {
  for (;;) {
    const std::int64_t next = applied_[layer_id - 1] + 1;
    auto it = accum_.find({layer_id, next});
    if (it == accum_.end()) return;
    auto& parts = it->second;
    if (!std::all_of(parts.begin(), parts.end(), [](const auto& p) { return p.has_value(); }))
      return;
    Matrix<T> sum = std::move(*parts[0]);
    for (std::size_t p = 1; p < parts.size(); ++p) axpy_into(T{1}, *parts[p], sum);
    apply_update(model_.layer(layer_id), sum, solver_.layer(layer_id), cfg_.solver, next - 1);
    applied_[layer_id - 1] = next;
    accum_.erase(it);
  }
}

template <Real T>
UpdateMessage<T> ServerShard<T>::respond(const PendingPull& pull, bool deferred) {
  grants_.push_back(GrantRecord{pull.worker, pull.layer, pull.iteration, table_.min_clock(),
                                deferred});
  PullPayload<T> body;
  body.stamps.assign(static_cast<std::size_t>(cfg_.workers),
                     static_cast<std::uint32_t>(applied_[pull.layer - 1]));
  body.params = model_.layer(pull.layer);
  return UpdateMessage<T>{MsgType::kPullResponse, static_cast<std::uint16_t>(pull.worker),
                          static_cast<std::uint16_t>(pull.layer),
                          static_cast<std::uint32_t>(pull.iteration), std::move(body)};
}

template <Real T>
std::optional<UpdateMessage<T>> ServerShard<T>::handle_pull(const UpdateMessage<T>& msg) {
  std::lock_guard lock(mu_);
  worker_index(msg.worker_id);
  if (!serves(msg.layer_id))
    throw ProtocolError("server: pull for unserved layer " + std::to_string(msg.layer_id));
  if (msg.clock < 1) throw ProtocolError("server: pull for iteration 0");
  PendingPull pull{msg.worker_id, msg.layer_id, msg.clock};
  if (table_.try_read(pull.worker, pull.iteration).granted) return respond(pull, false);
  pending_.push_back(pull);
  return std::nullopt;
}

template <Real T>
std::vector<Outgoing<T>> ServerShard<T>::handle_clock(const UpdateMessage<T>& msg) {
  std::lock_guard lock(mu_);
  const int w = msg.worker_id;
  worker_index(w);
  if (static_cast<std::int64_t>(msg.clock) != table_.clock(w) + 1)
    throw ProtocolError("server: worker " + std::to_string(w) + " advanced to clock " +
                        std::to_string(msg.clock) + " from " + std::to_string(table_.clock(w)));
  table_.advance(w);

  std::vector<PendingPull> ready;
  std::vector<PendingPull> still;
  for (const auto& p : pending_)
    (table_.try_read(p.worker, p.iteration).granted ? ready : still).push_back(p);
  pending_ = std::move(still);
  std::stable_sort(ready.begin(), ready.end(), [](const PendingPull& a, const PendingPull& b) {
    return a.layer != b.layer ? a.layer < b.layer : a.worker < b.worker;
  });
  std::vector<Outgoing<T>> out;
  out.reserve(ready.size());
  for (const auto& p : ready) out.push_back(Outgoing<T>{p.worker, respond(p, true)});
  return out;
}

template <Real T>
ModelState<T> ServerShard<T>::model() const {
  std::lock_guard lock(mu_);
  return model_;
}

template <Real T>
Matrix<T> ServerShard<T>::layer(int layer_id) const {
  std::lock_guard lock(mu_);
  return model_.layer(layer_id);
}

template <Real T>
std::int64_t ServerShard<T>::applied(int layer_id) const {
  std::lock_guard lock(mu_);
  return applied_.at(static_cast<std::size_t>(layer_id - 1));
}

template <Real T>
std::int64_t ServerShard<T>::min_clock() const {
  std::lock_guard lock(mu_);
  return table_.min_clock();
}

template <Real T>
std::vector<std::int64_t> ServerShard<T>::clocks() const {
  std::lock_guard lock(mu_);
  return table_.clocks();
}

template <Real T>
std::vector<GrantRecord> ServerShard<T>::grants() const {
  std::lock_guard lock(mu_);
  return grants_;
}

template <Real T>
std::size_t ServerShard<T>::deferred() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

template <Real T>
bool ServerShard<T>::quiescent() const {
  std::lock_guard lock(mu_);
  return accum_.empty() && pending_.empty();
}

template <Real T>
ServerSnapshot<T> ServerShard<T>::snapshot() const {
  std::lock_guard lock(mu_);
  if (!accum_.empty() || !pending_.empty())
    throw ProtocolError("server: snapshot while updates are in flight");
  return ServerSnapshot<T>{model_, solver_, table_.clocks(), applied_};
}

template <Real T>
void ServerShard<T>::restore(const ServerSnapshot<T>& snap) {
  std::lock_guard lock(mu_);
  if (snap.model.params.size() != model_.params.size() ||
      snap.applied.size() != applied_.size() ||
      snap.clocks.size() != static_cast<std::size_t>(cfg_.workers))
    throw FormatError("server: snapshot does not match this shard");
  for (std::size_t i = 0; i < model_.params.size(); ++i)
    if (!snap.model.params[i].same_shape(model_.params[i]))
      throw FormatError("server: snapshot layer shape mismatch");
  model_ = snap.model;
  solver_ = snap.solver;
  applied_ = snap.applied;
  table_.restore(snap.clocks);
  for (std::size_t l = 0; l < pushed_.size(); ++l)
    std::fill(pushed_[l].begin(), pushed_[l].end(), applied_[l]);
  for (int l : cfg_.layers)
    for (int w = 1; w <= cfg_.workers; ++w) table_.record_push(w, l, applied_[l - 1]);
  accum_.clear();
  pending_.clear();
  grants_.clear();
}

template class ServerShard<float>;
template class ServerShard<double>;

}  // namespace strata

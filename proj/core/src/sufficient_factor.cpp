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

#include "strata/sufficient_factor.hpp"

#include <string>

namespace strata {

std::string_view to_string(CommStrategy s) {
  switch (s) {
    case CommStrategy::kFullMatrixPS: return "FullMatrixPS";
    case CommStrategy::kSufficientFactorPS: return "SufficientFactorPS";
    case CommStrategy::kSufficientFactorBroadcast: return "SufficientFactorBroadcast";
  }
  return "unknown";
}

CommCost cost(CommStrategy strategy, std::uint64_t workers, std::uint64_t batch,
              std::uint64_t m, std::uint64_t n) {
  if (workers == 0 || batch == 0 || m == 0 || n == 0)
    throw ConfigError("cost: counts must be positive");
  const std::uint64_t p = workers;
  switch (strategy) {
    case CommStrategy::kFullMatrixPS:
      return {strategy, 2 * p * m * n};
    case CommStrategy::kSufficientFactorBroadcast:
      return {strategy, (p - 1) * (p - 1) * batch * (m + n)};
    case CommStrategy::kSufficientFactorPS:
      return {strategy, p * batch * (m + n) + p * m * n};
  }
  return {strategy, 0};
}

std::uint64_t broadcast_unicast_floats(std::uint64_t workers, std::uint64_t batch,
                                       std::uint64_t m, std::uint64_t n) {
  return workers * (workers - 1) * batch * (m + n);
}

CommStrategy sacp_decide_fc(std::uint64_t workers, std::uint64_t batch, std::uint64_t m,
                            std::uint64_t n) {
  const auto sfb = cost(CommStrategy::kSufficientFactorBroadcast, workers, batch, m, n).floats;
  const auto sfps = cost(CommStrategy::kSufficientFactorPS, workers, batch, m, n).floats;
  return sfb <= sfps ? CommStrategy::kSufficientFactorBroadcast
                     : CommStrategy::kSufficientFactorPS;
}

CommStrategy sacp_decide(const LayerProfile& layer, std::uint64_t workers,
                         std::uint64_t batch) {
  if (layer.kind != LayerKind::kFullyConnected) return CommStrategy::kFullMatrixPS;
  return sacp_decide_fc(workers, batch, layer.m, layer.n);
}

template <Real T>
std::size_t SufficientFactorSet<T>::float_count() const {
  return pairs() * (m() + n()) + (has_bias() ? bias_u.size() + bias_v.size() : 0);
}

template <Real T>
SufficientFactorSet<T> decompose(const BackwardRecord<T>& record, int worker_id,
                                 std::uint32_t clock) {
  if (record.kind != LayerKind::kFullyConnected)
    throw UnsupportedLayerError("layer " + std::to_string(record.layer_id) + " (" +
                                std::string(to_string(record.kind)) +
                                ") has no sufficient-factor form");
  if (record.output_error.empty() || record.input_activation.empty() ||
      record.output_error.rows() != record.input_activation.rows())
    throw ShapeError("record lacks per-sample errors/activations");

  SufficientFactorSet<T> sfs;
  sfs.layer_id = record.layer_id;
  sfs.clock = clock;
  sfs.worker_id = worker_id;
  sfs.u = record.output_error;
  sfs.v = record.input_activation;
  sfs.scale = record.scale;
  if (record.has_bias) {
    const std::size_t k = sfs.u.rows(), m = sfs.u.cols();
    Vector<T> bu(m);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < m; ++j) bu[j] += sfs.u(i, j);
    sfs.bias_u = std::move(bu);
    sfs.bias_v = Vector<T>{T{1}};
  }
  return sfs;
}

template <Real T>
Matrix<T> reconstruct(const SufficientFactorSet<T>& sfs) {
  if (sfs.u.empty() || sfs.v.empty() || sfs.u.rows() != sfs.v.rows())
    throw ShapeError("factor set needs the same positive number of u and v vectors");
  if (sfs.has_bias() && (sfs.bias_u.size() != sfs.m() || sfs.bias_v.size() != 1))
    throw ShapeError("bias factor pair must be (M, 1)");
  const std::size_t m = sfs.m(), n = sfs.n();
  const T scale = static_cast<T>(sfs.scale);
  const Matrix<T> acc = matmul_tn(sfs.u, sfs.v);  // sum_k outer(u_k, v_k)
  Matrix<T> g(m, n + (sfs.has_bias() ? 1 : 0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) g(i, j) = acc(i, j) * scale;
    if (sfs.has_bias()) g(i, n) = sfs.bias_u[i] * sfs.bias_v[0] * scale;
  }
  return g;
}

template struct SufficientFactorSet<float>;
template struct SufficientFactorSet<double>;
template SufficientFactorSet<float> decompose(const BackwardRecord<float>&, int, std::uint32_t);
template SufficientFactorSet<double> decompose(const BackwardRecord<double>&, int,
                                               std::uint32_t);
template Matrix<float> reconstruct(const SufficientFactorSet<float>&);
template Matrix<double> reconstruct(const SufficientFactorSet<double>&);

}  // namespace strata

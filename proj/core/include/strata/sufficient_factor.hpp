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

#pragma once

#include <cstdint>
#include <string_view>

#include "strata/network.hpp"
#include "strata/tensor.hpp"

namespace strata {

/// The three ways a layer's update can travel.
enum class CommStrategy : std::uint8_t {
  kFullMatrixPS,               // gradient matrix to the server, matrix back
  kSufficientFactorPS,         // factors to the server, matrix back
  kSufficientFactorBroadcast,  // factors to every peer, applied locally
};

std::string_view to_string(CommStrategy s);

struct CommCost {
  CommStrategy strategy = CommStrategy::kFullMatrixPS;
  std::uint64_t floats = 0;
};

/// Floats communicated per iteration for one M x N layer across the cluster:
///   full-matrix PS       2 P M N
///   SF broadcast         (P-1)^2 K (M+N)
///   SF via PS            P K (M+N) + P M N
/// Throws ConfigError on a zero count.
CommCost cost(CommStrategy strategy, std::uint64_t workers, std::uint64_t batch,
              std::uint64_t m, std::uint64_t n);

/// What P unicast broadcasts actually put on the wire: P (P-1) K (M+N).
std::uint64_t broadcast_unicast_floats(std::uint64_t workers, std::uint64_t batch,
                                       std::uint64_t m, std::uint64_t n);

/// Structure-aware protocol choice. Non-FC layers always use the full-matrix
/// PS path; FC layers broadcast factors when (P-1)^2 K (M+N) <= P K (M+N) + P M N
/// and otherwise send factors through the server.
CommStrategy sacp_decide(const LayerProfile& layer, std::uint64_t workers, std::uint64_t batch);
CommStrategy sacp_decide_fc(std::uint64_t workers, std::uint64_t batch, std::uint64_t m,
                            std::uint64_t n);

/// Per-sample factor pairs of one FC layer gradient. Row k of `u` and of `v`
/// form pair k; the bias, when present, travels as one extra pair
/// (bias_u, [1]). reconstruct() returns scale * sum_k u_k v_k^T with the
/// bias column appended.
template <Real T>
struct SufficientFactorSet {
  int layer_id = 0;
  std::uint32_t clock = 0;
  int worker_id = 0;
  Matrix<T> u;  // K x M
  Matrix<T> v;  // K x N
  Vector<T> bias_u;  // M, or empty
  Vector<T> bias_v;  // [1], or empty
  double scale = 1.0;

  std::size_t pairs() const { return u.rows(); }
  std::size_t m() const { return u.cols(); }
  std::size_t n() const { return v.cols(); }
  bool has_bias() const { return bias_u.size() > 0; }
  /// Scalars the set puts on the wire: K (M + N), plus M + 1 with a bias.
  std::size_t float_count() const;

  friend bool operator==(const SufficientFactorSet&, const SufficientFactorSet&) = default;
};

/// Factors straight from backward's per-sample vectors; never forms the
/// gradient matrix. Throws UnsupportedLayerError for non-FC records.
template <Real T>
SufficientFactorSet<T> decompose(const BackwardRecord<T>& record, int worker_id = 0,
                                 std::uint32_t clock = 0);

/// Throws ShapeError on inconsistent factor lengths.
template <Real T>
Matrix<T> reconstruct(const SufficientFactorSet<T>& sfs);

}  // namespace strata

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
#include <vector>

#include "strata/network.hpp"
#include "strata/tensor.hpp"

namespace strata {

enum class LrPolicy { kFixed, kStep, kPolynomial };

LrPolicy parse_lr_policy(std::string_view name);
std::string_view to_string(LrPolicy policy);

/// SGD with momentum and L2 weight decay.
struct SolverConfig {
  double epsilon = 0.01;  // base step size
  double momentum = 0.0;  // in [0, 1)
  double weight_decay = 0.0;
  LrPolicy lr_policy = LrPolicy::kFixed;
  double gamma = 0.1;          // step policy
  std::int64_t step_size = 1;  // step policy
  double power = 1.0;          // polynomial policy
  std::int64_t total_iters = 1;

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

/// Step size at 0-based step t. Valid for 0 <= t <= total_iters; the
/// polynomial policy reaches exactly zero at t == total_iters.
double lr_at(const SolverConfig& cfg, std::int64_t t);

/// Momentum buffers shaped like the model, plus the number of steps taken.
template <Real T>
struct SolverState {
  std::vector<Matrix<T>> velocity;  // indexed by layer_id - 1
  std::int64_t iteration = 0;

  static SolverState zeros_like(const ModelState<T>& model);
  Matrix<T>& layer(int layer_id) { return velocity.at(static_cast<std::size_t>(layer_id - 1)); }
  const Matrix<T>& layer(int layer_id) const {
    return velocity.at(static_cast<std::size_t>(layer_id - 1));
  }
  friend bool operator==(const SolverState&, const SolverState&) = default;
};

/// One descent step on a single layer:
///   v <- momentum * v - lr_at(t) * (grad_sum + weight_decay * params)
///   params <- params + v
/// grad_sum is the aggregated update of every worker for this step.
template <Real T>
void apply_update(Matrix<T>& params, const Matrix<T>& grad_sum, Matrix<T>& velocity,
                  const SolverConfig& cfg, std::int64_t t);

}  // namespace strata

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

#include "strata/solver.hpp"

#include <cmath>
#include <string>

namespace strata {

LrPolicy parse_lr_policy(std::string_view name) {
  if (name == "fixed") return LrPolicy::kFixed;
  if (name == "step") return LrPolicy::kStep;
  if (name == "poly" || name == "polynomial") return LrPolicy::kPolynomial;
  throw ConfigError("unknown lr_policy '" + std::string(name) + "'");
}

std::string_view to_string(LrPolicy policy) {
  switch (policy) {
    case LrPolicy::kFixed: return "fixed";
    case LrPolicy::kStep: return "step";
    case LrPolicy::kPolynomial: return "polynomial";
  }
  return "fixed";
}

void SolverConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (total_iters < 1) throw ConfigError("total_iters must be positive");
  if (lr_policy == LrPolicy::kStep && step_size < 1)
    throw ConfigError("step policy needs step_size >= 1");
  if (lr_policy == LrPolicy::kPolynomial && power < 0.0)
    throw ConfigError("polynomial policy needs power >= 0");
}

double lr_at(const SolverConfig& cfg, std::int64_t t) {
  if (t < 0 || t > cfg.total_iters)
    throw ConfigError("iteration " + std::to_string(t) + " outside [0, " +
                      std::to_string(cfg.total_iters) + "]");
  switch (cfg.lr_policy) {
    case LrPolicy::kFixed:
      return cfg.epsilon;
    case LrPolicy::kStep:
      return cfg.epsilon * std::pow(cfg.gamma, static_cast<double>(t / cfg.step_size));
    case LrPolicy::kPolynomial:
      return cfg.epsilon * std::pow(1.0 - static_cast<double>(t) /
                                              static_cast<double>(cfg.total_iters),
                                    cfg.power);
  }
  return cfg.epsilon;
}

template <Real T>
SolverState<T> SolverState<T>::zeros_like(const ModelState<T>& model) {
  SolverState s;
  s.velocity.resize(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i)
    if (!model.params[i].empty())
      s.velocity[i] = Matrix<T>(model.params[i].rows(), model.params[i].cols());
  return s;
}

template <Real T>
void apply_update(Matrix<T>& params, const Matrix<T>& grad_sum, Matrix<T>& velocity,
                  const SolverConfig& cfg, std::int64_t t) {
  if (!params.same_shape(grad_sum))
    throw ShapeError("apply_update: gradient shape does not match parameters");
  if (velocity.empty()) velocity = Matrix<T>(params.rows(), params.cols());
  if (!params.same_shape(velocity))
    throw ShapeError("apply_update: momentum buffer shape does not match parameters");
  const T lr = static_cast<T>(lr_at(cfg, t));
  const T mu = static_cast<T>(cfg.momentum);
  const T decay = static_cast<T>(cfg.weight_decay);
  auto p = params.data();
  auto g = grad_sum.data();
  auto v = velocity.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = mu * v[i] - lr * (g[i] + decay * p[i]);
    p[i] += v[i];
  }
}

template struct SolverState<float>;
template struct SolverState<double>;
template void apply_update(Matrix<float>&, const Matrix<float>&, Matrix<float>&,
                           const SolverConfig&, std::int64_t);
template void apply_update(Matrix<double>&, const Matrix<double>&, Matrix<double>&,
                           const SolverConfig&, std::int64_t);

}  // namespace strata

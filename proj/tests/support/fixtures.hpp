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

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>
#include <algorithm>

#include "strata/network.hpp"
#include "strata/tensor.hpp"

namespace strata::testing {

template <Real T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                        double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix<T> m(rows, cols);
  for (auto& x : m.data()) x = static_cast<T>(u(rng));
  return m;
}

/// Row-major values computed in long double.
struct Oracle {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<long double> data;
};

/// Triple-loop a * b accumulated in long double.
template <Real T>
Oracle naive_matmul(const Matrix<T>& a, const Matrix<T>& b) {
  std::vector<long double> data(a.rows() * b.cols(), 0.0L);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k)
        s += static_cast<long double>(a(i, k)) * static_cast<long double>(b(k, j));
      data[i * b.cols() + j] = s;
    }
  return Oracle{a.rows(), b.cols(), std::move(data)};
}

template <Real T>
Matrix<T> transpose(const Matrix<T>& m) {
  Matrix<T> t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

/// Largest elementwise |a-b| / max(|a|, |b|, floor) against an oracle.
template <Real T>
double rel_error(const Matrix<T>& got, const Oracle& want, double floor = 1e-12) {
  if (got.rows() != want.rows || got.cols() != want.cols) return INFINITY;
  double worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const long double g = got.data()[i];
    const long double w = want.data[i];
    const long double den = std::max({std::fabs(g), std::fabs(w), static_cast<long double>(floor)});
    worst = std::max(worst, static_cast<double>(std::fabs(g - w) / den));
  }
  return worst;
}

template <Real T>
double model_rel_diff(const ModelState<T>& a, const ModelState<T>& b, double floor = 1e-12) {
  double worst = 0;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!a.params[i].empty()) worst = std::max(worst, max_rel_diff(a.params[i], b.params[i], floor));
  return worst;
}

inline LayerSpec fc(std::size_t outputs, bool bias = true) {
  LayerSpec s;
  s.kind = LayerKind::kFullyConnected;
  s.outputs = outputs;
  s.bias = bias;
  return s;
}

inline LayerSpec relu() {
  LayerSpec s;
  s.kind = LayerKind::kReLU;
  return s;
}

inline LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride, std::size_t pad,
                      bool bias = true) {
  LayerSpec s;
  s.kind = LayerKind::kConv2D;
  s.outputs = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  s.bias = bias;
  return s;
}

inline LayerSpec maxpool(std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

inline LayerSpec softmax() {
  LayerSpec s;
  s.kind = LayerKind::kSoftmaxLoss;
  return s;
}

/// dim -> hidden -> relu -> classes -> softmax.
inline ModelSpec mlp(std::size_t dim, std::size_t hidden, std::size_t classes, bool bias = true) {
  ModelSpec m;
  m.input = Shape3{1, 1, dim};
  m.classes = classes;
  m.layers = {fc(hidden, bias), relu(), fc(classes, bias), softmax()};
  return m;
}

/// Central-difference check of every parameterized layer's gradient.
/// Returns the worst |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// over up to `samples` coordinates per layer.
inline double finite_difference_error(const Network<double>& net, ModelState<double> state,
                                      const DataBatch<double>& batch, std::mt19937_64& rng,
                                      double h = 1e-6, std::size_t samples = 40,
                                      double floor = 1e-6) {
  const ModelState<double> grads = net.gradients(state, batch);
  double worst = 0;
  for (int l : net.parameterized_layers()) {
    auto& p = state.layer(l);
    const auto& g = grads.layer(l);
    std::vector<std::size_t> coords;
    if (p.size() <= samples) {
      for (std::size_t i = 0; i < p.size(); ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
      for (std::size_t i = 0; i < samples; ++i) coords.push_back(pick(rng));
      coords.push_back(p.size() - 1);  // a bias entry when the layer has one
    }
    for (std::size_t i : coords) {
      const double keep = p.data()[i];
      p.data()[i] = keep + h;
      const double up = net.forward(state, batch).loss;
      p.data()[i] = keep - h;
      const double down = net.forward(state, batch).loss;
      p.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g.data()[i];
      const double den = std::max({std::fabs(numeric), std::fabs(analytic), floor});
      worst = std::max(worst, std::fabs(numeric - analytic) / den);
    }
  }
  return worst;
}

template <Real T>
DataBatch<T> random_batch(const ModelSpec& spec, std::size_t k, std::mt19937_64& rng) {
  DataBatch<T> b;
  b.features = random_matrix<T>(k, spec.input.size(), rng, 0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(spec.classes) - 1);
  for (std::size_t i = 0; i < k; ++i) b.labels.push_back(label(rng));
  return b;
}

/// Models covering every layer kind for gradient checks.
inline std::vector<ModelSpec> gradient_check_models() {
  std::vector<ModelSpec> out;
  out.push_back(mlp(7, 6, 3));
  out.push_back(mlp(5, 4, 3, false));
  ModelSpec c;
  c.input = Shape3{2, 6, 6};
  c.classes = 3;
  c.layers = {conv(3, 3, 1, 1), relu(), maxpool(2, 2), fc(3), softmax()};
  out.push_back(c);
  ModelSpec d;
  d.input = Shape3{1, 7, 7};
  d.classes = 4;
  d.layers = {conv(2, 3, 2, 1, false), maxpool(3, 1), relu(), fc(5), relu(), fc(4), softmax()};
  out.push_back(d);
  return out;
}

}  // namespace strata::testing

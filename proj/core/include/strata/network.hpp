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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "strata/tensor.hpp"

namespace strata {

enum class LayerKind { kFullyConnected, kReLU, kConv2D, kMaxPool, kSoftmaxLoss };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

inline bool is_parameterized(LayerKind kind) {
  return kind == LayerKind::kFullyConnected || kind == LayerKind::kConv2D;
}

struct Shape3 {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Hyperparameters of one layer as written in a model configuration.
struct LayerSpec {
  LayerKind kind = LayerKind::kFullyConnected;
  std::size_t outputs = 0;  // FC neurons or Conv2D filters
  std::size_t kernel = 0;   // Conv2D / MaxPool window (square)
  std::size_t stride = 1;
  std::size_t pad = 0;      // Conv2D only
  bool bias = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  Shape3 input;
  std::size_t classes = 0;
  std::vector<LayerSpec> layers;  // bottom to top; the last one is SoftmaxLoss

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Static per-layer metadata. M is the output dimension and N the input
/// dimension of the parameter matrix (for Conv2D: filters and C*k*k).
struct LayerProfile {
  int layer_id = 0;  // 1-based from the bottom
  LayerKind kind = LayerKind::kFullyConnected;
  std::size_t m = 0;
  std::size_t n = 0;
  bool bias = false;
  std::size_t param_count = 0;
  std::size_t flop_estimate = 0;  // forward FLOPs per sample
  Shape3 in_shape;
  Shape3 out_shape;
};

/// Stable 64-bit digest of a spec, stored in checkpoints.
std::uint64_t fingerprint(const ModelSpec& spec);

/// Parameters of every layer. A parameterized layer holds an M x (N + bias)
/// matrix whose last column is the bias when enabled; other layers hold an
/// empty matrix.
template <Real T>
struct ModelState {
  std::vector<Matrix<T>> params;

  Matrix<T>& layer(int layer_id) { return params.at(static_cast<std::size_t>(layer_id - 1)); }
  const Matrix<T>& layer(int layer_id) const {
    return params.at(static_cast<std::size_t>(layer_id - 1));
  }
  friend bool operator==(const ModelState&, const ModelState&) = default;
};

template <Real T>
struct DataBatch {
  Matrix<T> features;  // K x input size
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

template <Real T>
struct ForwardTrace {
  /// activations[0] is the batch input, activations[i] the output of layer i.
  /// The output of the SoftmaxLoss layer is the class-probability matrix.
  std::vector<Matrix<T>> activations;
  std::vector<std::vector<std::uint32_t>> pool_argmax;  // per layer, MaxPool only
  std::vector<int> labels;
  int completed = 0;  // highest layer already forwarded
  double loss = 0.0;  // mean over the batch, set once the top layer ran

  std::size_t batch_size() const { return labels.size(); }
  friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;
};

/// Whether backward should materialize the parameter gradient. FC layers
/// headed for a sufficient-factor path skip it.
enum class GradientForm { kDense, kFactorsOnly };

/// Everything backward produced for one layer.
template <Real T>
struct BackwardRecord {
  int layer_id = 0;
  LayerKind kind = LayerKind::kFullyConnected;
  bool has_bias = false;
  /// Mean over the K local samples times the worker share 1/P; empty for
  /// unparameterized layers or kFactorsOnly.
  Matrix<T> gradient;
  /// FC only: per-sample errors arriving at the layer output (K x M) and the
  /// per-sample inputs (K x N). gradient == scale * sum_k outer(err_k, in_k).
  Matrix<T> output_error;
  Matrix<T> input_activation;
  /// Error message for the layer below (K x N); empty at layer 1.
  Matrix<T> input_error;
  double scale = 1.0;  // 1 / (K * P)

  std::size_t batch_size() const { return output_error.rows(); }
};

template <Real T>
class Network;

/// Drives one top-down backward pass. Layers must be requested strictly from
/// the top (layer L) down to layer 1.
template <Real T>
class BackwardPass {
 public:
  BackwardPass(const Network<T>& net, const ForwardTrace<T>& trace, int workers = 1);

  /// The layer the next call to step() must name; 0 once the pass is done.
  int next_layer() const { return next_; }

  /// Computes the gradient of `layer_id` and its outgoing error message.
  /// Throws ProtocolError when called out of order. Never mutates `state`.
  BackwardRecord<T> step(const ModelState<T>& state, int layer_id,
                         GradientForm form = GradientForm::kDense);

 private:
  const Network<T>* net_;
  const ForwardTrace<T>* trace_;
  double scale_;
  int next_;
  Matrix<T> error_;  // per-sample error at the output of layer next_
};

template <Real T>
class Network {
 public:
  explicit Network(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  int layer_count() const { return static_cast<int>(profiles_.size()); }
  const std::vector<LayerProfile>& profiles() const { return profiles_; }
  const LayerProfile& profile(int layer_id) const;
  const LayerSpec& layer_spec(int layer_id) const;
  /// Ids of the parameterized layers, bottom to top.
  std::vector<int> parameterized_layers() const;
  std::size_t param_count() const;

  /// Uniform in [-r, r] with r = sqrt(6 / (M + N)); biases start at zero.
  ModelState<T> init_params(std::uint64_t seed) const;
  ModelState<T> zero_params() const;

  ForwardTrace<T> forward(const ModelState<T>& state, const DataBatch<T>& batch) const;

  /// Incremental forward used by the wait-free scheduler: begin_forward
  /// stages the input, forward_layer runs exactly the next layer.
  ForwardTrace<T> begin_forward(const DataBatch<T>& batch) const;
  void forward_layer(const ModelState<T>& state, ForwardTrace<T>& trace, int layer_id) const;

  /// Convenience: full backward pass returning one record per layer, top first.
  std::vector<BackwardRecord<T>> backward(const ModelState<T>& state,
                                          const ForwardTrace<T>& trace, int workers = 1) const;

  /// Dense gradients of every layer for one batch, laid out like ModelState.
  ModelState<T> gradients(const ModelState<T>& state, const DataBatch<T>& batch,
                          int workers = 1) const;

 private:
  friend class BackwardPass<T>;

  ModelSpec spec_;
  std::vector<LayerProfile> profiles_;
};

/// Builds and validates the layer profiles of a spec; throws ConfigError.
std::vector<LayerProfile> build_profiles(const ModelSpec& spec);

}  // namespace strata

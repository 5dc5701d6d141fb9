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

#include "strata/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace strata {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kFullyConnected: return "fc";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kConv2D: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kSoftmaxLoss: return "softmax_loss";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "fc" || name == "fully_connected") return LayerKind::kFullyConnected;
  if (name == "relu") return LayerKind::kReLU;
  if (name == "conv" || name == "conv2d") return LayerKind::kConv2D;
  if (name == "maxpool" || name == "pool") return LayerKind::kMaxPool;
  if (name == "softmax_loss" || name == "softmax") return LayerKind::kSoftmaxLoss;
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

std::uint64_t fingerprint(const ModelSpec& spec) {
  // FNV-1a over a canonical rendering.
  std::ostringstream os;
  os << spec.input.channels << ',' << spec.input.height << ',' << spec.input.width << ';'
     << spec.classes << ';';
  for (const auto& l : spec.layers)
    os << to_string(l.kind) << ':' << l.outputs << ':' << l.kernel << ':' << l.stride << ':'
       << l.pad << ':' << l.bias << ';';
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<LayerProfile> build_profiles(const ModelSpec& spec) {
  if (spec.layers.empty()) throw ConfigError("model has no layers");
  if (spec.input.size() == 0) throw ConfigError("model input shape must be positive");
  if (spec.classes < 2) throw ConfigError("model needs at least two classes");
  if (spec.layers.back().kind != LayerKind::kSoftmaxLoss)
    throw ConfigError("topmost layer must be softmax_loss");

  std::vector<LayerProfile> out;
  Shape3 shape = spec.input;
  int id = 0;
  for (const auto& l : spec.layers) {
    LayerProfile p;
    p.layer_id = ++id;
    p.kind = l.kind;
    p.in_shape = shape;
    const std::string where = "layer " + std::to_string(id) + " (" +
                              std::string(to_string(l.kind)) + "): ";
    switch (l.kind) {
      case LayerKind::kFullyConnected: {
        if (l.outputs == 0) throw ConfigError(where + "outputs must be positive");
        p.m = l.outputs;
        p.n = shape.size();
        p.bias = l.bias;
        p.param_count = p.m * p.n + (l.bias ? p.m : 0);
        p.flop_estimate = 2 * p.m * p.n;
        p.out_shape = {l.outputs, 1, 1};
        break;
      }
      case LayerKind::kConv2D: {
        if (l.outputs == 0 || l.kernel == 0 || l.stride == 0)
          throw ConfigError(where + "filters, kernel and stride must be positive");
        const std::size_t h = shape.height + 2 * l.pad, w = shape.width + 2 * l.pad;
        if (h < l.kernel || w < l.kernel) throw ConfigError(where + "kernel larger than input");
        const std::size_t ho = (h - l.kernel) / l.stride + 1, wo = (w - l.kernel) / l.stride + 1;
        p.m = l.outputs;
        p.n = shape.channels * l.kernel * l.kernel;
        p.bias = l.bias;
        p.param_count = p.m * p.n + (l.bias ? p.m : 0);
        p.flop_estimate = 2 * p.m * p.n * ho * wo;
        p.out_shape = {l.outputs, ho, wo};
        break;
      }
      case LayerKind::kMaxPool: {
        if (l.kernel == 0 || l.stride == 0)
          throw ConfigError(where + "kernel and stride must be positive");
        if (shape.height < l.kernel || shape.width < l.kernel)
          throw ConfigError(where + "window larger than input");
        p.out_shape = {shape.channels, (shape.height - l.kernel) / l.stride + 1,
                       (shape.width - l.kernel) / l.stride + 1};
        p.m = p.out_shape.size();
        p.n = shape.size();
        p.flop_estimate = p.m * l.kernel * l.kernel;
        break;
      }
      case LayerKind::kReLU:
        p.out_shape = shape;
        p.m = p.n = shape.size();
        p.flop_estimate = p.n;
        break;
      case LayerKind::kSoftmaxLoss:
        if (id != static_cast<int>(spec.layers.size()))
          throw ConfigError(where + "softmax_loss must be the topmost layer");
        if (shape.size() != spec.classes)
          throw ConfigError(where + "input width " + std::to_string(shape.size()) +
                            " does not match class count " + std::to_string(spec.classes));
        p.out_shape = shape;
        p.m = p.n = shape.size();
        p.flop_estimate = 4 * p.n;
        break;
    }
    shape = p.out_shape;
    out.push_back(p);
  }
  return out;
}

namespace {

// im2col for one sample: rows are output positions, columns the C*k*k patch.
template <Real T>
Matrix<T> im2col(std::span<const T> x, const LayerProfile& p, const LayerSpec& l) {
  const auto& in = p.in_shape;
  const std::size_t ho = p.out_shape.height, wo = p.out_shape.width, k = l.kernel;
  Matrix<T> cols(ho * wo, p.n);
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      T* dst = cols.row(oy * wo + ox).data();
      std::size_t q = 0;
      for (std::size_t c = 0; c < in.channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx, ++q) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                            static_cast<std::ptrdiff_t>(l.pad);
            const auto ix = static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                            static_cast<std::ptrdiff_t>(l.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(in.height) ||
                ix >= static_cast<std::ptrdiff_t>(in.width)) {
              dst[q] = T{0};
            } else {
              dst[q] = x[(c * in.height + static_cast<std::size_t>(iy)) * in.width +
                         static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
  return cols;
}

template <Real T>
void col2im_add(const Matrix<T>& cols, std::span<T> dx, const LayerProfile& p,
                const LayerSpec& l) {
  const auto& in = p.in_shape;
  const std::size_t ho = p.out_shape.height, wo = p.out_shape.width, k = l.kernel;
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const T* src = cols.row(oy * wo + ox).data();
      std::size_t q = 0;
      for (std::size_t c = 0; c < in.channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx, ++q) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * l.stride + ky) -
                            static_cast<std::ptrdiff_t>(l.pad);
            const auto ix = static_cast<std::ptrdiff_t>(ox * l.stride + kx) -
                            static_cast<std::ptrdiff_t>(l.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(in.height) ||
                ix >= static_cast<std::ptrdiff_t>(in.width))
              continue;
            dx[(c * in.height + static_cast<std::size_t>(iy)) * in.width +
               static_cast<std::size_t>(ix)] += src[q];
          }
        }
      }
    }
  }
}

// Weight block of an augmented parameter matrix (drops the bias column).
template <Real T>
Matrix<T> weights_of(const Matrix<T>& params, const LayerProfile& p) {
  if (!p.bias) return params;
  Matrix<T> w(p.m, p.n);
  for (std::size_t r = 0; r < p.m; ++r) {
    auto src = params.row(r);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(p.n), w.row(r).begin());
  }
  return w;
}

template <Real T>
void check_params(const Matrix<T>& params, const LayerProfile& p) {
  if (params.rows() != p.m || params.cols() != p.n + (p.bias ? 1 : 0))
    throw ShapeError("layer " + std::to_string(p.layer_id) + " parameters are " +
                     std::to_string(params.rows()) + "x" + std::to_string(params.cols()));
}

}  // namespace

template <Real T>
Network<T>::Network(ModelSpec spec) : spec_(std::move(spec)), profiles_(build_profiles(spec_)) {}

template <Real T>
const LayerProfile& Network<T>::profile(int layer_id) const {
  if (layer_id < 1 || layer_id > layer_count())
    throw ConfigError("layer id " + std::to_string(layer_id) + " out of range");
  return profiles_[static_cast<std::size_t>(layer_id - 1)];
}

template <Real T>
const LayerSpec& Network<T>::layer_spec(int layer_id) const {
  profile(layer_id);
  return spec_.layers[static_cast<std::size_t>(layer_id - 1)];
}

template <Real T>
std::vector<int> Network<T>::parameterized_layers() const {
  std::vector<int> ids;
  for (const auto& p : profiles_)
    if (is_parameterized(p.kind)) ids.push_back(p.layer_id);
  return ids;
}

template <Real T>
std::size_t Network<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : profiles_) n += p.param_count;
  return n;
}

template <Real T>
ModelState<T> Network<T>::zero_params() const {
  ModelState<T> s;
  s.params.resize(profiles_.size());
  for (const auto& p : profiles_)
    if (is_parameterized(p.kind))
      s.layer(p.layer_id) = Matrix<T>(p.m, p.n + (p.bias ? 1 : 0));
  return s;
}

template <Real T>
ModelState<T> Network<T>::init_params(std::uint64_t seed) const {
  ModelState<T> s = zero_params();
  std::mt19937_64 rng(seed);
  for (const auto& p : profiles_) {
    if (!is_parameterized(p.kind)) continue;
    const double r = std::sqrt(6.0 / static_cast<double>(p.m + p.n));
    std::uniform_real_distribution<double> dist(-r, r);
    auto& w = s.layer(p.layer_id);
    for (std::size_t i = 0; i < p.m; ++i)
      for (std::size_t j = 0; j < p.n; ++j) w(i, j) = static_cast<T>(dist(rng));
  }
  return s;
}

template <Real T>
ForwardTrace<T> Network<T>::begin_forward(const DataBatch<T>& batch) const {
  if (batch.features.empty() || batch.features.rows() != batch.labels.size())
    throw ShapeError("batch features and labels disagree in size");
  if (batch.features.cols() != spec_.input.size())
    throw ShapeError("batch width " + std::to_string(batch.features.cols()) +
                     " does not match model input " + std::to_string(spec_.input.size()));
  for (int y : batch.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= spec_.classes)
      throw ShapeError("label " + std::to_string(y) + " out of range");
  ForwardTrace<T> trace;
  trace.activations.resize(profiles_.size() + 1);
  trace.activations[0] = batch.features;
  trace.pool_argmax.resize(profiles_.size());
  trace.labels = batch.labels;
  return trace;
}

template <Real T>
void Network<T>::forward_layer(const ModelState<T>& state, ForwardTrace<T>& trace,
                               int layer_id) const {
  if (layer_id != trace.completed + 1)
    throw ProtocolError("forward must run layers in order; expected layer " +
                        std::to_string(trace.completed + 1));
  const LayerProfile& p = profile(layer_id);
  const LayerSpec& l = layer_spec(layer_id);
  const Matrix<T>& x = trace.activations[static_cast<std::size_t>(layer_id - 1)];
  const std::size_t batch = x.rows();
  Matrix<T> y(batch, p.out_shape.size());

  switch (p.kind) {
    case LayerKind::kFullyConnected: {
      const Matrix<T>& w = state.layer(layer_id);
      check_params(w, p);
      for (std::size_t k = 0; k < batch; ++k) {
        const T* xr = x.row(k).data();
        T* yr = y.row(k).data();
        for (std::size_t m = 0; m < p.m; ++m) {
          const T* wr = w.row(m).data();
          T acc{0};
          for (std::size_t n = 0; n < p.n; ++n) acc += wr[n] * xr[n];
          yr[m] = p.bias ? acc + wr[p.n] : acc;
        }
      }
      break;
    }
    case LayerKind::kConv2D: {
      const Matrix<T>& params = state.layer(layer_id);
      check_params(params, p);
      const Matrix<T> w = weights_of(params, p);
      const std::size_t positions = p.out_shape.height * p.out_shape.width;
      for (std::size_t k = 0; k < batch; ++k) {
        const Matrix<T> cols = im2col<T>(x.row(k), p, l);
        const Matrix<T> out = matmul_nt(w, cols);  // F x positions
        T* yr = y.row(k).data();
        for (std::size_t f = 0; f < p.m; ++f) {
          const T b = p.bias ? params(f, p.n) : T{0};
          for (std::size_t q = 0; q < positions; ++q) yr[f * positions + q] = out(f, q) + b;
        }
      }
      break;
    }
    case LayerKind::kReLU: {
      auto xs = x.data();
      auto ys = y.data();
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] > T{0} ? xs[i] : T{0};
      break;
    }
    case LayerKind::kMaxPool: {
      const auto& in = p.in_shape;
      const auto& out = p.out_shape;
      auto& arg = trace.pool_argmax[static_cast<std::size_t>(layer_id - 1)];
      arg.assign(batch * out.size(), 0);
      for (std::size_t k = 0; k < batch; ++k) {
        const T* xr = x.row(k).data();
        T* yr = y.row(k).data();
        for (std::size_t c = 0; c < out.channels; ++c)
          for (std::size_t oy = 0; oy < out.height; ++oy)
            for (std::size_t ox = 0; ox < out.width; ++ox) {
              std::size_t best = (c * in.height + oy * l.stride) * in.width + ox * l.stride;
              for (std::size_t ky = 0; ky < l.kernel; ++ky)
                for (std::size_t kx = 0; kx < l.kernel; ++kx) {
                  const std::size_t idx =
                      (c * in.height + oy * l.stride + ky) * in.width + ox * l.stride + kx;
                  if (xr[idx] > xr[best]) best = idx;
                }
              const std::size_t o = (c * out.height + oy) * out.width + ox;
              yr[o] = xr[best];
              arg[k * out.size() + o] = static_cast<std::uint32_t>(best);
            }
      }
      break;
    }
    case LayerKind::kSoftmaxLoss: {
      double total = 0.0;
      for (std::size_t k = 0; k < batch; ++k) {
        const T* zr = x.row(k).data();
        T* pr = y.row(k).data();
        T zmax = zr[0];
        for (std::size_t c = 1; c < p.n; ++c) zmax = std::max(zmax, zr[c]);
        T sum{0};
        for (std::size_t c = 0; c < p.n; ++c) {
          pr[c] = std::exp(zr[c] - zmax);
          sum += pr[c];
        }
        for (std::size_t c = 0; c < p.n; ++c) pr[c] /= sum;
        const auto label = static_cast<std::size_t>(trace.labels[k]);
        // -log softmax via log-sum-exp
        total += static_cast<double>(zmax) + std::log(static_cast<double>(sum)) -
                 static_cast<double>(zr[label]);
      }
      trace.loss = total / static_cast<double>(batch);
      break;
    }
  }
  trace.activations[static_cast<std::size_t>(layer_id)] = std::move(y);
  trace.completed = layer_id;
}

template <Real T>
ForwardTrace<T> Network<T>::forward(const ModelState<T>& state, const DataBatch<T>& batch) const {
  ForwardTrace<T> trace = begin_forward(batch);
  for (int i = 1; i <= layer_count(); ++i) forward_layer(state, trace, i);
  return trace;
}

template <Real T>
std::vector<BackwardRecord<T>> Network<T>::backward(const ModelState<T>& state,
                                                    const ForwardTrace<T>& trace,
                                                    int workers) const {
  BackwardPass<T> pass(*this, trace, workers);
  std::vector<BackwardRecord<T>> out;
  for (int i = layer_count(); i >= 1; --i) out.push_back(pass.step(state, i));
  return out;
}

template <Real T>
ModelState<T> Network<T>::gradients(const ModelState<T>& state, const DataBatch<T>& batch,
                                    int workers) const {
  const auto trace = forward(state, batch);
  ModelState<T> g;
  g.params.resize(profiles_.size());
  for (auto& rec : backward(state, trace, workers))
    g.layer(rec.layer_id) = std::move(rec.gradient);
  return g;
}

template <Real T>
BackwardPass<T>::BackwardPass(const Network<T>& net, const ForwardTrace<T>& trace, int workers)
    : net_(&net), trace_(&trace), next_(net.layer_count()) {
  if (trace.completed != net.layer_count())
    throw ProtocolError("backward requires a completed forward pass");
  if (workers < 1) throw ConfigError("worker count must be positive");
  scale_ = 1.0 / (static_cast<double>(trace.batch_size()) * workers);
}

template <Real T>
BackwardRecord<T> BackwardPass<T>::step(const ModelState<T>& state, int layer_id,
                                        GradientForm form) {
  if (next_ == 0) throw ProtocolError("backward pass already reached layer 1");
  if (layer_id != next_)
    throw ProtocolError("backward out of order: requested layer " + std::to_string(layer_id) +
                        ", expected " + std::to_string(next_));
  const Network<T>& net = *net_;
  const LayerProfile& p = net.profile(layer_id);
  const LayerSpec& l = net.layer_spec(layer_id);
  const Matrix<T>& x = trace_->activations[static_cast<std::size_t>(layer_id - 1)];
  const Matrix<T>& y = trace_->activations[static_cast<std::size_t>(layer_id)];
  const std::size_t batch = x.rows();
  const bool emit = layer_id > 1;

  BackwardRecord<T> rec;
  rec.layer_id = layer_id;
  rec.kind = p.kind;
  rec.has_bias = p.bias;
  rec.scale = scale_;
  const T scale = static_cast<T>(scale_);

  switch (p.kind) {
    case LayerKind::kSoftmaxLoss: {
      // Per-sample derivative of -log p_y with respect to the logits.
      Matrix<T> e = y;
      for (std::size_t k = 0; k < batch; ++k)
        e(k, static_cast<std::size_t>(trace_->labels[k])) -= T{1};
      rec.input_error = std::move(e);
      break;
    }
    case LayerKind::kReLU: {
      Matrix<T> e = error_;
      auto xs = x.data();
      auto es = e.data();
      for (std::size_t i = 0; i < es.size(); ++i)
        if (!(xs[i] > T{0})) es[i] = T{0};
      rec.input_error = std::move(e);
      break;
    }
    case LayerKind::kMaxPool: {
      Matrix<T> e(batch, p.n);
      const auto& arg = trace_->pool_argmax[static_cast<std::size_t>(layer_id - 1)];
      const std::size_t outs = p.out_shape.size();
      for (std::size_t k = 0; k < batch; ++k)
        for (std::size_t o = 0; o < outs; ++o) e(k, arg[k * outs + o]) += error_(k, o);
      rec.input_error = std::move(e);
      break;
    }
    case LayerKind::kFullyConnected: {
      const Matrix<T>& w = state.layer(layer_id);
      check_params(w, p);
      if (form == GradientForm::kDense) {
        Matrix<T> g(p.m, p.n + (p.bias ? 1 : 0));
        const Matrix<T> acc = matmul_tn(error_, x);  // sum_k outer(err_k, x_k)
        for (std::size_t m = 0; m < p.m; ++m) {
          for (std::size_t n = 0; n < p.n; ++n) g(m, n) = acc(m, n) * scale;
          if (p.bias) {
            T b{0};
            for (std::size_t k = 0; k < batch; ++k) b += error_(k, m);
            g(m, p.n) = b * scale;
          }
        }
        rec.gradient = std::move(g);
      }
      if (emit) {
        Matrix<T> e(batch, p.n);
        for (std::size_t k = 0; k < batch; ++k) {
          T* er = e.row(k).data();
          for (std::size_t m = 0; m < p.m; ++m) {
            const T d = error_(k, m);
            const T* wr = w.row(m).data();
            for (std::size_t n = 0; n < p.n; ++n) er[n] += d * wr[n];
          }
        }
        rec.input_error = std::move(e);
      }
      rec.output_error = error_;
      rec.input_activation = x;
      break;
    }
    case LayerKind::kConv2D: {
      const Matrix<T>& params = state.layer(layer_id);
      check_params(params, p);
      const Matrix<T> w = weights_of(params, p);
      const std::size_t positions = p.out_shape.height * p.out_shape.width;
      Matrix<T> gw(p.m, p.n);
      std::vector<T> gb(p.m, T{0});
      Matrix<T> e = emit ? Matrix<T>(batch, p.in_shape.size()) : Matrix<T>();
      for (std::size_t k = 0; k < batch; ++k) {
        const Matrix<T> cols = im2col<T>(x.row(k), p, l);
        auto er = error_.row(k);
        Matrix<T> dout(p.m, positions, std::vector<T>(er.begin(), er.end()));
        const Matrix<T> gk = matmul(dout, cols);  // F x C*k*k
        axpy_into(T{1}, gk, gw);
        for (std::size_t f = 0; f < p.m; ++f)
          for (std::size_t q = 0; q < positions; ++q) gb[f] += dout(f, q);
        if (emit) {
          const Matrix<T> dcols = matmul_tn(dout, w);  // positions x C*k*k
          col2im_add<T>(dcols, e.row(k), p, l);
        }
      }
      Matrix<T> g(p.m, p.n + (p.bias ? 1 : 0));
      for (std::size_t f = 0; f < p.m; ++f) {
        for (std::size_t q = 0; q < p.n; ++q) g(f, q) = gw(f, q) * scale;
        if (p.bias) g(f, p.n) = gb[f] * scale;
      }
      rec.gradient = std::move(g);
      if (emit) rec.input_error = std::move(e);
      break;
    }
  }

  error_ = emit ? rec.input_error : Matrix<T>();
  --next_;
  return rec;
}

template class Network<float>;
template class Network<double>;
template class BackwardPass<float>;
template class BackwardPass<double>;

}  // namespace strata

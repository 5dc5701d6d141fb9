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

#include "strata/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "strata/errors.hpp"

namespace strata {

using json = nlohmann::json;

Precision parse_precision(std::string_view name) {
  if (name == "f32" || name == "float") return Precision::kF32;
  if (name == "f64" || name == "double") return Precision::kF64;
  throw ConfigError("unknown precision '" + std::string(name) + "' (expected f32 or f64)");
}

std::string_view to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

Transport parse_transport(std::string_view name) {
  if (name == "inproc") return Transport::kInProc;
  if (name == "tcp") return Transport::kTcp;
  throw ConfigError("unknown transport '" + std::string(name) + "' (expected inproc or tcp)");
}

std::string_view to_string(Transport t) { return t == Transport::kInProc ? "inproc" : "tcp"; }

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

std::vector<Nanos> read_ms(const json& j) {
  std::vector<Nanos> out;
  for (const auto& v : j) out.push_back(Nanos{static_cast<std::int64_t>(v.get<double>() * 1e6)});
  return out;
}

json ms_array(const std::vector<Nanos>& v) {
  json a = json::array();
  for (auto d : v) a.push_back(static_cast<double>(d.count()) / 1e6);
  return a;
}

Shape3 read_shape(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("shapes are [channels, height, width]");
  return Shape3{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

json shape_json(const Shape3& s) { return json::array({s.channels, s.height, s.width}); }

ModelSpec model_from(const json& j) {
  check_keys(j, {"input", "classes", "layers"}, "model");
  ModelSpec m;
  m.input = read_shape(j.at("input"));
  m.classes = j.at("classes").get<std::size_t>();
  for (const auto& l : j.at("layers")) {
    check_keys(l, {"type", "outputs", "kernel", "stride", "pad", "bias"}, "model layer");
    LayerSpec s;
    s.kind = parse_layer_kind(l.at("type").get<std::string>());
    s.bias = is_parameterized(s.kind);
    read(l, "outputs", s.outputs);
    read(l, "kernel", s.kernel);
    read(l, "stride", s.stride);
    read(l, "pad", s.pad);
    read(l, "bias", s.bias);
    m.layers.push_back(s);
  }
  build_profiles(m);
  return m;
}

json model_json(const ModelSpec& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    json o{{"type", std::string(to_string(l.kind))}};
    if (l.kind == LayerKind::kFullyConnected || l.kind == LayerKind::kConv2D) {
      o["outputs"] = l.outputs;
      o["bias"] = l.bias;
    }
    if (l.kind == LayerKind::kConv2D || l.kind == LayerKind::kMaxPool) {
      o["kernel"] = l.kernel;
      o["stride"] = l.stride;
    }
    if (l.kind == LayerKind::kConv2D) o["pad"] = l.pad;
    layers.push_back(o);
  }
  return {{"input", shape_json(m.input)}, {"classes", m.classes}, {"layers", layers}};
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

ModelSpec parse_model_spec(const std::string& json_text) {
  return guarded([&] { return model_from(parse_text(json_text)); });
}

void RunConfig::validate() const {
  build_profiles(model);
  cluster.validate();
  cluster.compute.validate(static_cast<int>(model.layers.size()));
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (data.source != "synthetic" && data.source != "cifar10")
    throw ConfigError("data.source must be synthetic or cifar10");
  if (data.source == "cifar10" && data.path.empty())
    throw ConfigError("data.path is required for cifar10");
  if (!(data.test_fraction >= 0 && data.test_fraction < 1))
    throw ConfigError("data.test_fraction must be in [0, 1)");
}

namespace {

template <typename V>
void patch(json& j, const char* section, const char* key, const std::optional<V>& v) {
  if (v) j[section][key] = *v;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const ConfigOverrides& o) {
  return guarded([&] {
    json j = parse_text(json_text);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    patch(j, "cluster", "workers", o.workers);
    patch(j, "cluster", "batch_size", o.batch_size);
    patch(j, "cluster", "staleness", o.staleness);
    patch(j, "cluster", "protocol", o.protocol);
    patch(j, "cluster", "dwbp", o.dwbp);
    patch(j, "cluster", "transport", o.transport);
    patch(j, "link", "bandwidth", o.bandwidth);
    patch(j, "link", "latency_ms", o.latency_ms);
    patch(j, "run", "seed", o.seed);
    patch(j, "run", "iterations", o.iterations);
    patch(j, "run", "precision", o.precision);
    patch(j, "run", "metrics_out", o.metrics_out);
    patch(j, "run", "curve_out", o.curve_out);
    patch(j, "run", "events_out", o.events_out);
    patch(j, "run", "checkpoint_out", o.checkpoint_out);
    patch(j, "run", "resume_from", o.resume_from);
    check_keys(j, {"model", "solver", "cluster", "link", "compute", "data", "run"}, "config");
    RunConfig c;
    if (!j.contains("model")) throw ConfigError("config: a model section is required");
    c.model = model_from(j.at("model"));

    bool total_given = false;
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      check_keys(s, {"epsilon", "momentum", "weight_decay", "lr_policy", "gamma", "step_size",
                     "power", "total_iters"},
                 "solver");
      auto& o = c.cluster.solver;
      read(s, "epsilon", o.epsilon);
      read(s, "momentum", o.momentum);
      read(s, "weight_decay", o.weight_decay);
      if (s.contains("lr_policy")) o.lr_policy = parse_lr_policy(s.at("lr_policy").get<std::string>());
      read(s, "gamma", o.gamma);
      read(s, "step_size", o.step_size);
      read(s, "power", o.power);
      total_given = s.contains("total_iters");
      read(s, "total_iters", o.total_iters);
    }
    if (j.contains("cluster")) {
      const auto& s = j.at("cluster");
      check_keys(s, {"workers", "batch_size", "staleness", "protocol", "dwbp", "transport"},
                 "cluster");
      read(s, "workers", c.cluster.workers);
      read(s, "batch_size", c.cluster.batch);
      read(s, "staleness", c.cluster.staleness);
      if (s.contains("protocol")) c.cluster.protocol = parse_protocol(s.at("protocol").get<std::string>());
      read(s, "dwbp", c.cluster.dwbp);
      if (s.contains("transport")) c.transport = parse_transport(s.at("transport").get<std::string>());
    }
    if (j.contains("link")) {
      const auto& s = j.at("link");
      check_keys(s, {"bandwidth", "latency_ms", "priority", "burst_bytes"}, "link");
      read(s, "bandwidth", c.cluster.link.bandwidth);
      read(s, "latency_ms", c.cluster.link.latency_ms);
      if (s.contains("priority"))
        c.cluster.link.priority = parse_priority_policy(s.at("priority").get<std::string>());
      read(s, "burst_bytes", c.cluster.link.burst_bytes);
    }
    if (j.contains("compute")) {
      const auto& s = j.at("compute");
      check_keys(s, {"forward_ms", "backward_ms", "flops_per_second", "backward_factor", "jitter",
                     "seed"},
                 "compute");
      auto& o = c.cluster.compute;
      if (s.contains("forward_ms")) o.forward = read_ms(s.at("forward_ms"));
      if (s.contains("backward_ms")) o.backward = read_ms(s.at("backward_ms"));
      read(s, "flops_per_second", o.flops_per_second);
      read(s, "backward_factor", o.backward_factor);
      read(s, "jitter", o.jitter);
      read(s, "seed", o.seed);
    }
    if (j.contains("data")) {
      const auto& s = j.at("data");
      check_keys(s, {"source", "path", "files", "limit", "test_fraction", "seed", "synthetic"},
                 "data");
      read(s, "source", c.data.source);
      read(s, "path", c.data.path);
      read(s, "files", c.data.files);
      read(s, "limit", c.data.limit);
      read(s, "test_fraction", c.data.test_fraction);
      read(s, "seed", c.data.seed);
      if (s.contains("synthetic")) {
        const auto& y = s.at("synthetic");
        check_keys(y, {"samples", "margin", "noise", "seed"}, "data.synthetic");
        read(y, "samples", c.data.synthetic.samples);
        read(y, "margin", c.data.synthetic.margin);
        read(y, "noise", c.data.synthetic.noise);
        read(y, "seed", c.data.synthetic.seed);
      }
    }
    if (j.contains("run")) {
      const auto& s = j.at("run");
      check_keys(s, {"iterations", "seed", "precision", "eval_every", "metrics_out", "curve_out",
                     "events_out", "checkpoint_out", "resume_from"},
                 "run");
      read(s, "iterations", c.iterations);
      read(s, "seed", c.seed);
      if (s.contains("precision")) c.precision = parse_precision(s.at("precision").get<std::string>());
      read(s, "eval_every", c.eval_every);
      read(s, "metrics_out", c.metrics_out);
      read(s, "curve_out", c.curve_out);
      read(s, "events_out", c.events_out);
      read(s, "checkpoint_out", c.checkpoint_out);
      read(s, "resume_from", c.resume_from);
    }
    c.cluster.data_seed = c.data.seed;
    if (!total_given) c.cluster.solver.total_iters = c.iterations;
    c.validate();
    return c;
  });
}

RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  return parse_run_config(slurp(path), overrides);
}

std::string to_json(const RunConfig& c) {
  const auto& s = c.cluster.solver;
  const auto& k = c.cluster.compute;
  json j{
      {"model", model_json(c.model)},
      {"solver",
       {{"epsilon", s.epsilon},
        {"momentum", s.momentum},
        {"weight_decay", s.weight_decay},
        {"lr_policy", std::string(to_string(s.lr_policy))},
        {"gamma", s.gamma},
        {"step_size", s.step_size},
        {"power", s.power},
        {"total_iters", s.total_iters}}},
      {"cluster",
       {{"workers", c.cluster.workers},
        {"batch_size", c.cluster.batch},
        {"staleness", c.cluster.staleness},
        {"protocol", std::string(to_string(c.cluster.protocol))},
        {"dwbp", c.cluster.dwbp},
        {"transport", std::string(to_string(c.transport))}}},
      {"link",
       {{"bandwidth", c.cluster.link.bandwidth},
        {"latency_ms", c.cluster.link.latency_ms},
        {"priority", std::string(to_string(c.cluster.link.priority))},
        {"burst_bytes", c.cluster.link.burst_bytes}}},
      {"compute",
       {{"forward_ms", ms_array(k.forward)},
        {"backward_ms", ms_array(k.backward)},
        {"flops_per_second", k.flops_per_second},
        {"backward_factor", k.backward_factor},
        {"jitter", k.jitter},
        {"seed", k.seed}}},
      {"data",
       {{"source", c.data.source},
        {"path", c.data.path},
        {"files", c.data.files},
        {"limit", c.data.limit},
        {"test_fraction", c.data.test_fraction},
        {"seed", c.data.seed},
        {"synthetic",
         {{"samples", c.data.synthetic.samples},
          {"margin", c.data.synthetic.margin},
          {"noise", c.data.synthetic.noise},
          {"seed", c.data.synthetic.seed}}}}},
      {"run",
       {{"iterations", c.iterations},
        {"seed", c.seed},
        {"precision", std::string(to_string(c.precision))},
        {"eval_every", c.eval_every},
        {"metrics_out", c.metrics_out},
        {"curve_out", c.curve_out},
        {"events_out", c.events_out},
        {"checkpoint_out", c.checkpoint_out},
        {"resume_from", c.resume_from}}},
  };
  return j.dump(2);
}

const Endpoint& Manifest::node(int id) const {
  if (id == 0) return server;
  if (id < 1 || id > worker_count())
    throw ConfigError("manifest: no node " + std::to_string(id));
  return workers[static_cast<std::size_t>(id - 1)];
}

void Manifest::validate() const {
  if (workers.empty()) throw ConfigError("manifest: at least one worker is required");
  std::set<std::pair<std::string, std::uint16_t>> seen;
  auto check = [&](const Endpoint& e, const std::string& what) {
    if (e.host.empty()) throw ConfigError("manifest: " + what + " has no host");
    if (e.port == 0) throw ConfigError("manifest: " + what + " has no port");
    if (!seen.insert({e.host, e.port}).second)
      throw ConfigError("manifest: " + e.host + ":" + std::to_string(e.port) + " used twice");
  };
  check(server, "server");
  for (std::size_t i = 0; i < workers.size(); ++i) {
    if (workers[i].id != static_cast<int>(i) + 1)
      throw ConfigError("manifest: worker ids must be 1..P");
    check(workers[i], "worker " + std::to_string(workers[i].id));
  }
}

Manifest parse_manifest(const std::string& json_text) {
  return guarded([&] {
    const json j = parse_text(json_text);
    check_keys(j, {"server", "workers"}, "manifest");
    Manifest m;
    auto endpoint = [](const json& e, bool with_id) {
      if (with_id)
        check_keys(e, {"id", "host", "port"}, "manifest worker");
      else
        check_keys(e, {"host", "port"}, "manifest server");
      Endpoint out;
      if (with_id) out.id = e.at("id").get<int>();
      read(e, "host", out.host);
      out.port = e.at("port").get<std::uint16_t>();
      return out;
    };
    m.server = endpoint(j.at("server"), false);
    for (const auto& w : j.at("workers")) m.workers.push_back(endpoint(w, true));
    std::sort(m.workers.begin(), m.workers.end(),
              [](const Endpoint& a, const Endpoint& b) { return a.id < b.id; });
    m.validate();
    return m;
  });
}

Manifest load_manifest(const std::filesystem::path& path) { return parse_manifest(slurp(path)); }

std::string to_json(const Manifest& m) {
  json workers = json::array();
  for (const auto& w : m.workers) workers.push_back({{"id", w.id}, {"host", w.host}, {"port", w.port}});
  return json{{"server", {{"host", m.server.host}, {"port", m.server.port}}}, {"workers", workers}}
      .dump(2);
}

Manifest local_manifest(int workers, std::uint16_t base_port) {
  if (workers < 1) throw ConfigError("manifest: at least one worker is required");
  if (base_port == 0 || base_port + workers > 65535)
    throw ConfigError("manifest: port range out of bounds");
  Manifest m;
  m.server = Endpoint{0, "127.0.0.1", base_port};
  for (int p = 1; p <= workers; ++p)
    m.workers.push_back(Endpoint{p, "127.0.0.1", static_cast<std::uint16_t>(base_port + p)});
  return m;
}

std::pair<Dataset, Dataset> load_data(const DataConfig& cfg, const ModelSpec& model) {
  Dataset all;
  if (cfg.source == "synthetic") {
    SynthOptions o = cfg.synthetic;
    o.shape = model.input;
    o.classes = static_cast<int>(model.classes);
    all = synth_dataset(o);
  } else if (cfg.source == "cifar10") {
    const std::filesystem::path p(cfg.path);
    if (std::filesystem::is_directory(p))
      all = load_cifar10_dir(p, cfg.files.empty() ? cifar10_train_files() : cfg.files);
    else
      all = load_cifar10(p);
  } else {
    throw ConfigError("unknown data source '" + cfg.source + "'");
  }
  if (all.dim() != model.input.size())
    throw ConfigError("data samples have " + std::to_string(all.dim()) +
                      " values, the model expects " + std::to_string(model.input.size()));
  if (static_cast<std::size_t>(all.classes) > model.classes)
    throw ConfigError("data has more classes than the model outputs");
  if (cfg.limit > 0) all = take(all, cfg.limit);
  return split(all, cfg.test_fraction, cfg.seed);
}

}  // namespace strata

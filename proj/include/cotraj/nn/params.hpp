/* Copyright 2026 The cotraj Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Named parameter storage, per-forward bindings, AdamW and checkpoints.

#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotraj/common.hpp"
#include "cotraj/nn/tensor.hpp"
#include "cotraj/rng.hpp"

namespace cotraj::nn {

using ParamId = std::size_t;

struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  bool frozen = false;  // stored and checkpointed, never optimized
};

class ParameterStore {
 public:
  ParamId add(std::string name, Shape shape, std::vector<double> init) {
    if (index_.count(name)) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    if (init.size() != shape_size(shape)) {
      throw std::invalid_argument("parameter " + name + ": init size mismatch");
    }
    index_[name] = params_.size();
    params_.push_back({std::move(name), std::move(shape), std::move(init)});
    return params_.size() - 1;
  }

  // Gaussian init with standard deviation gain / sqrt(fan_in).
  ParamId add_normal(std::string name, Shape shape, Rng& rng, double gain = 1.0) {
    const std::size_t fan_in = shape.size() > 1 ? shape[0] : 1;
    const double sigma = gain / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.normal(0.0, sigma);
    return add(std::move(name), std::move(shape), std::move(v));
  }

  ParamId add_constant(std::string name, Shape shape, double c) {
    std::vector<double> v(shape_size(shape), c);
    return add(std::move(name), std::move(shape), std::move(v));
  }

  ParamId add_frozen(std::string name, Shape shape, std::vector<double> init) {
    const ParamId id = add(std::move(name), std::move(shape), std::move(init));
    params_[id].frozen = true;
    return id;
  }

  std::size_t size() const { return params_.size(); }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  Parameter& mutable_param(ParamId id) { return params_[id]; }
  const std::vector<Parameter>& all() const { return params_; }

  std::optional<ParamId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Trainable scalars only.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (!p.frozen) n += p.value.size();
    return n;
  }

  // Bumped on every in-place update; part of feature-cache keys.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, ParamId> index_;
  std::uint64_t version_ = 0;
};

using Gradients = std::vector<std::vector<double>>;

inline Gradients zero_gradients(const ParameterStore& store) {
  Gradients g(store.size());
  for (ParamId i = 0; i < store.size(); ++i)
    g[i].assign(store[i].value.size(), 0.0);
  return g;
}

// Leaf tensors for one forward pass. Each parameter is materialized once per
// binding; gradients land in the binding's own leaves, so concurrent passes
// over the same store never share mutable state.
class Binding {
 public:
  Binding(const ParameterStore& store, bool trainable)
      : store_(&store), trainable_(trainable), leaves_(store.size()),
        serial_(next_serial()) {}

  Tensor operator()(ParamId id) {
    Tensor& t = leaves_.at(id);
    if (!t.defined()) {
      const auto& p = (*store_)[id];
      t = Tensor::from(p.shape, p.value, trainable_ && !p.frozen && grad_enabled());
    }
    return t;
  }

  const ParameterStore& store() const { return *store_; }
  bool trainable() const { return trainable_; }
  std::uint64_t serial() const { return serial_; }

  void accumulate_grads(Gradients& into, double weight = 1.0) const {
    for (ParamId i = 0; i < leaves_.size(); ++i) {
      const Tensor& t = leaves_[i];
      if (!t.defined() || !t.has_grad()) continue;
      const auto g = t.grad();
      for (std::size_t j = 0; j < g.size(); ++j) into[i][j] += weight * g[j];
    }
  }

  // Gradient of one parameter, zeros when it did not take part.
  std::vector<double> grad_of(ParamId id) const {
    const Tensor& t = leaves_.at(id);
    if (!t.defined() || !t.has_grad())
      return std::vector<double>((*store_)[id].value.size(), 0.0);
    return {t.grad().begin(), t.grad().end()};
  }

 private:
  static std::uint64_t next_serial() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  const ParameterStore* store_;
  bool trainable_;
  std::vector<Tensor> leaves_;
  std::uint64_t serial_;
};

struct AdamWConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// One decoupled-weight-decay adaptive-moment update with bias-corrected
// moments.
inline void adamw_step(std::span<double> param, std::span<const double> grad,
                       AdamState& st, const AdamWConfig& hp) {
  if (param.size() != grad.size()) {
    throw std::invalid_argument("adamw_step: parameter/gradient size mismatch");
  }
  if (st.m.size() != param.size()) {
    st.m.assign(param.size(), 0.0);
    st.v.assign(param.size(), 0.0);
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = hp.beta1 * st.m[i] + (1.0 - hp.beta1) * grad[i];
    st.v[i] = hp.beta2 * st.v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    param[i] -= hp.lr * (mhat / (std::sqrt(vhat) + hp.eps) +
                         hp.weight_decay * param[i]);
  }
}

class AdamW {
 public:
  explicit AdamW(AdamWConfig hp) : hp_(hp) {}

  void step(ParameterStore& store, const Gradients& grads) {
    if (state_.size() != store.size()) state_.resize(store.size());
    for (ParamId i = 0; i < store.size(); ++i) {
      if (store[i].frozen) continue;
      adamw_step(store.mutable_param(i).value, grads[i], state_[i], hp_);
    }
    store.bump_version();
  }

  AdamWConfig& config() { return hp_; }

 private:
  AdamWConfig hp_;
  std::vector<AdamState> state_;
};

// Checkpoint container (see docs/checkpoint.md):
//   magic "CTRJCKPT", u32 version, u32 entry count, then per entry
//   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values.
// All integers and floats are little-endian.
namespace checkpoint {

inline constexpr char kMagic[8] = {'C', 'T', 'R', 'J', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  std::uint64_t u(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > data_.size())
      throw DataError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw DataError("checkpoint truncated");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline std::string serialize(const ParameterStore& store) {
  std::string out(kMagic, kMagic + 8);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store.all()) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) detail::put_u64(out, d);
    for (double v : p.value) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

// Overwrites values in `store`; names, order-independent, and shapes must
// match exactly.
inline void deserialize_into(const std::string& data, ParameterStore& store) {
  detail::Reader r(data);
  if (r.bytes(8) != std::string(kMagic, kMagic + 8))
    throw DataError("not a checkpoint file (bad magic)");
  const auto version = r.u(4);
  if (version != kVersion)
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.u(4);
  if (count != store.size())
    throw DataError("checkpoint has " + std::to_string(count) +
                    " tensors, model expects " + std::to_string(store.size()));
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name = r.bytes(static_cast<std::size_t>(r.u(4)));
    const auto rank = r.u(4);
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(r.u(8));
    auto id = store.find(name);
    if (!id) throw DataError("checkpoint tensor not in model: " + name);
    auto& p = store.mutable_param(*id);
    if (p.shape != shape)
      throw DataError("checkpoint tensor " + name + " has shape " +
                      shape_string(shape) + ", model expects " +
                      shape_string(p.shape));
    for (auto& v : p.value) v = std::bit_cast<double>(r.u(8));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  store.bump_version();
}

inline void save(const ParameterStore& store, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  const auto data = serialize(store);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline void load(const std::string& path, ParameterStore& store) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  deserialize_into(data, store);
}

}  // namespace checkpoint

}  // namespace cotraj::nn

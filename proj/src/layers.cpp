// Copyright 2026 The GRU-Net Authors
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

#include "grunet/layers.hpp"

#include <cmath>

#include "grunet/error.hpp"

namespace grunet {

Var ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Var v(std::move(init), trainable);
  entries_.push_back({name, v, trainable});
  return v;
}

Var ParameterStore::add_parameter(const std::string& name, Tensor init) { return add(name, std::move(init), true); }

Var ParameterStore::add_buffer(const std::string& name, Tensor init) { return add(name, std::move(init), false); }

std::vector<Var> ParameterStore::trainable() const {
  std::vector<Var> out;
  for (const auto& e : entries_) {
    if (e.trainable) out.push_back(e.var);
  }
  return out;
}

Index ParameterStore::trainable_count() const {
  Index n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.var.value().size();
  }
  return n;
}

const ParameterStore::Entry* ParameterStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

Tensor Initializer::he_uniform(Shape shape, Index fan_in) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(std::max<Index>(1, fan_in)));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng_);
  return t;
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, Index in_ch, Index out_ch, int kernel, int stride,
               int padding, Initializer& init)
    : stride_(stride), padding_(padding) {
  weight_ = store.add_parameter(name + ".weight",
                                init.he_uniform({kernel, kernel, in_ch, out_ch}, Index{kernel} * kernel * in_ch));
  bias_ = store.add_parameter(name + ".bias", Tensor({out_ch}, 0.0));
}

ConvTranspose2x2::ConvTranspose2x2(ParameterStore& store, const std::string& name, Index in_ch, Index out_ch,
                                   Initializer& init) {
  weight_ = store.add_parameter(name + ".weight", init.he_uniform({in_ch, 2, 2, out_ch}, in_ch));
  bias_ = store.add_parameter(name + ".bias", Tensor({out_ch}, 0.0));
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, Index channels) {
  gamma_ = store.add_parameter(name + ".gamma", Tensor({channels}, 1.0));
  beta_ = store.add_parameter(name + ".beta", Tensor({channels}, 0.0));
  running_mean_ = store.add_buffer(name + ".running_mean", Tensor({channels}, 0.0));
  running_var_ = store.add_buffer(name + ".running_var", Tensor({channels}, 1.0));
}

Var BatchNorm::operator()(const Var& x, const ForwardContext& ctx) const {
  ops::BatchNormOptions opts;
  opts.training = ctx.training();
  opts.update_running_stats = ctx.training() && ctx.update_running_stats;
  // The running buffers are shared handles; copying the Var keeps the same node.
  Var mean = running_mean_;
  Var var = running_var_;
  return ops::batch_norm(x, gamma_, beta_, mean.mutable_value(), var.mutable_value(), opts);
}

Dense::Dense(ParameterStore& store, const std::string& name, Index in, Index out, Initializer& init) {
  weight_ = store.add_parameter(name + ".weight", init.he_uniform({in, out}, in));
  bias_ = store.add_parameter(name + ".bias", Tensor({out}, 0.0));
}

}  // namespace grunet

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

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "grunet/autograd.hpp"
#include "grunet/ops.hpp"

namespace grunet {

enum class Mode { kTrain, kInfer };

/// Per-call forward settings. The noise seed feeds a generator owned by the call.
struct ForwardContext {
  Mode mode = Mode::kInfer;
  std::uint64_t noise_seed = 0;
  bool update_running_stats = false;

  bool training() const { return mode == Mode::kTrain; }
};

/// Ordered registry of named model arrays. Trainable entries are optimised; buffers
/// (batch-norm running statistics) are only checkpointed.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Var var;
    bool trainable;
  };

  Var add_parameter(const std::string& name, Tensor init);
  Var add_buffer(const std::string& name, Tensor init);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Var> trainable() const;
  Index trainable_count() const;
  const Entry* find(const std::string& name) const;
  void zero_grad();

 private:
  Var add(const std::string& name, Tensor init, bool trainable);
  std::vector<Entry> entries_;
};

/// Seeded He-style uniform initialiser: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  Tensor he_uniform(Shape shape, Index fan_in);

 private:
  std::mt19937_64 rng_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, Index in_ch, Index out_ch, int kernel, int stride,
         int padding, Initializer& init);
  Var operator()(const Var& x) const { return ops::conv2d(x, weight_, bias_, stride_, padding_); }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }
  Index out_channels() const { return weight_.shape()[3]; }

 private:
  Var weight_, bias_;
  int stride_ = 1, padding_ = 0;
};

class ConvTranspose2x2 {
 public:
  ConvTranspose2x2() = default;
  ConvTranspose2x2(ParameterStore& store, const std::string& name, Index in_ch, Index out_ch, Initializer& init);
  Var operator()(const Var& x) const { return ops::conv_transpose2x2(x, weight_, bias_); }

 private:
  Var weight_, bias_;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterStore& store, const std::string& name, Index channels);
  Var operator()(const Var& x, const ForwardContext& ctx) const;
  Var& gamma() { return gamma_; }
  Var& beta() { return beta_; }

 private:
  Var gamma_, beta_;
  // Shared handles; running statistics mutate through them.
  Var running_mean_, running_var_;
};

class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore& store, const std::string& name, Index in, Index out, Initializer& init);
  Var operator()(const Var& x) const { return ops::dense(x, weight_, bias_); }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  Var weight_, bias_;
};

}  // namespace grunet

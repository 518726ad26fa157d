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

#include <optional>
#include <string>
#include <vector>

#include "grunet/layers.hpp"

namespace grunet {

/// Chain of pre-activation residual blocks, y = x + conv3x3(relu(bn(x))), placed on a skip
/// connection. With `dense` set, block k >= 1 also receives a 1x1 projection (back to the
/// path width) of the channel concatenation of the path input and every earlier block output.
class ResPath {
 public:
  ResPath() = default;
  ResPath(ParameterStore& store, const std::string& name, Index channels, int n_blocks, bool dense,
          Initializer& init);

  Var operator()(const Var& f, const ForwardContext& ctx) const;

  int blocks() const { return static_cast<int>(blocks_.size()); }
  bool dense() const { return dense_; }

 private:
  struct Block {
    BatchNorm norm;
    Conv2d conv;
  };
  std::vector<Block> blocks_;
  std::vector<Conv2d> fusion_;
  bool dense_ = false;
};

/// GAP -> Dense(C, C/2) -> ReLU -> Dense(C/2, 1) -> sigmoid. Emits lambda of shape (B, 1).
class Controller {
 public:
  Controller() = default;
  Controller(ParameterStore& store, const std::string& name, Index channels, Initializer& init);

  /// f_prime: (B, C) pooled features.
  Var operator()(const Var& f_prime) const;

  Dense& hidden() { return hidden_; }
  Dense& output() { return output_; }

 private:
  Dense hidden_;
  Dense output_;
};

/// (B, H, W, C) -> (B, C) spatial mean.
Var gap(const Var& f);

/// F_skip[b, ...] = lambda[b] * F[b, ...].
Var apply_lambda(const Var& f, const Var& lambda);

struct CdrbOutput {
  Var skip;
  Var lambda;  // undefined when the controller is disabled
};

/// Controlled Dense Residual Block. With the controller disabled and `dense` false this is the
/// plain MultiResUNet Res path.
class Cdrb {
 public:
  Cdrb() = default;
  Cdrb(ParameterStore& store, const std::string& name, Index channels, int n_blocks, bool dense,
       bool use_controller, Initializer& init);

  CdrbOutput operator()(const Var& f_enc, const ForwardContext& ctx) const;

  ResPath& path() { return path_; }
  Controller* controller() { return controller_ ? &*controller_ : nullptr; }

 private:
  ResPath path_;
  std::optional<Controller> controller_;
};

}  // namespace grunet

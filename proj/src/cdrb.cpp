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

#include "grunet/cdrb.hpp"

#include "grunet/error.hpp"

namespace grunet {

ResPath::ResPath(ParameterStore& store, const std::string& name, Index channels, int n_blocks, bool dense,
                 Initializer& init)
    : dense_(dense) {
  if (n_blocks < 1) throw ConfigError(name + ": a Res path needs at least one block");
  for (int k = 0; k < n_blocks; ++k) {
    const std::string block = name + ".block" + std::to_string(k);
    if (dense && k > 0) {
      fusion_.emplace_back(store, block + ".fusion", channels * (k + 1), channels, 1, 1, 0, init);
    }
    Block b;
    b.norm = BatchNorm(store, block + ".bn", channels);
    b.conv = Conv2d(store, block + ".conv", channels, channels, 3, 1, 1, init);
    blocks_.push_back(std::move(b));
  }
}

Var ResPath::operator()(const Var& f, const ForwardContext& ctx) const {
  std::vector<Var> history{f};
  Var current = f;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    Var in = current;
    if (dense_ && k > 0) in = ops::add(current, fusion_[k - 1](ops::concat_channels(history)));
    const Block& b = blocks_[k];
    current = ops::add(in, b.conv(ops::relu(b.norm(in, ctx))));
    if (dense_) history.push_back(current);
  }
  return current;
}

Controller::Controller(ParameterStore& store, const std::string& name, Index channels, Initializer& init) {
  const Index hidden = std::max<Index>(1, channels / 2);
  hidden_ = Dense(store, name + ".hidden", channels, hidden, init);
  output_ = Dense(store, name + ".out", hidden, 1, init);
}

Var Controller::operator()(const Var& f_prime) const { return ops::sigmoid(output_(ops::relu(hidden_(f_prime)))); }

Var gap(const Var& f) { return ops::global_avg_pool(f); }

Var apply_lambda(const Var& f, const Var& lambda) { return ops::scale_per_sample(f, lambda); }

Cdrb::Cdrb(ParameterStore& store, const std::string& name, Index channels, int n_blocks, bool dense,
           bool use_controller, Initializer& init)
    : path_(store, name + ".res_path", channels, n_blocks, dense, init) {
  if (use_controller) controller_.emplace(store, name + ".controller", channels, init);
}

CdrbOutput Cdrb::operator()(const Var& f_enc, const ForwardContext& ctx) const {
  Var f = path_(f_enc, ctx);
  if (!controller_) return {f, Var()};
  Var lambda = (*controller_)(gap(f));
  return {apply_lambda(f, lambda), lambda};
}

}  // namespace grunet

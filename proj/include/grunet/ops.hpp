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

#include <utility>
#include <vector>

#include "grunet/autograd.hpp"

// Differentiable primitives over NHWC tensors. Every op records its backward pass on the
// tape when gradients are enabled.
namespace grunet::ops {

/// weight: (kh, kw, cin, cout); bias: (cout). Zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);

/// Non-overlapping 2x2 stride-2 transposed convolution. weight: (cin, 2, 2, cout).
Var conv_transpose2x2(const Var& x, const Var& weight, const Var& bias);

/// 2x2 stride-2 max pooling; H and W must be even.
Var max_pool2x2(const Var& x);

struct BatchNormOptions {
  bool training = true;
  bool update_running_stats = false;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalisation over every axis except the last. In training mode the batch
/// statistics are used (and optionally folded into the running buffers).
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& options);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var add(const Var& a, const Var& b);

/// Elementwise product. `gate` may equal `x` in shape or be rank-4 with one channel, in
/// which case it broadcasts across channels.
Var multiply(const Var& gate, const Var& x);

/// out[b, ...] = scale[b] * x[b, ...]; scale has B elements.
Var scale_per_sample(const Var& x, const Var& scale);

Var concat_channels(const std::vector<Var>& xs);

/// (B, H, W, C) -> (B, C) spatial mean.
Var global_avg_pool(const Var& x);

/// x: (B, in), weight: (in, out), bias: (out) -> (B, out).
Var dense(const Var& x, const Var& weight, const Var& bias);

Var reshape(const Var& x, Shape shape);

/// Per-sample mean and population standard deviation over all non-batch axes; each (B).
std::pair<Var, Var> per_sample_mean_std(const Var& x);

}  // namespace grunet::ops

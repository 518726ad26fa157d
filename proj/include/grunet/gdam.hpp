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

#include <random>
#include <string>
#include <vector>

#include "grunet/layers.hpp"

namespace grunet {

/// Parameters of the fused prior eta(mu, sigma). Each holds one value per batch element
/// (or a single value shared by the batch, as for text statistics).
struct GaussianParams {
  Var mu;
  Var sigma;
};

/// Per-sample mean and population standard deviation over all non-batch axes.
GaussianParams feature_stats(const Var& x);

/// mu = mu_F + mu_T, sigma = sqrt(sigma_T^2 + sigma_F^2). Either side may hold a single
/// shared value, which broadcasts over the other side's batch.
GaussianParams fuse_gaussian(const GaussianParams& features, const GaussianParams& text);

/// Reparameterised draw z = mu + sigma * eps of shape (B, height, width, 1). In inference
/// mode eps = 0 and the generator is not touched.
Var sample_eta(const GaussianParams& params, Index height, Index width, Mode mode, std::mt19937_64& rng);

/// Gaussian distribution-based attention over the bottleneck. The 32x32 sample drawn from
/// the fused prior is resampled to the bottleneck size (stride-2 transposed convolutions
/// when it is larger, stride-2 convolutions when smaller, a 1x1 convolution when equal),
/// then a 3x3 convolution with sigmoid produces the attention map A and the output is A * F.
class Gdam {
 public:
  static constexpr Index kSeedSize = 32;

  struct Output {
    Var features;
    Var attention;
    GaussianParams fused;
  };

  Gdam() = default;
  Gdam(ParameterStore& store, const std::string& name, Index channels, Index bottleneck_height,
       Index bottleneck_width, bool broadcast, Initializer& init);

  /// text_projected: the (1, 32, 32) projected text matrix T.
  Output operator()(const Var& bottleneck, const Var& text_projected, const ForwardContext& ctx) const;

  /// Number of stride-2 stages between the 32x32 seed and the bottleneck (negative: down).
  int scale_steps() const { return scale_steps_; }

 private:
  int scale_steps_ = 0;
  Index channels_ = 0;
  std::vector<ConvTranspose2x2> up_;
  std::vector<Conv2d> down_;
  Conv2d match_;
  Conv2d attention_;
};

}  // namespace grunet

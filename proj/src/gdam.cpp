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

#include "grunet/gdam.hpp"

#include <cmath>
#include <optional>

#include "grunet/error.hpp"

namespace grunet {

namespace {

// log2(size / 32) when size is 32 times a power of two (or 32 divided by one).
std::optional<int> doublings_from_seed(Index size) {
  if (size <= 0) return std::nullopt;
  int steps = 0;
  Index s = Gdam::kSeedSize;
  if (size >= s) {
    while (s < size) {
      s *= 2;
      ++steps;
    }
    return s == size ? std::optional<int>(steps) : std::nullopt;
  }
  while (s > size && s % 2 == 0) {
    s /= 2;
    --steps;
  }
  return s == size ? std::optional<int>(steps) : std::nullopt;
}

}  // namespace

GaussianParams feature_stats(const Var& x) {
  auto [mu, sigma] = ops::per_sample_mean_std(x);
  return {mu, sigma};
}

GaussianParams fuse_gaussian(const GaussianParams& features, const GaussianParams& text) {
  const Index nf = features.mu.value().size();
  const Index nt = text.mu.value().size();
  if (features.sigma.value().size() != nf || text.sigma.value().size() != nt) {
    throw ShapeError("fuse_gaussian: mu/sigma size mismatch");
  }
  if (nf != nt && nf != 1 && nt != 1) {
    throw ShapeError("fuse_gaussian: cannot broadcast " + std::to_string(nf) + " against " + std::to_string(nt));
  }
  const Index n = std::max(nf, nt);
  auto fi = [nf](Index i) { return nf == 1 ? 0 : i; };
  auto ti = [nt](Index i) { return nt == 1 ? 0 : i; };

  Tensor mu({n}), sigma({n});
  for (Index i = 0; i < n; ++i) {
    mu[i] = features.mu.value()[fi(i)] + text.mu.value()[ti(i)];
    const double sf = features.sigma.value()[fi(i)];
    const double st = text.sigma.value()[ti(i)];
    sigma[i] = std::sqrt(st * st + sf * sf);
  }
  Var mu_var = make_result(std::move(mu), {features.mu, text.mu}, [n, fi, ti](Node& self) {
    Node& f = *self.inputs[0];
    Node& t = *self.inputs[1];
    for (Index i = 0; i < n; ++i) {
      if (f.requires_grad) f.grad_buffer()[fi(i)] += self.grad[i];
      if (t.requires_grad) t.grad_buffer()[ti(i)] += self.grad[i];
    }
  });
  Var sigma_var = make_result(std::move(sigma), {features.sigma, text.sigma}, [n, fi, ti](Node& self) {
    Node& f = *self.inputs[0];
    Node& t = *self.inputs[1];
    for (Index i = 0; i < n; ++i) {
      const double s = self.value[i];
      if (s == 0.0) continue;
      if (f.requires_grad) f.grad_buffer()[fi(i)] += self.grad[i] * f.value[fi(i)] / s;
      if (t.requires_grad) t.grad_buffer()[ti(i)] += self.grad[i] * t.value[ti(i)] / s;
    }
  });
  return {mu_var, sigma_var};
}

Var sample_eta(const GaussianParams& params, Index height, Index width, Mode mode, std::mt19937_64& rng) {
  const Index b = params.mu.value().size();
  if (params.sigma.value().size() != b) throw ShapeError("sample_eta: mu/sigma size mismatch");
  for (Index i = 0; i < b; ++i) {
    if (!(params.sigma.value()[i] >= 0.0)) throw ConfigError("sample_eta: sigma must be non-negative");
  }
  const Index per = height * width;
  Tensor eps({b, height, width, 1}, 0.0);
  if (mode == Mode::kTrain) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
  }
  Tensor z({b, height, width, 1});
  for (Index i = 0; i < z.size(); ++i) z[i] = params.mu.value()[i / per] + params.sigma.value()[i / per] * eps[i];
  return make_result(std::move(z), {params.mu, params.sigma}, [per, eps = std::move(eps)](Node& self) {
    Node& mu = *self.inputs[0];
    Node& sigma = *self.inputs[1];
    for (Index i = 0; i < self.grad.size(); ++i) {
      if (mu.requires_grad) mu.grad_buffer()[i / per] += self.grad[i];
      if (sigma.requires_grad) sigma.grad_buffer()[i / per] += self.grad[i] * eps[i];
    }
  });
}

Gdam::Gdam(ParameterStore& store, const std::string& name, Index channels, Index bottleneck_height,
           Index bottleneck_width, bool broadcast, Initializer& init)
    : channels_(channels) {
  const auto sh = doublings_from_seed(bottleneck_height);
  const auto sw = doublings_from_seed(bottleneck_width);
  if (!sh || !sw || *sh != *sw) {
    throw ConfigError("GdAM cannot resample the " + std::to_string(kSeedSize) + "x" + std::to_string(kSeedSize) +
                      " seed to the " + std::to_string(bottleneck_height) + "x" + std::to_string(bottleneck_width) +
                      " bottleneck");
  }
  scale_steps_ = *sh;
  const Index hidden = std::max<Index>(1, channels / 2);
  if (scale_steps_ == 0) {
    match_ = Conv2d(store, name + ".match", 1, hidden, 1, 1, 0, init);
  }
  for (int k = 0; k < std::abs(scale_steps_); ++k) {
    const Index in = k == 0 ? 1 : hidden;
    const std::string stage = name + ".resample" + std::to_string(k);
    if (scale_steps_ > 0) {
      up_.emplace_back(store, stage, in, hidden, init);
    } else {
      down_.emplace_back(store, stage, in, hidden, 2, 2, 0, init);
    }
  }
  attention_ = Conv2d(store, name + ".attention", hidden, broadcast ? 1 : channels, 3, 1, 1, init);
}

Gdam::Output Gdam::operator()(const Var& bottleneck, const Var& text_projected, const ForwardContext& ctx) const {
  if (bottleneck.value().rank() != 4 || bottleneck.shape()[3] != channels_) {
    throw ShapeError("GdAM expects (B, H, W, " + std::to_string(channels_) + ") features, got " +
                     to_string(bottleneck.shape()));
  }
  const GaussianParams stats_f = feature_stats(bottleneck);
  const GaussianParams stats_t = feature_stats(text_projected);
  const GaussianParams fused = fuse_gaussian(stats_f, stats_t);

  std::mt19937_64 rng(ctx.noise_seed);
  Var z = sample_eta(fused, kSeedSize, kSeedSize, ctx.mode, rng);
  if (scale_steps_ == 0) z = ops::relu(match_(z));
  for (const auto& up : up_) z = ops::relu(up(z));
  for (const auto& down : down_) z = ops::relu(down(z));
  Var attention = ops::sigmoid(attention_(z));
  if (attention.shape()[1] != bottleneck.shape()[1] || attention.shape()[2] != bottleneck.shape()[2]) {
    throw ShapeError("GdAM attention " + to_string(attention.shape()) + " does not cover bottleneck " +
                     to_string(bottleneck.shape()));
  }
  return {ops::multiply(attention, bottleneck), attention, fused};
}

}  // namespace grunet

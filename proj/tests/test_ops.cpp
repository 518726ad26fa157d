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

#include <gtest/gtest.h>

#include <functional>

#include "grunet/error.hpp"
#include "grunet/ops.hpp"
#include "support.hpp"

using namespace grunet;
using namespace grunet::testing;

namespace {

// Checks d(sum(w * f(inputs)))/d(input) for every input against central differences.
void expect_gradients(std::vector<Var> inputs, const std::function<Var(const std::vector<Var>&)>& f,
                      std::uint64_t seed = 99) {
  const Var probe = f(inputs);
  const Tensor w = random_tensor(probe.shape(), seed);
  backward(weighted_sum(probe, w));
  const auto loss = [&] {
    NoGradGuard guard;
    const Var y = f(inputs);
    double s = 0.0;
    for (Index i = 0; i < w.size(); ++i) s += w[i] * y.value()[i];
    return s;
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    GradCheckResult r;
    check_gradient(inputs[k], loss, "input" + std::to_string(k), r, 1e-6, 1e-6, 1e-8, 1e-6);
    EXPECT_EQ(r.failures, 0) << "input " << k << ": " << r.worst;
  }
}

Var param(Shape s, std::uint64_t seed) { return Var(random_tensor(std::move(s), seed), true); }

Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const Index B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const Index K = w.dim(0), O = w.dim(3);
  const Index Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  Tensor y({B, Ho, Wo, O});
  for (Index n = 0; n < B; ++n)
    for (Index i = 0; i < Ho; ++i)
      for (Index j = 0; j < Wo; ++j)
        for (Index o = 0; o < O; ++o) {
          double s = b[o];
          for (Index ki = 0; ki < K; ++ki)
            for (Index kj = 0; kj < K; ++kj) {
              const Index yi = i * stride + ki - pad, xj = j * stride + kj - pad;
              if (yi < 0 || yi >= H || xj < 0 || xj >= W) continue;
              for (Index c = 0; c < C; ++c) s += x.at(n, yi, xj, c) * w[((ki * K + kj) * C + c) * O + o];
            }
          y.at(n, i, j, o) = s;
        }
  return y;
}

}  // namespace

TEST(Conv2d, MatchesLoopOracle) {
  for (auto [k, stride, pad] : {std::tuple{3, 1, 1}, std::tuple{1, 1, 0}, std::tuple{2, 2, 0}, std::tuple{3, 2, 1}}) {
    const Tensor x = random_tensor({2, 6, 6, 3}, 1);
    const Tensor w = random_tensor({k, k, 3, 5}, 2);
    const Tensor b = random_tensor({5}, 3);
    const Var y = ops::conv2d(Var(x), Var(w), Var(b), stride, pad);
    EXPECT_LT(max_abs_diff(y.value(), naive_conv(x, w, b, stride, pad)), 1e-12) << "kernel " << k;
  }
}

TEST(Conv2d, Gradients) {
  expect_gradients({param({2, 5, 5, 3}, 1), param({3, 3, 3, 4}, 2), param({4}, 3)},
                   [](const auto& v) { return ops::conv2d(v[0], v[1], v[2], 1, 1); });
  expect_gradients({param({1, 6, 6, 2}, 4), param({2, 2, 2, 3}, 5), param({3}, 6)},
                   [](const auto& v) { return ops::conv2d(v[0], v[1], v[2], 2, 0); });
  expect_gradients({param({2, 3, 3, 4}, 7), param({1, 1, 4, 2}, 8), param({2}, 9)},
                   [](const auto& v) { return ops::conv2d(v[0], v[1], v[2], 1, 0); });
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  EXPECT_THROW(ops::conv2d(Var(Tensor({1, 4, 4, 3})), Var(Tensor({3, 3, 2, 1})), Var(Tensor({1})), 1, 1), ShapeError);
}

TEST(ConvTranspose, DoublesSpatialSizeAndMatchesOracle) {
  const Tensor x = random_tensor({1, 2, 3, 2}, 1);
  const Tensor w = random_tensor({2, 2, 2, 3}, 2);
  const Tensor b = random_tensor({3}, 3);
  const Var y = ops::conv_transpose2x2(Var(x), Var(w), Var(b));
  ASSERT_EQ(y.shape(), (Shape{1, 4, 6, 3}));
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 6; ++j)
      for (Index o = 0; o < 3; ++o) {
        double s = b[o];
        for (Index c = 0; c < 2; ++c) s += x.at(0, i / 2, j / 2, c) * w[((c * 2 + i % 2) * 2 + j % 2) * 3 + o];
        EXPECT_NEAR(y.value().at(0, i, j, o), s, 1e-12);
      }
}

TEST(ConvTranspose, Gradients) {
  expect_gradients({param({2, 3, 3, 2}, 1), param({2, 2, 2, 3}, 2), param({3}, 3)},
                   [](const auto& v) { return ops::conv_transpose2x2(v[0], v[1], v[2]); });
}

TEST(MaxPool, ValuesAndGradient) {
  Tensor x({1, 2, 2, 1}, std::vector<double>{1, 4, 3, 2});
  const Var y = ops::max_pool2x2(Var(x));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value()[0], 4.0);
  expect_gradients({param({2, 4, 6, 3}, 5)}, [](const auto& v) { return ops::max_pool2x2(v[0]); });
  EXPECT_THROW(ops::max_pool2x2(Var(Tensor({1, 3, 4, 1}))), ShapeError);
}

TEST(BatchNorm, TrainingNormalisesEachChannel) {
  const Tensor x = random_tensor({3, 4, 4, 2}, 1, -3.0, 5.0);
  Tensor rm({2}, 0.0), rv({2}, 1.0);
  const Var y = ops::batch_norm(Var(x), Var(Tensor({2}, 1.0)), Var(Tensor({2}, 0.0)), rm, rv, {});
  for (Index c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    const Index n = y.value().size() / 2;
    for (Index i = c; i < y.value().size(); i += 2) m += y.value()[i] / n;
    for (Index i = c; i < y.value().size(); i += 2) v += (y.value()[i] - m) * (y.value()[i] - m) / n;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
  EXPECT_EQ(rm[0], 0.0);  // buffers untouched unless asked
}

TEST(BatchNorm, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  Tensor x({1, 1, 4, 1}, std::vector<double>{1, 2, 3, 6});
  Tensor rm({1}, 0.0), rv({1}, 1.0);
  ops::BatchNormOptions o;
  o.update_running_stats = true;
  ops::batch_norm(Var(x), Var(Tensor({1}, 1.0)), Var(Tensor({1}, 0.0)), rm, rv, o);
  EXPECT_NEAR(rm[0], 0.1 * 3.0, 1e-15);
  EXPECT_NEAR(rv[0], 0.9 + 0.1 * (14.0 / 3.0), 1e-15);
}

TEST(BatchNorm, InferenceUsesRunningStatistics) {
  Tensor x({1, 1, 2, 1}, std::vector<double>{1, 3});
  Tensor rm({1}, 1.0), rv({1}, 4.0);
  ops::BatchNormOptions o;
  o.training = false;
  o.eps = 0.0;
  const Var y = ops::batch_norm(Var(x), Var(Tensor({1}, 2.0)), Var(Tensor({1}, 0.5)), rm, rv, o);
  EXPECT_NEAR(y.value()[0], 0.5, 1e-15);
  EXPECT_NEAR(y.value()[1], 2.5, 1e-15);
}

TEST(BatchNorm, Gradients) {
  Tensor rm({3}, 0.0), rv({3}, 1.0);
  expect_gradients({param({2, 3, 3, 3}, 1), param({3}, 2), param({3}, 3)},
                   [&](const auto& v) { return ops::batch_norm(v[0], v[1], v[2], rm, rv, {}); });
}

TEST(Elementwise, Gradients) {
  expect_gradients({param({2, 3, 3, 2}, 1)}, [](const auto& v) { return ops::relu(v[0]); });
  expect_gradients({param({2, 3, 3, 2}, 2)}, [](const auto& v) { return ops::sigmoid(v[0]); });
  expect_gradients({param({2, 3, 3, 2}, 3), param({2, 3, 3, 2}, 4)},
                   [](const auto& v) { return ops::add(v[0], v[1]); });
  expect_gradients({param({2, 3, 3, 2}, 5), param({2, 3, 3, 2}, 6)},
                   [](const auto& v) { return ops::multiply(v[0], v[1]); });
  expect_gradients({param({2, 3, 3, 1}, 7), param({2, 3, 3, 4}, 8)},
                   [](const auto& v) { return ops::multiply(v[0], v[1]); });
  expect_gradients({param({3, 2, 2, 2}, 9), param({3}, 10)},
                   [](const auto& v) { return ops::scale_per_sample(v[0], v[1]); });
}

TEST(Elementwise, SigmoidStaysInsideOpenInterval) {
  const Var s = ops::sigmoid(Var(Tensor({5}, std::vector<double>{0.0, 40.0, -800.0, 1e300, -1e300})));
  EXPECT_EQ(s.value()[0], 0.5);
  for (double v : s.value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Concat, OrderAndGradients) {
  const Var y = ops::concat_channels({Var(Tensor({1, 1, 1, 2}, 1.0)), Var(Tensor({1, 1, 1, 1}, 2.0))});
  EXPECT_EQ(y.value().values()[2], 2.0);
  expect_gradients({param({2, 3, 3, 2}, 1), param({2, 3, 3, 3}, 2), param({2, 3, 3, 1}, 3)},
                   [](const auto& v) { return ops::concat_channels(v); });
  EXPECT_THROW(ops::concat_channels({Var(Tensor({1, 2, 2, 1})), Var(Tensor({1, 3, 2, 1}))}), ShapeError);
}

TEST(Pooling, GlobalAverageMatchesLoop) {
  const Tensor x = random_tensor({2, 4, 4, 3}, 3);
  const Var y = ops::global_avg_pool(Var(x));
  for (Index b = 0; b < 2; ++b)
    for (Index c = 0; c < 3; ++c) {
      double s = 0.0;
      for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) s += x.at(b, i, j, c);
      EXPECT_EQ(y.value()[b * 3 + c], s / 16.0);
    }
  expect_gradients({param({2, 3, 4, 3}, 1)}, [](const auto& v) { return ops::global_avg_pool(v[0]); });
}

TEST(Dense, Gradients) {
  expect_gradients({param({3, 5}, 1), param({5, 2}, 2), param({2}, 3)},
                   [](const auto& v) { return ops::dense(v[0], v[1], v[2]); });
  expect_gradients({param({2, 3, 2}, 4)}, [](const auto& v) { return ops::reshape(v[0], {3, 4}); });
}

TEST(MeanStd, ValuesAndGradients) {
  const auto [m, s] = ops::per_sample_mean_std(Var(Tensor({1, 2}, std::vector<double>{1, 3})));
  EXPECT_EQ(m.value()[0], 2.0);
  EXPECT_EQ(s.value()[0], 1.0);
  expect_gradients({param({2, 3, 3, 2}, 1)}, [](const auto& v) { return ops::per_sample_mean_std(v[0]).first; });
  expect_gradients({param({2, 3, 3, 2}, 2)}, [](const auto& v) { return ops::per_sample_mean_std(v[0]).second; });
}

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

#include <cmath>

#include "grunet/cdrb.hpp"
#include "grunet/error.hpp"
#include "support.hpp"

using namespace grunet;
using namespace grunet::testing;

namespace {

const ForwardContext kTrain{Mode::kTrain, 0, false};

void zero_all(ParameterStore& s) {
  for (const auto& e : s.entries()) {
    if (e.name.ends_with(".weight") || e.name.ends_with(".bias")) {
      Var v = e.var;
      v.mutable_value().fill(0.0);
    }
  }
}

void set_controller_bias(Cdrb& c, double bias) {
  c.controller()->output().weight().mutable_value().fill(0.0);
  c.controller()->output().bias().mutable_value().fill(bias);
}

}  // namespace

TEST(ResPath, PreservesShape) {
  ParameterStore s;
  Initializer init(1);
  ResPath p(s, "p", 8, 2, true, init);
  EXPECT_EQ(p(Var(random_tensor({1, 32, 32, 8}, 1)), kTrain).shape(), (Shape{1, 32, 32, 8}));
}

TEST(ResPath, ZeroWeightsGiveIdentity) {
  for (bool dense : {false, true}) {
    ParameterStore s;
    Initializer init(1);
    ResPath p(s, "p", 4, 3, dense, init);
    zero_all(s);
    const Tensor f = random_tensor({2, 6, 6, 4}, 2);
    EXPECT_EQ(p(Var(f), kTrain).value(), f);
  }
}

TEST(ResPath, DenseChangesTheOutput) {
  const Tensor f = random_tensor({1, 8, 8, 4}, 3);
  ParameterStore s1, s2;
  Initializer i1(9), i2(9);
  ResPath plain(s1, "p", 4, 2, false, i1);
  ResPath dense(s2, "p", 4, 2, true, i2);
  EXPECT_GT(max_abs_diff(plain(Var(f), kTrain).value(), dense(Var(f), kTrain).value()), 1e-6);
}

TEST(ResPath, NeedsABlock) {
  ParameterStore s;
  Initializer init(1);
  EXPECT_THROW(ResPath(s, "p", 4, 0, true, init), ConfigError);
}

TEST(Gap, Examples) {
  EXPECT_EQ(gap(Var(Tensor({1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4}))).value()[0], 2.5);
  const Var k = gap(Var(Tensor({2, 3, 3, 2}, 1.75)));
  for (double v : k.value().values()) EXPECT_EQ(v, 1.75);
}

TEST(Controller, SigmoidOfBias) {
  ParameterStore s;
  Initializer init(4);
  Cdrb c(s, "c", 6, 1, true, true, init);
  const Var fp(random_tensor({3, 6}, 5));
  const auto lambda = [&](double bias) {
    set_controller_bias(c, bias);
    return (*c.controller())(fp).value();
  };
  const Tensor half = lambda(0.0), open = lambda(20.0), shut = lambda(-20.0);
  for (double v : half.values()) EXPECT_EQ(v, 0.5);
  for (double v : open.values()) EXPECT_NEAR(v, 1.0, 1e-8);
  for (double v : shut.values()) EXPECT_NEAR(v, 0.0, 1e-8);
  EXPECT_EQ((*c.controller())(fp).shape(), (Shape{3, 1}));
}

TEST(Cdrb, SaturatedControllerPassesOrBlocks) {
  ParameterStore s;
  Initializer init(6);
  Cdrb c(s, "c", 4, 2, true, true, init);
  const Tensor f = random_tensor({2, 8, 8, 4}, 7);
  set_controller_bias(c, 20.0);
  const CdrbOutput open = c(Var(f), kTrain);
  const Tensor path = c.path()(Var(f), kTrain).value();
  EXPECT_LT(max_abs_diff(open.skip.value(), path), 1e-6);
  set_controller_bias(c, -20.0);
  const CdrbOutput shut = c(Var(f), kTrain);
  EXPECT_LT(max_abs_diff(shut.skip.value(), Tensor(path.shape(), 0.0)), 1e-6);
}

TEST(Cdrb, LambdaScalesExactly) {
  const Tensor f = random_tensor({2, 3, 3, 4}, 8);
  const Var out = apply_lambda(Var(f), Var(Tensor({2, 1}, 0.25)));
  for (Index i = 0; i < f.size(); ++i) EXPECT_EQ(out.value()[i], 0.25 * f[i]);
}

TEST(Cdrb, ScalingIsLinearAtFixedLambda) {
  const Tensor f = random_tensor({2, 3, 3, 4}, 9);
  Tensor f3 = f;
  for (double& v : f3.values()) v *= 3.0;
  const Var lambda(Tensor({2, 1}, std::vector<double>{0.3, 0.8}));
  const Tensor a = apply_lambda(Var(f3), lambda).value();
  const Tensor b = apply_lambda(Var(f), lambda).value();
  for (Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], 3.0 * b[i], 1e-12);
}

TEST(Cdrb, WithoutControllerSkipIsPathOutput) {
  ParameterStore s;
  Initializer init(10);
  Cdrb c(s, "c", 4, 2, true, false, init);
  const Tensor f = random_tensor({1, 4, 4, 4}, 11);
  const CdrbOutput out = c(Var(f), kTrain);
  EXPECT_FALSE(out.lambda.defined());
  EXPECT_EQ(out.skip.value(), c.path()(Var(f), kTrain).value());
}

TEST(Cdrb, LambdaStaysInsideUnitIntervalUnderFuzzing) {
  ParameterStore s;
  Initializer init(12);
  Cdrb c(s, "c", 8, 1, true, true, init);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> scale(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor fp = random_tensor({50, 8}, 100 + trial);
    const double k = std::pow(10.0, scale(rng) / 2.5);
    for (double& v : fp.values()) v *= k;
    const Tensor lambda = (*c.controller())(Var(fp)).value();
    for (double l : lambda.values()) {
      EXPECT_GT(l, 0.0);
      EXPECT_LT(l, 1.0);
    }
  }
}

TEST(Cdrb, BatchPermutationPermutesOutputs) {
  ParameterStore s;
  Initializer init(14);
  Cdrb c(s, "c", 4, 2, true, true, init);
  const ForwardContext infer;
  const Tensor f = random_tensor({2, 4, 4, 4}, 15);
  Tensor swapped(f.shape());
  const Index per = f.size() / 2;
  for (Index i = 0; i < per; ++i) {
    swapped[i] = f[per + i];
    swapped[per + i] = f[i];
  }
  const CdrbOutput a = c(Var(f), infer);
  const CdrbOutput b = c(Var(swapped), infer);
  EXPECT_EQ(a.lambda.value()[0], b.lambda.value()[1]);
  EXPECT_EQ(a.lambda.value()[1], b.lambda.value()[0]);
  for (Index i = 0; i < per; ++i) EXPECT_EQ(a.skip.value()[i], b.skip.value()[per + i]);
}

TEST(Cdrb, LambdaGradientMatchesFiniteDifferences) {
  ParameterStore s;
  Initializer init(16);
  Cdrb c(s, "c", 6, 2, true, true, init);
  const Tensor f = random_tensor({3, 4, 4, 6}, 17);
  const Tensor w = random_tensor({3, 1}, 18);
  backward(weighted_sum(c(Var(f), kTrain).lambda, w));
  const auto loss = [&] {
    NoGradGuard g;
    const Tensor l = c(Var(f), kTrain).lambda.value();
    double sum = 0.0;
    for (Index i = 0; i < 3; ++i) sum += w[i] * l[i];
    return sum;
  };
  GradCheckResult r;
  check_gradient(c.controller()->hidden().weight(), loss, "hidden.weight", r);
  check_gradient(c.controller()->hidden().bias(), loss, "hidden.bias", r);
  check_gradient(c.controller()->output().weight(), loss, "out.weight", r);
  check_gradient(c.controller()->output().bias(), loss, "out.bias", r);
  EXPECT_EQ(r.failures, 0) << r.worst;
}

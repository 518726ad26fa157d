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

#include "grunet/error.hpp"
#include "grunet/layers.hpp"
#include "support.hpp"

using namespace grunet;

TEST(Initializer, HeUniformBoundsAndDeterminism) {
  Initializer a(5), b(5), c(6);
  const Tensor ta = a.he_uniform({3, 3, 4, 8}, 36);
  EXPECT_EQ(ta, b.he_uniform({3, 3, 4, 8}, 36));
  EXPECT_NE(ta, c.he_uniform({3, 3, 4, 8}, 36));
  const double bound = std::sqrt(6.0 / 36.0);
  for (double v : ta.values()) EXPECT_LE(std::abs(v), bound);
}

TEST(ParameterStore, NamesAreUniqueAndOrdered) {
  ParameterStore s;
  Initializer init(0);
  Conv2d conv(s, "c", 2, 3, 3, 1, 1, init);
  BatchNorm bn(s, "bn", 3);
  ASSERT_EQ(s.entries().size(), 6u);
  EXPECT_EQ(s.entries()[0].name, "c.weight");
  EXPECT_EQ(s.entries()[1].name, "c.bias");
  EXPECT_EQ(s.entries()[4].name, "bn.running_mean");
  EXPECT_FALSE(s.entries()[4].trainable);
  EXPECT_EQ(s.trainable().size(), 4u);
  EXPECT_EQ(s.trainable_count(), 3 * 3 * 2 * 3 + 3 + 3 + 3);
  EXPECT_THROW(Conv2d(s, "c", 2, 3, 3, 1, 1, init), ConfigError);
}

TEST(ParameterStore, BiasesStartAtZeroAndNormIsIdentity) {
  ParameterStore s;
  Initializer init(1);
  Dense d(s, "d", 4, 2, init);
  BatchNorm bn(s, "bn", 2);
  EXPECT_EQ(s.find("d.bias")->var.value(), Tensor({2}, 0.0));
  EXPECT_EQ(s.find("bn.gamma")->var.value(), Tensor({2}, 1.0));
  EXPECT_EQ(s.find("bn.running_var")->var.value(), Tensor({2}, 1.0));
}

TEST(BatchNormLayer, RunningStatisticsFollowContext) {
  ParameterStore s;
  BatchNorm bn(s, "bn", 1);
  const Var x(Tensor({1, 1, 2, 1}, std::vector<double>{2, 4}));
  bn(x, ForwardContext{Mode::kTrain, 0, false});
  EXPECT_EQ(s.find("bn.running_mean")->var.value()[0], 0.0);
  bn(x, ForwardContext{Mode::kTrain, 0, true});
  EXPECT_NEAR(s.find("bn.running_mean")->var.value()[0], 0.3, 1e-15);
  bn(x, ForwardContext{Mode::kInfer, 0, true});
  EXPECT_NEAR(s.find("bn.running_mean")->var.value()[0], 0.3, 1e-15);
}

TEST(ParameterStore, ZeroGradClearsEveryParameter) {
  ParameterStore s;
  Initializer init(2);
  Dense d(s, "d", 3, 1, init);
  Var x(Tensor({1, 3}, 1.0));
  backward(grunet::testing::weighted_sum(d(x), Tensor({1, 1}, 1.0)));
  EXPECT_FALSE(d.weight().grad().empty());
  s.zero_grad();
  EXPECT_TRUE(d.weight().grad().empty());
}

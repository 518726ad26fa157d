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
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "grunet/autograd.hpp"

namespace grunet {

inline constexpr double kBceClip = 1e-7;

/// Soft Dice loss 1 - 2TP / (2TP + FP + FN) with TP = sum(p*y), FP = sum(p*(1-y)),
/// FN = sum((1-p)*y). An all-zero prediction against an all-zero mask has loss 0.
Var dice_loss(const Var& pred, const Tensor& truth);

/// Mean binary cross-entropy with predictions clipped to [1e-7, 1 - 1e-7].
Var bce_loss(const Var& pred, const Tensor& truth);

/// BCE + Dice, unweighted.
Var hybrid_loss(const Var& pred, const Tensor& truth);

double dice_loss(const Tensor& pred, const Tensor& truth);
double bce_loss(const Tensor& pred, const Tensor& truth);
double hybrid_loss(const Tensor& pred, const Tensor& truth);

struct ConfusionCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Both inputs must hold only 0 and 1 and share a shape.
ConfusionCounts confusion(const Tensor& pred_binary, const Tensor& truth);

/// p > threshold -> 1, else 0.
Tensor threshold(const Tensor& probabilities, double cutoff = 0.5);

struct MetricsReport {
  double dice = 0.0, iou = 0.0, precision = 0.0, recall = 0.0;
  ConfusionCounts counts;
};

/// Hard metrics. A zero denominator yields 1 when there was nothing to find and nothing was
/// predicted, 0 otherwise.
MetricsReport metrics(const ConfusionCounts& counts);

void to_json(nlohmann::json& j, const MetricsReport& m);
std::string metrics_csv_header();
/// One CSV row: split, dice, iou, precision, recall, tp, tn, fp, fn.
std::string metrics_csv_row(const std::string& split, const MetricsReport& m);

}  // namespace grunet

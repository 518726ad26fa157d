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

#include "grunet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "grunet/error.hpp"
#include "grunet/ops.hpp"

namespace grunet {

namespace {

void require_match(const Tensor& pred, const Tensor& truth, const char* what) {
  if (pred.size() != truth.size() || pred.shape() != truth.shape()) {
    // A trailing singleton channel on either side is tolerated.
    Shape a = pred.shape(), b = truth.shape();
    if (!a.empty() && a.back() == 1) a.pop_back();
    if (!b.empty() && b.back() == 1) b.pop_back();
    if (a != b) {
      throw ShapeError(std::string(what) + ": prediction " + to_string(pred.shape()) + " vs truth " +
                       to_string(truth.shape()));
    }
  }
}

}  // namespace

Var dice_loss(const Var& pred, const Tensor& truth) {
  require_match(pred.value(), truth, "dice_loss");
  const Tensor& p = pred.value();
  double tp = 0.0, sum_p = 0.0, sum_y = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    tp += p[i] * truth[i];
    sum_p += p[i];
    sum_y += truth[i];
  }
  // 2TP + FP + FN == sum(p) + sum(y). Empty prediction against empty truth scores a loss of 0.
  const double num = 2.0 * tp;
  const double den = sum_p + sum_y;
  const double loss = den > 0.0 ? 1.0 - num / den : 0.0;
  return make_result(Tensor::scalar(loss), {pred}, [num, den, truth](Node& self) {
    if (!(den > 0.0)) return;
    Node& pn = *self.inputs[0];
    double* dp = pn.grad_buffer().data();
    const double g = self.grad[0];
    for (Index i = 0; i < pn.value.size(); ++i) dp[i] -= g * (2.0 * truth[i] * den - num) / (den * den);
  });
}

Var bce_loss(const Var& pred, const Tensor& truth) {
  require_match(pred.value(), truth, "bce_loss");
  const Tensor& p = pred.value();
  const Index n = p.size();
  if (n == 0) throw ShapeError("bce_loss: empty input");
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double q = std::clamp(p[i], kBceClip, 1.0 - kBceClip);
    acc += truth[i] * std::log(q) + (1.0 - truth[i]) * std::log(1.0 - q);
  }
  return make_result(Tensor::scalar(-acc / static_cast<double>(n)), {pred}, [n, truth](Node& self) {
    Node& pn = *self.inputs[0];
    double* dp = pn.grad_buffer().data();
    const double g = self.grad[0] / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) {
      const double q = pn.value[i];
      if (q < kBceClip || q > 1.0 - kBceClip) continue;  // clipped: flat
      dp[i] -= g * (truth[i] / q - (1.0 - truth[i]) / (1.0 - q));
    }
  });
}

Var hybrid_loss(const Var& pred, const Tensor& truth) { return ops::add(bce_loss(pred, truth), dice_loss(pred, truth)); }

double dice_loss(const Tensor& pred, const Tensor& truth) { return dice_loss(Var(pred), truth).value()[0]; }
double bce_loss(const Tensor& pred, const Tensor& truth) { return bce_loss(Var(pred), truth).value()[0]; }
double hybrid_loss(const Tensor& pred, const Tensor& truth) { return hybrid_loss(Var(pred), truth).value()[0]; }

ConfusionCounts confusion(const Tensor& pred_binary, const Tensor& truth) {
  require_match(pred_binary, truth, "confusion");
  ConfusionCounts c;
  for (Index i = 0; i < truth.size(); ++i) {
    const double p = pred_binary[i], y = truth[i];
    if ((p != 0.0 && p != 1.0) || (y != 0.0 && y != 1.0)) {
      throw ConfigError("confusion needs binary masks; threshold predictions first");
    }
    const int code = (p == 1.0 ? 2 : 0) + (y == 1.0 ? 1 : 0);
    switch (code) {
      case 3:
        ++c.tp;
        break;
      case 2:
        ++c.fp;
        break;
      case 1:
        ++c.fn;
        break;
      default:
        ++c.tn;
    }
  }
  return c;
}

Tensor threshold(const Tensor& probabilities, double cutoff) {
  Tensor out(probabilities.shape());
  for (Index i = 0; i < out.size(); ++i) out[i] = probabilities[i] > cutoff ? 1.0 : 0.0;
  return out;
}

MetricsReport metrics(const ConfusionCounts& c) {
  const auto ratio = [](double num, double den, bool empty_ok) { return den > 0.0 ? num / den : (empty_ok ? 1.0 : 0.0); };
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  MetricsReport m;
  m.counts = c;
  m.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn, true);
  m.iou = ratio(tp, tp + fp + fn, true);
  m.precision = ratio(tp, tp + fp, c.fn == 0);
  m.recall = ratio(tp, tp + fn, c.fp == 0);
  return m;
}

void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = nlohmann::json{{"dice", m.dice},
                     {"iou", m.iou},
                     {"precision", m.precision},
                     {"recall", m.recall},
                     {"tp", m.counts.tp},
                     {"tn", m.counts.tn},
                     {"fp", m.counts.fp},
                     {"fn", m.counts.fn}};
}

std::string metrics_csv_header() { return "split,dice,iou,precision,recall,tp,tn,fp,fn"; }

std::string metrics_csv_row(const std::string& split, const MetricsReport& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld", m.dice, m.iou, m.precision,
                m.recall, static_cast<long long>(m.counts.tp), static_cast<long long>(m.counts.tn),
                static_cast<long long>(m.counts.fp), static_cast<long long>(m.counts.fn));
  return split + buf;
}

}  // namespace grunet

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

#include "grunet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "grunet/checkpoint.hpp"
#include "grunet/error.hpp"

namespace fs = std::filesystem;

namespace grunet {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct ReferenceRow {
  double dice, recall, precision, iou;
};

// Reference MonuSeg ablation values, in percent.
constexpr ReferenceRow kReference[] = {
    {77.74, 78.79, 76.97, 63.72},
    {78.82, 85.60, 73.17, 65.10},
    {79.13, 82.18, 77.40, 66.02},
    {80.35, 84.11, 77.03, 67.21},
};

constexpr const char* kRowLabels[] = {"(i)", "(ii)", "(iii)", "(iv)"};

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Var& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& p = params_[k];
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& w = p.mutable_value();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (Index i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void to_json(nlohmann::json& j, const EvaluationReport& r) {
  j = nlohmann::json{{"mean", r.mean}, {"pooled", r.pooled}, {"samples", r.per_sample.size()}};
}

EvaluationReport evaluate_predictions(std::span<const Tensor> probabilities, std::span<const Tensor> truths) {
  if (probabilities.size() != truths.size() || probabilities.empty()) {
    throw ConfigError("evaluation needs one prediction per mask and at least one sample");
  }
  EvaluationReport r;
  ConfusionCounts pooled;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const ConfusionCounts c = confusion(threshold(probabilities[i]), truths[i]);
    pooled += c;
    r.per_sample.push_back(metrics(c));
  }
  const double n = static_cast<double>(r.per_sample.size());
  for (const auto& m : r.per_sample) {
    r.mean.dice += m.dice / n;
    r.mean.iou += m.iou / n;
    r.mean.precision += m.precision / n;
    r.mean.recall += m.recall / n;
  }
  r.mean.counts = pooled;
  r.pooled = metrics(pooled);
  return r;
}

EvaluationReport evaluate(const GruNet& model, std::span<const Sample> samples, const TextEmbeddingMatrix* text,
                          Index batch_size) {
  if (samples.empty()) throw ConfigError("no samples to evaluate");
  std::vector<Tensor> probs, truths;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    const Batch batch = make_batch(samples.subspan(start, end - start));
    const Tensor p = model.predict(batch.images, text);
    const Index per = p.size() / static_cast<Index>(end - start);
    const Index h = p.dim(1), w = p.dim(2);
    for (std::size_t i = start; i < end; ++i) {
      const auto offset = static_cast<Index>(i - start) * per;
      probs.emplace_back(Shape{h, w}, std::vector<double>(p.data() + offset, p.data() + offset + per));
      truths.push_back(samples[i].mask);
    }
  }
  return evaluate_predictions(probs, truths);
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"steps", r.steps},
                     {"train_loss", r.train_loss},
                     {"val_mean", r.val.mean},
                     {"val_pooled", r.val.pooled}};
}

std::uint64_t step_noise_seed(std::uint64_t seed, Index step) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(step)));
}

TrainingRecord train(GruNet& model, const TrainConfig& config, std::span<const Sample> train_samples,
                     std::span<const Sample> val_samples, const TextEmbeddingMatrix* text,
                     const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_samples.empty()) throw ConfigError("no training samples");
  std::ofstream jsonl;
  if (!config.checkpoint_dir.empty()) {
    fs::create_directories(config.checkpoint_dir);
    jsonl.open(config.checkpoint_dir / "training_record.jsonl", std::ios::trunc);
    if (!jsonl) throw DataError("cannot write training record under " + config.checkpoint_dir.string());
  }

  Adam adam(model.parameters().trainable(), config.lr, config.beta1, config.beta2, config.adam_eps);
  TrainingRecord record;
  std::vector<std::size_t> order(train_samples.size());
  Index step = 0;
  bool capped = false;
  for (int epoch = 1; epoch <= config.epochs && !capped; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(splitmix64(config.seed) ^ static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    Index epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      if (config.max_steps > 0 && step >= config.max_steps) {
        capped = true;
        break;
      }
      std::vector<const Sample*> members;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size)); ++i) {
        members.push_back(&train_samples[order[i]]);
      }
      const Batch batch = make_batch(members);
      ForwardContext ctx{Mode::kTrain, step_noise_seed(config.seed, step), true};
      model.parameters().zero_grad();
      Var loss = hybrid_loss(model.forward(Var(batch.images), text, ctx), batch.masks);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      }
      backward(loss);
      adam.step();
      loss_sum += value;
      ++epoch_steps;
      ++step;
    }
    if (epoch_steps == 0) break;

    EpochRecord er;
    er.epoch = epoch;
    er.steps = step;
    er.train_loss = loss_sum / static_cast<double>(epoch_steps);
    if (!val_samples.empty()) er.val = evaluate(model, val_samples, text, config.batch_size);
    record.epochs.push_back(er);

    const bool improved = !val_samples.empty() && er.val.mean.dice > record.best_val_dice;
    if (improved) {
      record.best_val_dice = er.val.mean.dice;
      record.best_epoch = epoch;
    }
    if (jsonl.is_open()) {
      jsonl << nlohmann::json(er).dump() << '\n';
      jsonl.flush();
      const nlohmann::json extra{{"epoch", epoch}, {"steps", step}, {"train_seed", config.seed}};
      if (improved) save_checkpoint(config.checkpoint_dir / "best.ckpt", model, text, extra);
      save_checkpoint(config.checkpoint_dir / "last.ckpt", model, text, extra);
    }
    if (on_epoch) on_epoch(er);
  }
  return record;
}

std::vector<AblationRow> ablate(const ModelConfig& base, const TrainConfig& train_config, const DatasetSplit& data,
                                const TextEmbeddingMatrix* text, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  const bool use_test = !data.test.empty();
  const std::vector<Sample>& eval_set = use_test ? data.test : data.val;
  if (eval_set.empty()) throw ConfigError("ablation needs a non-empty test or validation split");

  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < std::size(kAllVariants); ++v) {
    const Variant variant = kAllVariants[v];
    AblationRow row{variant, kRowLabels[v], {}, use_test ? "test-split" : "val-split"};
    const double n = static_cast<double>(seeds.size());
    for (const std::uint64_t seed : seeds) {
      ModelConfig mc = base;
      mc.variant = variant;
      mc.seed = seed;
      if (variant == Variant::kFull && text) mc.text_dim = text->dim();
      TrainConfig tc = train_config;
      tc.seed = seed;
      if (!tc.checkpoint_dir.empty()) {
        tc.checkpoint_dir = train_config.checkpoint_dir / (to_string(variant) + "_seed" + std::to_string(seed));
      }
      GruNet model(mc);
      const TextEmbeddingMatrix* t = variant == Variant::kFull ? text : nullptr;
      train(model, tc, data.train, data.val, t);
      const EvaluationReport r = evaluate(model, eval_set, t, train_config.batch_size);
      row.report.mean.dice += r.mean.dice / n;
      row.report.mean.iou += r.mean.iou / n;
      row.report.mean.precision += r.mean.precision / n;
      row.report.mean.recall += r.mean.recall / n;
      row.report.pooled.counts += r.pooled.counts;
    }
    row.report.mean.counts = row.report.pooled.counts;
    row.report.pooled = metrics(row.report.pooled.counts);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const fs::path& path, std::span<const AblationRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ablation table " + path.string());
  out << "Model,Dice,Recall,Precision,IoU,variant,protocol,reported_Dice,reported_Recall,reported_Precision,"
         "reported_IoU\n";
  for (const auto& row : rows) {
    const auto idx = static_cast<std::size_t>(row.variant);
    const ReferenceRow& ref = kReference[idx];
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%s,%s,%.2f,%.2f,%.2f,%.2f\n", row.label.c_str(),
                  100.0 * row.report.mean.dice, 100.0 * row.report.mean.recall, 100.0 * row.report.mean.precision,
                  100.0 * row.report.mean.iou, to_string(row.variant).c_str(), row.protocol.c_str(), ref.dice,
                  ref.recall, ref.precision, ref.iou);
    out << buf;
  }
  if (!out) throw DataError("failed writing ablation table " + path.string());
}

}  // namespace grunet

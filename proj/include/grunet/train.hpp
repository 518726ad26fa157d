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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "grunet/backbone.hpp"
#include "grunet/data.hpp"
#include "grunet/losses.hpp"

namespace grunet {

struct TrainConfig {
  double lr = 1e-4;
  Index batch_size = 2;
  int epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Stop after this many optimizer steps (0: no cap).
  Index max_steps = 0;
  /// When set, receives training_record.jsonl, best.ckpt and last.ckpt.
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

class Adam {
 public:
  Adam(std::vector<Var> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Applies one update from the accumulated gradients; parameters without a gradient are skipped.
  void step();
  Index steps() const { return t_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  Index t_ = 0;
};

struct EvaluationReport {
  MetricsReport mean;    // per-sample metrics averaged (headline)
  MetricsReport pooled;  // metrics of the summed confusion counts
  std::vector<MetricsReport> per_sample;
};

void to_json(nlohmann::json& j, const EvaluationReport& r);

/// Thresholds each probability map at 0.5 (p > 0.5 is foreground) and scores it against its mask.
EvaluationReport evaluate_predictions(std::span<const Tensor> probabilities, std::span<const Tensor> truths);

/// Inference-mode evaluation of a model over samples.
EvaluationReport evaluate(const GruNet& model, std::span<const Sample> samples, const TextEmbeddingMatrix* text,
                          Index batch_size = 2);

struct EpochRecord {
  int epoch = 0;
  Index steps = 0;
  double train_loss = 0.0;
  EvaluationReport val;
};

void to_json(nlohmann::json& j, const EpochRecord& r);

struct TrainingRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_dice = -1.0;
};

/// Seeded Adam training on the hybrid loss. Every epoch reshuffles the training samples with
/// a generator derived from (seed, epoch), then scores the validation samples; the model is
/// left holding the last-epoch weights. Throws NumericError on a non-finite loss.
TrainingRecord train(GruNet& model, const TrainConfig& config, std::span<const Sample> train_samples,
                     std::span<const Sample> val_samples, const TextEmbeddingMatrix* text,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Noise seed for the GdAM sample at a given optimizer step.
std::uint64_t step_noise_seed(std::uint64_t seed, Index step);

struct AblationRow {
  Variant variant;
  std::string label;  // "(i)" .. "(iv)"
  EvaluationReport report;
  std::string protocol;
};

/// Trains the four variants with the same seeds and recipe and scores each on the test split
/// (the validation split when the test split is empty). Metrics are averaged across seeds.
std::vector<AblationRow> ablate(const ModelConfig& base, const TrainConfig& train_config, const DatasetSplit& data,
                                const TextEmbeddingMatrix* text, std::span<const std::uint64_t> seeds);

/// Columns: Model, Dice, Recall, Precision, IoU (percent), then the variant name, the
/// evaluation protocol and the reference values for each row.
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

}  // namespace grunet

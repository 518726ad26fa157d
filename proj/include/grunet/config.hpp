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
#include <optional>
#include <string>
#include <vector>

#include "grunet/backbone.hpp"
#include "grunet/data.hpp"
#include "grunet/train.hpp"

namespace grunet {

/// Everything a CLI run needs. Loaded from a flat `key = value` file (TOML subset: `#`
/// comments, quoted strings, booleans, numbers and `[a, b]` integer lists) and then patched
/// with `--set key=value` overrides. Unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SplitSpec split;

  /// Dataset root in the `images/` + `masks/` layout; empty selects synthetic data.
  std::filesystem::path data_dir;
  bool predefined_split = false;
  Index synthetic_count = 8;
  Index synthetic_size = 64;
  std::uint64_t synthetic_seed = 0;

  /// Label list, one per line; empty selects the built-in sixteen labels.
  std::filesystem::path labels_path;
  /// "stub" (seeded hash encoder) or "file" (precomputed embeddings file).
  std::string encoder = "stub";
  std::filesystem::path embeddings_path;
  std::uint64_t encoder_seed = 0;

  std::vector<std::uint64_t> ablation_seeds{0};
  std::filesystem::path output_dir = "grunet_out";

  /// Assigns one key from its textual value. Relative paths are resolved against `base`.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base = {});
  /// Applies `key=value`.
  void apply_override(const std::string& assignment);
  /// Sets the model, training and ablation seed.
  void set_seed(std::uint64_t seed);

  /// Value invariants plus existence of every input path the run will read.
  void validate() const;

  /// Round-trippable file form of the effective configuration.
  std::string to_toml() const;

  static const std::vector<std::string>& keys();
};

/// Reads a config file; relative paths inside it are taken relative to the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

/// Parses config text on top of `into`.
void parse_run_config(const std::string& text, RunConfig& into, const std::filesystem::path& base = {},
                      const std::string& origin = "<config>");

/// Synthetic data or the dataset under data_dir, split per the config. Every image must match
/// the model input size.
DatasetSplit load_run_data(const RunConfig& config);

/// Encodes the label set for the full variant (nullopt otherwise). With a file encoder the
/// model's text_dim is set to the file's embedding width.
std::optional<TextEmbeddingMatrix> load_run_text(RunConfig& config);

}  // namespace grunet

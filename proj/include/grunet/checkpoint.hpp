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

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "grunet/backbone.hpp"

namespace grunet {

/// Archive layout (little-endian):
///   8 bytes   magic "GRUNETCK"
///   8 bytes   uint64 manifest length L
///   L bytes   UTF-8 JSON manifest: format, version, model config, array index
///             (name, kind, shape, byte offset), optional text metadata, extra
///   rest      float64 payload, arrays back to back in manifest order
/// No timestamps are stored, so identical models give identical bytes.
struct Checkpoint {
  ModelConfig config;
  std::optional<TextEmbeddingMatrix> text;
  std::vector<std::pair<std::string, Tensor>> arrays;
  nlohmann::json extra;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const GruNet& model, const TextEmbeddingMatrix* text,
                     const nlohmann::json& extra = nlohmann::json::object());

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies every model array from the checkpoint; a missing array or a shape mismatch is an
/// error naming the layer.
void load_weights(GruNet& model, const Checkpoint& checkpoint);

/// Rebuilds the model described by the checkpoint manifest and loads its weights.
std::unique_ptr<GruNet> load_model(const Checkpoint& checkpoint);

}  // namespace grunet

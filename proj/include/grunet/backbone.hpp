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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "grunet/cdrb.hpp"
#include "grunet/gdam.hpp"
#include "grunet/layers.hpp"
#include "grunet/text.hpp"

namespace grunet {

/// Ablation rows: (i) baseline MultiResUNet, (ii) + CDRB without controller,
/// (iii) + CDRB with controller, (iv) full model with GdAM.
enum class Variant { kBaseline, kCdrbNoController, kCdrb, kFull };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);
inline constexpr Variant kAllVariants[] = {Variant::kBaseline, Variant::kCdrbNoController, Variant::kCdrb,
                                           Variant::kFull};

struct ModelConfig {
  Index input_height = 512;
  Index input_width = 512;
  Index input_channels = 3;
  int depth = 4;
  Index base_width = 32;
  double alpha = 1.67;
  Variant variant = Variant::kFull;
  std::uint64_t seed = 0;
  /// Single-channel GdAM attention broadcast over channels instead of one map per channel.
  bool gdam_broadcast = false;
  /// Embedding width N of the text encoder (full variant only).
  Index text_dim = 64;
  /// Res-path blocks per encoder level; empty means depth - level (4, 3, 2, 1 at depth 4).
  std::vector<int> res_blocks;

  void validate() const;
  /// alpha * U * 2^level, for level in [0, depth] (depth is the bottleneck).
  Index level_width(int level) const;
  int res_blocks_at(int level) const;
  Index bottleneck_height() const { return input_height >> depth; }
  Index bottleneck_width() const { return input_width >> depth; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct BranchWidths {
  Index first = 0, second = 0, third = 0;
  Index total() const { return first + second + third; }
};

/// W/6, W/3, W/2 (each at least one channel).
BranchWidths default_branch_widths(Index level_width);

/// Multi-Residual Block: three chained 3x3 conv-BN-ReLU branches concatenated, plus a 1x1
/// conv-BN shortcut; output = relu(bn(concat + shortcut)).
class MultiResBlock {
 public:
  MultiResBlock() = default;
  MultiResBlock(ParameterStore& store, const std::string& name, Index in_ch, BranchWidths widths,
                Initializer& init);

  Var operator()(const Var& x, const ForwardContext& ctx) const;
  Index out_channels() const { return widths_.total(); }

 private:
  struct ConvBn {
    Conv2d conv;
    BatchNorm bn;
  };
  BranchWidths widths_;
  ConvBn branch_[3];
  ConvBn shortcut_;
  BatchNorm out_bn_;
};

/// Intermediate activations captured for visualisation.
struct ForwardTrace {
  std::vector<Tensor> encoder;  // one per level, shallow to deep
  Tensor bottleneck;
  Tensor attention;  // GdAM attention map (full variant only)
  std::vector<Tensor> decoder;  // one per level, deep to shallow
  std::vector<Tensor> lambdas;  // controller outputs, one per level
};

/// MultiResUNet encoder-decoder with CDRB skip paths and an optional GdAM bottleneck.
class GruNet {
 public:
  explicit GruNet(const ModelConfig& config);
  GruNet(const GruNet&) = delete;
  GruNet& operator=(const GruNet&) = delete;

  /// image: (B, H, W, C). `text` must be given exactly when the variant is full. Returns
  /// per-pixel foreground probabilities of shape (B, H, W, 1).
  Var forward(const Var& image, const TextEmbeddingMatrix* text, const ForwardContext& ctx,
              ForwardTrace* trace = nullptr) const;

  /// Inference-mode prediction without recording a tape.
  Tensor predict(const Tensor& images, const TextEmbeddingMatrix* text) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  std::vector<Cdrb>& skips() { return skips_; }
  Gdam* gdam() { return gdam_ ? &*gdam_ : nullptr; }
  TextProjection* text_projection() { return projection_ ? &*projection_ : nullptr; }

 private:
  ModelConfig config_;
  ParameterStore store_;
  std::vector<MultiResBlock> encoders_;
  std::vector<Cdrb> skips_;
  MultiResBlock bottleneck_;
  std::optional<TextProjection> projection_;
  std::optional<Gdam> gdam_;
  std::vector<ConvTranspose2x2> ups_;
  std::vector<MultiResBlock> decoders_;  // indexed by level
  Conv2d head_;
};

}  // namespace grunet

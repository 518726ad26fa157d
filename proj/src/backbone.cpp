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

#include "grunet/backbone.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "grunet/error.hpp"

namespace grunet {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline:
      return "baseline";
    case Variant::kCdrbNoController:
      return "cdrb_no_controller";
    case Variant::kCdrb:
      return "cdrb";
    case Variant::kFull:
      return "full";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected baseline, cdrb_no_controller, cdrb or full)");
}

void ModelConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1, got " + std::to_string(depth));
  if (depth > 16) throw ConfigError("depth " + std::to_string(depth) + " is unreasonably large");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (base_width < 1) throw ConfigError("base_width must be >= 1");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (text_dim < 1) throw ConfigError("text_dim must be >= 1");
  const Index factor = Index{1} << depth;
  if (input_height < 1 || input_width < 1 || input_height % factor != 0 || input_width % factor != 0) {
    throw ConfigError("input size " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                      " is not divisible by 2^depth = " + std::to_string(factor));
  }
  if (!res_blocks.empty() && static_cast<int>(res_blocks.size()) != depth) {
    throw ConfigError("res_blocks lists " + std::to_string(res_blocks.size()) + " levels for depth " +
                      std::to_string(depth));
  }
  for (int n : res_blocks) {
    if (n < 1) throw ConfigError("res_blocks entries must be >= 1");
  }
  for (int l = 0; l <= depth; ++l) {
    if (level_width(l) < 3) {
      throw ConfigError("level " + std::to_string(l) + " width " + std::to_string(level_width(l)) +
                        " leaves an MRB branch without channels");
    }
  }
}

Index ModelConfig::level_width(int level) const {
  return static_cast<Index>(std::floor(alpha * static_cast<double>(base_width << level)));
}

int ModelConfig::res_blocks_at(int level) const {
  return res_blocks.empty() ? depth - level : res_blocks.at(static_cast<std::size_t>(level));
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"input_height", c.input_height},
                     {"input_width", c.input_width},
                     {"input_channels", c.input_channels},
                     {"depth", c.depth},
                     {"base_width", c.base_width},
                     {"alpha", c.alpha},
                     {"variant", to_string(c.variant)},
                     {"seed", c.seed},
                     {"gdam_broadcast", c.gdam_broadcast},
                     {"text_dim", c.text_dim},
                     {"res_blocks", c.res_blocks}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("input_height").get_to(c.input_height);
  j.at("input_width").get_to(c.input_width);
  j.at("input_channels").get_to(c.input_channels);
  j.at("depth").get_to(c.depth);
  j.at("base_width").get_to(c.base_width);
  j.at("alpha").get_to(c.alpha);
  c.variant = parse_variant(j.at("variant").get<std::string>());
  j.at("seed").get_to(c.seed);
  j.at("gdam_broadcast").get_to(c.gdam_broadcast);
  j.at("text_dim").get_to(c.text_dim);
  j.at("res_blocks").get_to(c.res_blocks);
}

BranchWidths default_branch_widths(Index level_width) {
  return {std::max<Index>(1, level_width / 6), std::max<Index>(1, level_width / 3),
          std::max<Index>(1, level_width / 2)};
}

MultiResBlock::MultiResBlock(ParameterStore& store, const std::string& name, Index in_ch, BranchWidths widths,
                             Initializer& init)
    : widths_(widths) {
  if (widths.first < 1 || widths.second < 1 || widths.third < 1) {
    throw ConfigError(name + ": every MRB branch needs at least one channel");
  }
  const Index w[3] = {widths.first, widths.second, widths.third};
  Index prev = in_ch;
  for (int k = 0; k < 3; ++k) {
    const std::string branch = name + ".conv" + std::to_string(k + 1);
    branch_[k].conv = Conv2d(store, branch, prev, w[k], 3, 1, 1, init);
    branch_[k].bn = BatchNorm(store, branch + ".bn", w[k]);
    prev = w[k];
  }
  shortcut_.conv = Conv2d(store, name + ".shortcut", in_ch, widths.total(), 1, 1, 0, init);
  shortcut_.bn = BatchNorm(store, name + ".shortcut.bn", widths.total());
  out_bn_ = BatchNorm(store, name + ".out_bn", widths.total());
}

Var MultiResBlock::operator()(const Var& x, const ForwardContext& ctx) const {
  std::vector<Var> branches;
  Var h = x;
  for (const auto& b : branch_) {
    h = ops::relu(b.bn(b.conv(h), ctx));
    branches.push_back(h);
  }
  Var shortcut = shortcut_.bn(shortcut_.conv(x), ctx);
  return ops::relu(out_bn_(ops::add(ops::concat_channels(branches), shortcut), ctx));
}

GruNet::GruNet(const ModelConfig& config) : config_(config) {
  config_.validate();
  Initializer init(config_.seed);
  const Variant v = config_.variant;
  const bool dense = v != Variant::kBaseline;
  const bool controller = v == Variant::kCdrb || v == Variant::kFull;

  Index in_ch = config_.input_channels;
  std::vector<Index> enc_out;
  for (int l = 0; l < config_.depth; ++l) {
    const std::string level = "encoder" + std::to_string(l);
    encoders_.emplace_back(store_, level + ".mrb", in_ch, default_branch_widths(config_.level_width(l)), init);
    in_ch = encoders_.back().out_channels();
    enc_out.push_back(in_ch);
    skips_.emplace_back(store_, "skip" + std::to_string(l), in_ch, config_.res_blocks_at(l), dense, controller, init);
  }
  bottleneck_ = MultiResBlock(store_, "bottleneck.mrb", in_ch, default_branch_widths(config_.level_width(config_.depth)),
                              init);
  in_ch = bottleneck_.out_channels();
  if (v == Variant::kFull) {
    projection_.emplace(store_, "text.projection", config_.text_dim, init);
    gdam_.emplace(store_, "gdam", in_ch, config_.bottleneck_height(), config_.bottleneck_width(),
                  config_.gdam_broadcast, init);
  }
  ups_.resize(static_cast<std::size_t>(config_.depth));
  decoders_.resize(static_cast<std::size_t>(config_.depth));
  for (int l = config_.depth - 1; l >= 0; --l) {
    const std::string level = "decoder" + std::to_string(l);
    const Index up_ch = config_.base_width << l;
    ups_[static_cast<std::size_t>(l)] = ConvTranspose2x2(store_, level + ".up", in_ch, up_ch, init);
    decoders_[static_cast<std::size_t>(l)] =
        MultiResBlock(store_, level + ".mrb", up_ch + enc_out[static_cast<std::size_t>(l)],
                      default_branch_widths(config_.level_width(l)), init);
    in_ch = decoders_[static_cast<std::size_t>(l)].out_channels();
  }
  head_ = Conv2d(store_, "head", in_ch, 1, 1, 1, 0, init);
}

Var GruNet::forward(const Var& image, const TextEmbeddingMatrix* text, const ForwardContext& ctx,
                    ForwardTrace* trace) const {
  const Shape& s = image.shape();
  if (s.size() != 4 || s[1] != config_.input_height || s[2] != config_.input_width ||
      s[3] != config_.input_channels || s[0] < 1) {
    throw ShapeError("model expects images of shape (B, " + std::to_string(config_.input_height) + ", " +
                     std::to_string(config_.input_width) + ", " + std::to_string(config_.input_channels) +
                     "), got " + to_string(s));
  }
  const bool full = config_.variant == Variant::kFull;
  if (full && text == nullptr) throw MissingTextError("variant 'full' needs the text embedding matrix");
  if (!full && text != nullptr) {
    throw ConfigError("variant '" + to_string(config_.variant) + "' does not take a text embedding matrix");
  }

  std::vector<Var> skip_out;
  Var x = image;
  for (std::size_t l = 0; l < encoders_.size(); ++l) {
    Var e = encoders_[l](x, ctx);
    CdrbOutput skip = skips_[l](e, ctx);
    skip_out.push_back(skip.skip);
    if (trace) {
      trace->encoder.push_back(e.value());
      if (skip.lambda.defined()) trace->lambdas.push_back(skip.lambda.value());
    }
    x = ops::max_pool2x2(e);
  }
  x = bottleneck_(x, ctx);
  if (full) {
    Var t = (*projection_)(text->raw);
    Gdam::Output g = (*gdam_)(x, t, ctx);
    x = g.features;
    if (trace) trace->attention = g.attention.value();
  }
  if (trace) trace->bottleneck = x.value();
  for (int l = config_.depth - 1; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    Var up = ups_[i](x);
    x = decoders_[i](ops::concat_channels({up, skip_out[i]}), ctx);
    skip_out[i] = Var();
    if (trace) trace->decoder.push_back(x.value());
  }
  return ops::sigmoid(head_(x));
}

Tensor GruNet::predict(const Tensor& images, const TextEmbeddingMatrix* text) const {
  NoGradGuard guard;
  ForwardContext ctx;
  ctx.mode = Mode::kInfer;
  return forward(Var(images), text, ctx).value();
}

}  // namespace grunet

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
#include <map>
#include <string>
#include <vector>

#include "grunet/layers.hpp"

namespace grunet {

inline constexpr Index kLabelCount = 16;
inline constexpr Index kProjectedSide = 32;

/// Ordered, unique set of exactly sixteen histopathology labels.
struct LabelSet {
  std::vector<std::string> labels;
};

/// The built-in sixteen labels, in canonical order.
LabelSet default_labels();

/// One label per line (UTF-8). Blank trailing lines and a trailing '\r' are ignored.
LabelSet load_labels(const std::filesystem::path& path);

/// Raw encoder output: one row per label.
struct TextEmbeddingMatrix {
  Tensor raw;  // (16, N)
  std::string encoder_id;
  std::vector<std::string> labels;

  Index dim() const { return raw.dim(1); }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::vector<double> encode(const std::string& label) const = 0;
  virtual Index dim() const = 0;
  virtual std::string id() const = 0;
};

/// Deterministic stand-in for a language model: each label is hashed (FNV-1a, mixed with the
/// seed) into the seed of a normal generator that fills its vector.
class StubTextEncoder final : public TextEncoder {
 public:
  explicit StubTextEncoder(Index dim = 64, std::uint64_t seed = 0);
  std::vector<double> encode(const std::string& label) const override;
  Index dim() const override { return dim_; }
  std::string id() const override;

 private:
  Index dim_;
  std::uint64_t seed_;
};

/// Looks label vectors up in an embeddings interchange file produced offline.
class FileTextEncoder final : public TextEncoder {
 public:
  explicit FileTextEncoder(const std::filesystem::path& path);
  std::vector<double> encode(const std::string& label) const override;
  Index dim() const override { return matrix_.dim(); }
  std::string id() const override { return matrix_.encoder_id; }

 private:
  std::filesystem::path path_;
  TextEmbeddingMatrix matrix_;
  std::map<std::string, Index> rows_;
};

/// Row i holds the encoder's vector for label i.
TextEmbeddingMatrix encode_labels(const LabelSet& labels, const TextEncoder& encoder);

/// Interchange format: a single-line JSON header followed by a newline and the base64
/// encoding of the row-major little-endian float64 matrix. See docs/formats.md.
void write_embeddings(const std::filesystem::path& path, const TextEmbeddingMatrix& matrix);
TextEmbeddingMatrix read_embeddings(const std::filesystem::path& path);

/// Learnable map from the flattened (16, N) embedding to the (1, 32, 32) matrix T.
class TextProjection {
 public:
  TextProjection() = default;
  TextProjection(ParameterStore& store, const std::string& name, Index text_dim, Initializer& init);

  Var operator()(const Tensor& raw) const;

  Dense& dense() { return dense_; }
  Index text_dim() const { return text_dim_; }

 private:
  Dense dense_;
  Index text_dim_ = 0;
};

}  // namespace grunet

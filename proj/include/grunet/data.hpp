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
#include <span>
#include <string>
#include <vector>

#include "grunet/tensor.hpp"

namespace grunet {

struct Sample {
  Tensor image;  // (H, W, C), values in [0, 1]
  Tensor mask;   // (H, W), values in {0, 1}
  std::string id;
};

struct SplitSpec {
  double train_frac = 0.7;
  double val_frac = 0.2;
  double test_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplit {
  std::vector<Sample> train, val, test;
};

/// Reads an 8-bit (or 16-bit) image as (H, W, channels) scaled to [0, 1]. Grayscale files are
/// replicated to three channels when three are requested.
Tensor read_image(const std::filesystem::path& path, Index channels = 3);

/// Reads a grayscale mask and binarises it at 127/255.
Tensor read_mask(const std::filesystem::path& path);

/// `root/images/*` paired with `root/masks/*` by basename; sorted by id.
std::vector<Sample> load_dataset(const std::filesystem::path& root, Index channels = 3);

/// Seeded shuffle, then contiguous train/val/test blocks of round(n * frac); the test block
/// absorbs rounding remainders.
DatasetSplit split(std::vector<Sample> samples, const SplitSpec& spec);

/// `root/train` and `root/test` each in the load_dataset layout. The train folder is divided
/// into train/val in the ratio of the train and val fractions.
DatasetSplit load_predefined_split(const std::filesystem::path& root, const SplitSpec& spec, Index channels = 3);

/// Blurred elliptical "nuclei" on a textured stained background; masks are the ellipse
/// supports. Fully determined by (n, size, seed).
std::vector<Sample> make_synthetic(Index n, Index size, std::uint64_t seed);

/// Writes samples as `root/images/<id>.png` and `root/masks/<id>.png` (8-bit).
void write_dataset(const std::filesystem::path& root, std::span<const Sample> samples);

/// Stacks samples into images (B, H, W, C) and masks (B, H, W, 1).
struct Batch {
  Tensor images;
  Tensor masks;
};
Batch make_batch(std::span<const Sample* const> samples);
Batch make_batch(std::span<const Sample> samples);

/// JSON with the ids of each split.
void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split);

}  // namespace grunet

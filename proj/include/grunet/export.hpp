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

#include "grunet/tensor.hpp"

namespace grunet {

/// 16-bit grayscale PNG of an (H, W) probability map, value = round(p * 65535).
void write_probability_png(const std::filesystem::path& path, const Tensor& probability);

/// 8-bit PNG mask: 255 where p > 0.5, else 0.
void write_mask_png(const std::filesystem::path& path, const Tensor& probability);

/// Channel mean of sample `b` of a (B, H, W, C) activation, as (H, W).
Tensor channel_mean(const Tensor& activation, Index b = 0);

/// Min-max normalised (constant maps become zero), bilinearly resized to (height, width)
/// and colour-mapped with the jet palette.
void write_heatmap_png(const std::filesystem::path& path, const Tensor& map, Index height, Index width);

/// NumPy .npy (format 1.0, little-endian float64, C order).
void write_npy(const std::filesystem::path& path, const Tensor& t);
Tensor read_npy(const std::filesystem::path& path);

}  // namespace grunet

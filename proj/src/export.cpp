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

#include "grunet/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "grunet/error.hpp"

namespace fs = std::filesystem;

namespace grunet {

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";

void require_map(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " expects an (H, W) map, got " + to_string(t.shape()));
}

void imwrite_checked(const fs::path& path, const cv::Mat& m) {
  if (!cv::imwrite(path.string(), m)) throw DataError("cannot write " + path.string());
}

}  // namespace

void write_probability_png(const fs::path& path, const Tensor& probability) {
  require_map(probability, "probability PNG");
  const auto h = static_cast<int>(probability.dim(0)), w = static_cast<int>(probability.dim(1));
  cv::Mat m(h, w, CV_16UC1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double p = std::clamp(probability[r * w + c], 0.0, 1.0);
      m.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(std::lround(p * 65535.0));
    }
  }
  imwrite_checked(path, m);
}

void write_mask_png(const fs::path& path, const Tensor& probability) {
  require_map(probability, "mask PNG");
  const auto h = static_cast<int>(probability.dim(0)), w = static_cast<int>(probability.dim(1));
  cv::Mat m(h, w, CV_8UC1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) m.at<std::uint8_t>(r, c) = probability[r * w + c] > 0.5 ? 255 : 0;
  }
  imwrite_checked(path, m);
}

Tensor channel_mean(const Tensor& a, Index b) {
  if (a.rank() != 4) throw ShapeError("channel_mean expects (B, H, W, C), got " + to_string(a.shape()));
  const Index h = a.dim(1), w = a.dim(2), c = a.dim(3);
  Tensor out({h, w});
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double s = 0.0;
      for (Index k = 0; k < c; ++k) s += a.at(b, y, x, k);
      out[y * w + x] = s / static_cast<double>(c);
    }
  }
  return out;
}

void write_heatmap_png(const fs::path& path, const Tensor& map, Index height, Index width) {
  require_map(map, "heatmap");
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const double range = *hi - *lo;
  cv::Mat norm(static_cast<int>(map.dim(0)), static_cast<int>(map.dim(1)), CV_64FC1);
  for (Index i = 0; i < map.size(); ++i) {
    norm.at<double>(static_cast<int>(i)) = range > 0.0 ? (map[i] - *lo) / range : 0.0;
  }
  cv::Mat resized, gray, color;
  cv::resize(norm, resized, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
  resized.convertTo(gray, CV_8UC1, 255.0);
  cv::applyColorMap(gray, color, cv::COLORMAP_JET);
  imwrite_checked(path, color);
}

void write_npy(const fs::path& path, const Tensor& t) {
  std::string shape = "(";
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (i > 0) shape += ", ";
    shape += std::to_string(t.dim(i));
  }
  if (t.rank() == 1) shape += ",";
  shape += ")";
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape + ", }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const auto len = static_cast<std::uint16_t>(header.size());
  out.write(kNpyMagic, 6);
  out.put(1);
  out.put(0);
  out.put(static_cast<char>(len & 0xff));
  out.put(static_cast<char>(len >> 8));
  out << header;
  out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw DataError("failed writing " + path.string());
}

Tensor read_npy(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char pre[10];
  in.read(pre, sizeof(pre));
  if (!in || std::memcmp(pre, kNpyMagic, 6) != 0 || pre[6] != 1) throw DataError(path.string() + " is not a v1 .npy file");
  const std::size_t len = static_cast<unsigned char>(pre[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(pre[9])) << 8);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (header.find("'<f8'") == std::string::npos || header.find("'fortran_order': False") == std::string::npos) {
    throw DataError(path.string() + " is not a C-ordered float64 array");
  }
  const auto open = header.find('(', header.find("'shape'"));
  const auto close = header.find(')', open);
  Shape shape;
  std::string dims = header.substr(open + 1, close - open - 1);
  std::size_t pos = 0;
  while (pos < dims.size()) {
    const auto comma = dims.find(',', pos);
    const std::string item = dims.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.find_first_not_of(' ') != std::string::npos) shape.push_back(std::stoll(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!in) throw DataError("truncated array in " + path.string());
  return t;
}

}  // namespace grunet

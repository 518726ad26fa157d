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

#include "grunet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "grunet/error.hpp"

namespace fs = std::filesystem;

namespace grunet {

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

std::map<std::string, fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("missing directory " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string id = entry.path().stem().string();
    if (!out.emplace(id, entry.path()).second) throw DataError("two files share the id '" + id + "' in " + dir.string());
  }
  return out;
}

cv::Mat imread_checked(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot read image " + path.string());
  if (m.depth() != CV_8U && m.depth() != CV_16U) throw DataError("unsupported bit depth in " + path.string());
  return m;
}

double depth_scale(const cv::Mat& m) { return m.depth() == CV_16U ? 65535.0 : 255.0; }

double pixel(const cv::Mat& m, int r, int c, int ch) {
  return m.depth() == CV_16U ? m.ptr<std::uint16_t>(r)[c * m.channels() + ch]
                             : m.ptr<std::uint8_t>(r)[c * m.channels() + ch];
}

}  // namespace

void SplitSpec::validate() const {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0) throw ConfigError("split fractions must be >= 0");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

Tensor read_image(const fs::path& path, Index channels) {
  cv::Mat m = imread_checked(path);
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  const int src_ch = m.channels();
  if (src_ch != 1 && src_ch != 3) throw DataError("unsupported channel count in " + path.string());
  if (channels != 1 && channels != 3) throw ConfigError("images must have 1 or 3 channels");
  const double scale = depth_scale(m);
  Tensor out({m.rows, m.cols, channels});
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      for (Index k = 0; k < channels; ++k) {
        double v;
        if (src_ch == 1) {
          v = pixel(m, r, c, 0);
        } else if (channels == 1) {
          // ITU-R BT.601 luma.
          v = 0.299 * pixel(m, r, c, 2) + 0.587 * pixel(m, r, c, 1) + 0.114 * pixel(m, r, c, 0);
        } else {
          v = pixel(m, r, c, static_cast<int>(2 - k));  // BGR -> RGB
        }
        out[(static_cast<Index>(r) * m.cols + c) * channels + k] = v / scale;
      }
    }
  }
  return out;
}

Tensor read_mask(const fs::path& path) {
  cv::Mat m = imread_checked(path);
  if (m.channels() != 1) cv::cvtColor(m, m, m.channels() == 4 ? cv::COLOR_BGRA2GRAY : cv::COLOR_BGR2GRAY);
  const double cut = m.depth() == CV_16U ? 127.0 * 257.0 : 127.0;
  Tensor out({m.rows, m.cols});
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) out[static_cast<Index>(r) * m.cols + c] = pixel(m, r, c, 0) > cut ? 1.0 : 0.0;
  }
  return out;
}

std::vector<Sample> load_dataset(const fs::path& root, Index channels) {
  const auto images = list_images(root / "images");
  const auto masks = list_images(root / "masks");
  std::vector<Sample> out;
  for (const auto& [id, image_path] : images) {
    const auto it = masks.find(id);
    if (it == masks.end()) throw DataError("no mask for image '" + id + "'");
    Sample s{read_image(image_path, channels), read_mask(it->second), id};
    if (s.image.dim(0) != s.mask.dim(0) || s.image.dim(1) != s.mask.dim(1)) {
      throw DataError("dimension mismatch for '" + id + "': image " + std::to_string(s.image.dim(0)) + "x" +
                      std::to_string(s.image.dim(1)) + ", mask " + std::to_string(s.mask.dim(0)) + "x" +
                      std::to_string(s.mask.dim(1)));
    }
    out.push_back(std::move(s));
  }
  for (const auto& [id, path] : masks) {
    if (!images.count(id)) throw DataError("no image for mask '" + id + "'");
  }
  return out;
}

DatasetSplit split(std::vector<Sample> samples, const SplitSpec& spec) {
  spec.validate();
  const Index n = static_cast<Index>(samples.size());
  if (n < 3) throw ConfigError("need at least 3 samples to split, got " + std::to_string(n));
  std::mt19937_64 rng(spec.seed);
  std::shuffle(samples.begin(), samples.end(), rng);
  Index n_train = std::llround(static_cast<double>(n) * spec.train_frac);
  Index n_val = std::llround(static_cast<double>(n) * spec.val_frac);
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  DatasetSplit out;
  auto first = std::make_move_iterator(samples.begin());
  out.train.assign(first, first + n_train);
  out.val.assign(first + n_train, first + n_train + n_val);
  out.test.assign(first + n_train + n_val, std::make_move_iterator(samples.end()));
  return out;
}

DatasetSplit load_predefined_split(const fs::path& root, const SplitSpec& spec, Index channels) {
  spec.validate();
  std::vector<Sample> train = load_dataset(root / "train", channels);
  DatasetSplit out;
  out.test = load_dataset(root / "test", channels);
  const double denom = spec.train_frac + spec.val_frac;
  if (denom <= 0.0) throw ConfigError("predefined split needs a positive train or val fraction");
  std::mt19937_64 rng(spec.seed);
  std::shuffle(train.begin(), train.end(), rng);
  const auto n = static_cast<Index>(train.size());
  const Index n_train = std::min<Index>(n, std::llround(static_cast<double>(n) * spec.train_frac / denom));
  auto first = std::make_move_iterator(train.begin());
  out.train.assign(first, first + n_train);
  out.val.assign(first + n_train, std::make_move_iterator(train.end()));
  return out;
}

std::vector<Sample> make_synthetic(Index n, Index size, std::uint64_t seed) {
  if (n < 1 || size < 8) throw ConfigError("synthetic dataset needs n >= 1 and size >= 8");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.02);
  const double s = static_cast<double>(size);
  const int side = static_cast<int>(size);

  std::vector<Sample> out;
  for (Index k = 0; k < n; ++k) {
    cv::Mat mask;
    Index ones = 0;
    do {
      mask = cv::Mat::zeros(side, side, CV_64F);
      const int nuclei = 3 + static_cast<int>(u01(rng) * 5.0);
      for (int e = 0; e < nuclei; ++e) {
        const double cy = s * (0.1 + 0.8 * u01(rng)), cx = s * (0.1 + 0.8 * u01(rng));
        const double a = s * (1.0 / 14.0 + u01(rng) / 14.0), b = s * (1.0 / 14.0 + u01(rng) / 14.0);
        const double th = u01(rng) * std::numbers::pi;
        const double ct = std::cos(th), st = std::sin(th);
        for (int r = 0; r < side; ++r) {
          for (int c = 0; c < side; ++c) {
            const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
            const double u = (dx * ct + dy * st) / a, v = (-dx * st + dy * ct) / b;
            if (u * u + v * v <= 1.0) mask.at<double>(r, c) = 1.0;
          }
        }
      }
      ones = cv::countNonZero(mask);
    } while (ones == 0 || ones == size * size);

    // Low-frequency stain texture.
    const double fy = 1.0 + 3.0 * u01(rng), fx = 1.0 + 3.0 * u01(rng), phase = u01(rng) * 6.28;
    const double bg[3] = {0.86 + 0.05 * u01(rng), 0.62 + 0.05 * u01(rng), 0.76 + 0.05 * u01(rng)};
    const double fg[3] = {0.36 + 0.08 * u01(rng), 0.20 + 0.08 * u01(rng), 0.52 + 0.08 * u01(rng)};
    cv::Mat soft;
    cv::GaussianBlur(mask, soft, cv::Size(0, 0), std::max(0.6, s / 96.0));

    Sample smp{Tensor({size, size, 3}), Tensor({size, size}), "synthetic_" + std::to_string(k)};
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const double t = 0.04 * std::sin(6.28 * (fy * r / s) + phase) * std::cos(6.28 * (fx * c / s));
        const double m = soft.at<double>(r, c);
        for (int ch = 0; ch < 3; ++ch) {
          const double v = (1.0 - m) * (bg[ch] + t) + m * fg[ch] + noise(rng);
          smp.image[(static_cast<Index>(r) * size + c) * 3 + ch] = std::clamp(v, 0.0, 1.0);
        }
        smp.mask[static_cast<Index>(r) * size + c] = mask.at<double>(r, c);
      }
    }
    out.push_back(std::move(smp));
  }
  return out;
}

void write_dataset(const fs::path& root, std::span<const Sample> samples) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (const Sample& s : samples) {
    const int h = static_cast<int>(s.image.dim(0)), w = static_cast<int>(s.image.dim(1));
    const Index ch = s.image.dim(2);
    cv::Mat img(h, w, ch == 1 ? CV_8UC1 : CV_8UC3);
    cv::Mat mask(h, w, CV_8UC1);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        for (Index k = 0; k < ch; ++k) {
          const double v = s.image[(static_cast<Index>(r) * w + c) * ch + k];
          const Index dst = ch == 1 ? 0 : 2 - k;  // RGB -> BGR
          img.ptr<std::uint8_t>(r)[c * ch + dst] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
        mask.ptr<std::uint8_t>(r)[c] = s.mask[static_cast<Index>(r) * w + c] > 0.5 ? 255 : 0;
      }
    }
    if (!cv::imwrite((root / "images" / (s.id + ".png")).string(), img) ||
        !cv::imwrite((root / "masks" / (s.id + ".png")).string(), mask)) {
      throw DataError("failed writing sample '" + s.id + "' under " + root.string());
    }
  }
}

Batch make_batch(std::span<const Sample* const> samples) {
  if (samples.empty()) throw ConfigError("empty batch");
  const Index h = samples[0]->image.dim(0), w = samples[0]->image.dim(1), c = samples[0]->image.dim(2);
  const auto b = static_cast<Index>(samples.size());
  Batch out{Tensor({b, h, w, c}), Tensor({b, h, w, 1})};
  for (Index i = 0; i < b; ++i) {
    const Sample& s = *samples[static_cast<std::size_t>(i)];
    if (s.image.shape() != Shape{h, w, c} || s.mask.shape() != Shape{h, w}) {
      throw ShapeError("sample '" + s.id + "' does not match the batch shape");
    }
    std::copy(s.image.values().begin(), s.image.values().end(), out.images.data() + i * h * w * c);
    std::copy(s.mask.values().begin(), s.mask.values().end(), out.masks.data() + i * h * w);
  }
  return out;
}

Batch make_batch(std::span<const Sample> samples) {
  std::vector<const Sample*> ptrs;
  for (const Sample& s : samples) ptrs.push_back(&s);
  return make_batch(std::span<const Sample* const>(ptrs));
}

void write_split_manifest(const fs::path& path, const DatasetSplit& split) {
  const auto ids = [](const std::vector<Sample>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
  };
  nlohmann::json j{{"train", ids(split.train)}, {"val", ids(split.val)}, {"test", ids(split.test)}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split manifest " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace grunet

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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "grunet/data.hpp"
#include "grunet/error.hpp"
#include "support.hpp"

using namespace grunet;
using namespace grunet::testing;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> numbered(Index n) {
  std::vector<Sample> out;
  for (Index i = 0; i < n; ++i) {
    out.push_back({Tensor({2, 2, 3}, 0.0), Tensor({2, 2}, 0.0), "s" + std::to_string(100 + i)});
  }
  return out;
}

std::vector<std::string> ids(const std::vector<Sample>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) out.push_back(x.id);
  return out;
}

void write_png(const fs::path& p, int h, int w, int type, int value) {
  fs::create_directories(p.parent_path());
  cv::imwrite(p.string(), cv::Mat(h, w, type, cv::Scalar::all(value)));
}

}  // namespace

TEST(LoadDataset, PairsByIdInSortedOrder) {
  TempDir dir("load");
  for (const std::string id : {"img_03", "img_01", "img_02"}) {
    write_png(dir / "images" / (id + ".png"), 8, 6, CV_8UC3, 128);
    write_png(dir / "masks" / (id + ".png"), 8, 6, CV_8UC1, 255);
  }
  const auto samples = load_dataset(dir.path());
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_EQ(ids(samples), (std::vector<std::string>{"img_01", "img_02", "img_03"}));
  EXPECT_EQ(samples[0].image.shape(), (Shape{8, 6, 3}));
  EXPECT_EQ(samples[0].mask.shape(), (Shape{8, 6}));
  EXPECT_NEAR(samples[0].image[0], 128.0 / 255.0, 1e-12);
  EXPECT_EQ(samples[0].mask[0], 1.0);
}

TEST(LoadDataset, IsIdempotent) {
  TempDir dir("idem");
  write_dataset(dir.path(), make_synthetic(3, 16, 4));
  const auto a = load_dataset(dir.path()), b = load_dataset(dir.path());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].mask, b[i].mask);
  }
}

TEST(LoadDataset, MissingMaskNamesTheImage) {
  TempDir dir("missing");
  write_png(dir / "images" / "img_06.png", 4, 4, CV_8UC3, 0);
  write_png(dir / "masks" / "img_06.png", 4, 4, CV_8UC1, 0);
  write_png(dir / "images" / "img_07.png", 4, 4, CV_8UC3, 0);
  try {
    load_dataset(dir.path());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("img_07"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, DimensionMismatchIsDataError) {
  TempDir dir("mismatch");
  write_png(dir / "images" / "a.png", 4, 4, CV_8UC3, 0);
  write_png(dir / "masks" / "a.png", 4, 5, CV_8UC1, 0);
  try {
    load_dataset(dir.path());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_dataset(dir / "absent"), DataError);
}

TEST(ReadMask, BinarisesAtMidGrey) {
  TempDir dir("mask");
  cv::Mat m(1, 4, CV_8UC1);
  m.at<std::uint8_t>(0, 0) = 0;
  m.at<std::uint8_t>(0, 1) = 127;
  m.at<std::uint8_t>(0, 2) = 128;
  m.at<std::uint8_t>(0, 3) = 255;
  cv::imwrite((dir / "m.png").string(), m);
  const Tensor t = read_mask(dir / "m.png");
  EXPECT_EQ(t, Tensor({1, 4}, std::vector<double>{0, 0, 1, 1}));
}

TEST(ReadImage, GrayscaleIsReplicated) {
  TempDir dir("gray");
  write_png(dir / "g.png", 3, 3, CV_8UC1, 51);
  const Tensor t = read_image(dir / "g.png", 3);
  EXPECT_EQ(t.shape(), (Shape{3, 3, 3}));
  for (double v : t.values()) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(Split, SizesFollowTheFractions) {
  const SplitSpec spec;
  const DatasetSplit s50 = split(numbered(50), spec);
  EXPECT_EQ(s50.train.size(), 35u);
  EXPECT_EQ(s50.val.size(), 10u);
  EXPECT_EQ(s50.test.size(), 5u);
  const DatasetSplit s10 = split(numbered(10), spec);
  EXPECT_EQ(s10.train.size(), 7u);
  EXPECT_EQ(s10.val.size(), 2u);
  EXPECT_EQ(s10.test.size(), 1u);
  EXPECT_THROW(split(numbered(2), spec), ConfigError);
}

TEST(Split, IsAPartitionForEveryCountAndSeed) {
  for (Index n = 3; n <= 60; ++n) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      SplitSpec spec;
      spec.seed = seed;
      const DatasetSplit s = split(numbered(n), spec);
      std::multiset<std::string> all;
      for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (const auto& x : *part) all.insert(x.id);
      }
      EXPECT_EQ(all.size(), static_cast<std::size_t>(n));
      EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), static_cast<std::size_t>(n));
    }
  }
}

TEST(Split, IsDeterministicPerSeed) {
  SplitSpec a;
  a.seed = 11;
  EXPECT_EQ(ids(split(numbered(20), a).train), ids(split(numbered(20), a).train));
  SplitSpec b = a;
  b.seed = 12;
  EXPECT_NE(ids(split(numbered(20), a).train), ids(split(numbered(20), b).train));
}

TEST(Split, RejectsBadFractions) {
  SplitSpec s;
  s.train_frac = 0.8;
  EXPECT_THROW(s.validate(), ConfigError);
  s.train_frac = -0.1;
  s.val_frac = 0.5;
  s.test_frac = 0.6;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(PredefinedSplit, UsesTheTestFolder) {
  TempDir dir("predef");
  write_dataset(dir / "train", make_synthetic(9, 16, 1));
  auto test = make_synthetic(2, 16, 2);
  test[0].id = "t0";
  test[1].id = "t1";
  write_dataset(dir / "test", test);
  const DatasetSplit s = load_predefined_split(dir.path(), SplitSpec{});
  EXPECT_EQ(ids(s.test), (std::vector<std::string>{"t0", "t1"}));
  EXPECT_EQ(s.train.size() + s.val.size(), 9u);
  EXPECT_EQ(s.train.size(), 7u);
}

TEST(Synthetic, MasksAreBinaryAndNeitherEmptyNorFull) {
  const auto samples = make_synthetic(4, 64, 7);
  ASSERT_EQ(samples.size(), 4u);
  for (const auto& s : samples) {
    EXPECT_EQ(s.image.shape(), (Shape{64, 64, 3}));
    EXPECT_EQ(s.mask.shape(), (Shape{64, 64}));
    double fg = 0.0;
    for (double v : s.mask.values()) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
      fg += v;
    }
    EXPECT_GT(fg, 0.0) << s.id;
    EXPECT_LT(fg, 64.0 * 64.0) << s.id;
    for (double v : s.image.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Synthetic, IsBitwiseDeterministic) {
  const auto a = make_synthetic(4, 64, 7), b = make_synthetic(4, 64, 7), c = make_synthetic(4, 64, 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].mask, b[i].mask);
    EXPECT_EQ(a[i].id, b[i].id);
  }
  EXPECT_NE(a[0].image, c[0].image);
}

TEST(Synthetic, SurvivesAPngRoundTrip) {
  TempDir dir("roundtrip");
  const auto samples = make_synthetic(3, 32, 5);
  write_dataset(dir.path(), samples);
  const auto loaded = load_dataset(dir.path());
  ASSERT_EQ(loaded.size(), samples.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].mask, samples[i].mask);
    for (Index k = 0; k < loaded[i].image.size(); ++k) {
      EXPECT_NEAR(loaded[i].image[k], samples[i].image[k], 0.5 / 255.0 + 1e-12);
    }
  }
}

TEST(Batch, StacksSamples) {
  const auto samples = make_synthetic(2, 16, 3);
  const Batch b = make_batch(std::span<const Sample>(samples));
  EXPECT_EQ(b.images.shape(), (Shape{2, 16, 16, 3}));
  EXPECT_EQ(b.masks.shape(), (Shape{2, 16, 16, 1}));
  EXPECT_EQ(b.masks[16 * 16 + 5], samples[1].mask[5]);
  auto mixed = samples;
  mixed[1] = make_synthetic(1, 8, 3)[0];
  EXPECT_THROW(make_batch(std::span<const Sample>(mixed)), ShapeError);
}

TEST(SplitManifest, ListsIds) {
  TempDir dir("manifest");
  const DatasetSplit s = split(numbered(10), SplitSpec{});
  write_split_manifest(dir / "split.json", s);
  const auto j = nlohmann::json::parse(read_bytes(dir / "split.json"));
  EXPECT_EQ(j.at("train").get<std::vector<std::string>>(), ids(s.train));
  EXPECT_EQ(j.at("test").get<std::vector<std::string>>(), ids(s.test));
}

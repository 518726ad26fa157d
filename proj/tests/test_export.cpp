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

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "grunet/error.hpp"
#include "grunet/export.hpp"
#include "support.hpp"

using namespace grunet;
using namespace grunet::testing;

TEST(Npy, RoundTripsShapesAndValues) {
  TempDir dir("npy");
  for (const Shape& s : {Shape{7}, Shape{3, 5}, Shape{2, 3, 4}, Shape{1, 2, 2, 3}}) {
    const Tensor t = random_tensor(s, 3, -1e6, 1e6);
    write_npy(dir / "a.npy", t);
    EXPECT_EQ(read_npy(dir / "a.npy"), t);
  }
}

TEST(Npy, HeaderFollowsVersionOne) {
  TempDir dir("npyhdr");
  write_npy(dir / "a.npy", Tensor({2, 3}, 1.5));
  const std::string bytes = read_bytes(dir / "a.npy");
  EXPECT_EQ(bytes.substr(0, 8), std::string("\x93NUMPY\x01\x00", 8));
  const auto header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
  EXPECT_EQ((10 + header_len) % 64, 0);
  const std::string header = bytes.substr(10, static_cast<std::size_t>(header_len));
  EXPECT_NE(header.find("'descr': '<f8'"), std::string::npos) << header;
  EXPECT_NE(header.find("'fortran_order': False"), std::string::npos) << header;
  EXPECT_NE(header.find("'shape': (2, 3)"), std::string::npos) << header;
  EXPECT_EQ(header.back(), '\n');
  EXPECT_EQ(bytes.size(), 10u + header_len + 6 * sizeof(double));
}

TEST(Npy, RejectsOtherFiles) {
  TempDir dir("npybad");
  write_text(dir / "x.npy", "hello");
  EXPECT_THROW(read_npy(dir / "x.npy"), DataError);
  EXPECT_THROW(read_npy(dir / "absent.npy"), DataError);
}

TEST(ProbabilityPng, IsSixteenBitAndRounded) {
  TempDir dir("prob");
  const Tensor p({1, 4}, std::vector<double>{0.0, 0.5, 0.999999, 1.0});
  write_probability_png(dir / "p.png", p);
  const cv::Mat m = cv::imread((dir / "p.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(m.type(), CV_16UC1);
  EXPECT_EQ(m.at<std::uint16_t>(0, 0), 0);
  EXPECT_EQ(m.at<std::uint16_t>(0, 1), 32768);
  EXPECT_EQ(m.at<std::uint16_t>(0, 2), 65535);
  EXPECT_EQ(m.at<std::uint16_t>(0, 3), 65535);
  EXPECT_THROW(write_probability_png(dir / "bad.png", Tensor({1, 2, 2, 1})), ShapeError);
}

TEST(MaskPng, ThresholdsStrictlyAboveHalf) {
  TempDir dir("mask");
  write_mask_png(dir / "m.png", Tensor({1, 3}, std::vector<double>{0.5, 0.500001, 0.1}));
  const cv::Mat m = cv::imread((dir / "m.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(m.type(), CV_8UC1);
  EXPECT_EQ(m.at<std::uint8_t>(0, 0), 0);
  EXPECT_EQ(m.at<std::uint8_t>(0, 1), 255);
  EXPECT_EQ(m.at<std::uint8_t>(0, 2), 0);
}

TEST(ChannelMean, AveragesChannelsOfOneSample) {
  Tensor a({2, 1, 2, 3});
  for (Index i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i);
  EXPECT_EQ(channel_mean(a, 0), Tensor({1, 2}, std::vector<double>{1.0, 4.0}));
  EXPECT_EQ(channel_mean(a, 1), Tensor({1, 2}, std::vector<double>{7.0, 10.0}));
  EXPECT_THROW(channel_mean(Tensor({2, 2})), ShapeError);
}

TEST(HeatmapPng, ResizesAndColours) {
  TempDir dir("heat");
  write_heatmap_png(dir / "h.png", random_tensor({4, 4}, 1), 16, 12);
  const cv::Mat m = cv::imread((dir / "h.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(m.type(), CV_8UC3);
  EXPECT_EQ(m.rows, 16);
  EXPECT_EQ(m.cols, 12);
  write_heatmap_png(dir / "c.png", Tensor({4, 4}, 3.0), 8, 8);
  write_heatmap_png(dir / "z.png", Tensor({4, 4}, 0.0), 8, 8);
  EXPECT_EQ(read_bytes(dir / "c.png"), read_bytes(dir / "z.png"));
}

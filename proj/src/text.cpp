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

#include "grunet/text.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "grunet/error.hpp"

namespace grunet {

namespace {

constexpr const char* kEmbeddingsFormat = "grunet-text-embeddings";

void validate_labels(const std::vector<std::string>& labels) {
  if (static_cast<Index>(labels.size()) != kLabelCount) {
    throw ConfigError("expected " + std::to_string(kLabelCount) + " labels, found " + std::to_string(labels.size()));
  }
  std::set<std::string> seen;
  for (const auto& label : labels) {
    if (label.empty()) throw ConfigError("empty label in label set");
    if (!seen.insert(label).second) throw ConfigError("duplicate label '" + label + "'");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text, std::size_t expected) {
  if (text.size() % 4 != 0) throw DataError("embeddings body is not valid base64");
  std::vector<unsigned char> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw DataError("embeddings body is not valid base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  if (out.size() != expected) {
    throw DataError("embeddings body holds " + std::to_string(out.size()) + " bytes, expected " +
                    std::to_string(expected));
  }
  return out;
}

}  // namespace

LabelSet default_labels() {
  return {{"tumor epithelial tissue", "necrotic tissue", "lymphocytic tissue", "tumor-associated stromal tissue",
           "coagulative necrosis", "liquefactive necrosis", "desmoplasia", "granular and non-granular leukocytes",
           "perinuclear halo", "interstitial space", "neutrophils", "macrophages", "collagen", "fibronectin",
           "hyperplasia", "dysplasia"}};
}

LabelSet load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open labels file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  validate_labels(lines);
  return {lines};
}

StubTextEncoder::StubTextEncoder(Index dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw ConfigError("stub encoder dimension must be >= 1");
}

std::vector<double> StubTextEncoder::encode(const std::string& label) const {
  std::mt19937_64 rng(fnv1a(label) ^ (seed_ * 0x9E3779B97F4A7C15ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim_));
  for (double& x : v) x = normal(rng);
  return v;
}

std::string StubTextEncoder::id() const {
  return "stub-fnv1a-normal:dim=" + std::to_string(dim_) + ":seed=" + std::to_string(seed_);
}

FileTextEncoder::FileTextEncoder(const std::filesystem::path& path) : path_(path), matrix_(read_embeddings(path)) {
  for (std::size_t i = 0; i < matrix_.labels.size(); ++i) rows_[matrix_.labels[i]] = static_cast<Index>(i);
}

std::vector<double> FileTextEncoder::encode(const std::string& label) const {
  const auto it = rows_.find(label);
  if (it == rows_.end()) throw ConfigError("label '" + label + "' not present in embeddings file " + path_.string());
  const Index n = matrix_.dim();
  const double* row = matrix_.raw.data() + it->second * n;
  return {row, row + n};
}

TextEmbeddingMatrix encode_labels(const LabelSet& labels, const TextEncoder& encoder) {
  validate_labels(labels.labels);
  const Index n = encoder.dim();
  TextEmbeddingMatrix m{Tensor({kLabelCount, n}), encoder.id(), labels.labels};
  for (Index i = 0; i < kLabelCount; ++i) {
    const auto v = encoder.encode(labels.labels[static_cast<std::size_t>(i)]);
    if (static_cast<Index>(v.size()) != n) throw ShapeError("encoder returned a vector of the wrong length");
    std::copy(v.begin(), v.end(), m.raw.data() + i * n);
  }
  if (!m.raw.all_finite()) throw DataError("text encoder produced non-finite values");
  return m;
}

void write_embeddings(const std::filesystem::path& path, const TextEmbeddingMatrix& matrix) {
  if (matrix.raw.rank() != 2) throw ShapeError("embedding matrix must be rank 2");
  static_assert(std::endian::native == std::endian::little, "interchange body is little-endian");
  nlohmann::json header;
  header["format"] = kEmbeddingsFormat;
  header["version"] = 1;
  header["rows"] = matrix.raw.dim(0);
  header["cols"] = matrix.raw.dim(1);
  header["encoder_id"] = matrix.encoder_id;
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["labels"] = matrix.labels;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(matrix.raw.size()) * sizeof(double));
  std::memcpy(bytes.data(), matrix.raw.data(), bytes.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings file " + path.string());
  out << header.dump() << '\n' << base64_encode(bytes) << '\n';
  if (!out) throw DataError("failed writing embeddings file " + path.string());
}

TextEmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("embeddings file not found: " + path.string());
  std::string header_line, body;
  std::getline(in, header_line);
  std::getline(in, body);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad embeddings header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != kEmbeddingsFormat || header.value("dtype", "") != "float64" ||
      header.value("byte_order", "") != "little") {
    throw DataError("unsupported embeddings file " + path.string());
  }
  const Index rows = header.at("rows").get<Index>();
  const Index cols = header.at("cols").get<Index>();
  if (rows < 1 || cols < 1) throw DataError("embeddings file " + path.string() + " declares an empty matrix");
  TextEmbeddingMatrix m;
  m.encoder_id = header.value("encoder_id", "");
  if (header.contains("labels")) m.labels = header.at("labels").get<std::vector<std::string>>();
  if (!m.labels.empty() && static_cast<Index>(m.labels.size()) != rows) {
    throw DataError("embeddings file " + path.string() + " lists " + std::to_string(m.labels.size()) +
                    " labels for " + std::to_string(rows) + " rows");
  }
  const auto bytes = base64_decode(body, static_cast<std::size_t>(rows * cols) * sizeof(double));
  m.raw = Tensor({rows, cols});
  std::memcpy(m.raw.data(), bytes.data(), bytes.size());
  return m;
}

TextProjection::TextProjection(ParameterStore& store, const std::string& name, Index text_dim, Initializer& init)
    : dense_(store, name, kLabelCount * text_dim, kProjectedSide * kProjectedSide, init), text_dim_(text_dim) {}

Var TextProjection::operator()(const Tensor& raw) const {
  if (raw.shape() != Shape{kLabelCount, text_dim_}) {
    throw ShapeError("text projection expects a (16, " + std::to_string(text_dim_) + ") embedding, got " +
                     to_string(raw.shape()));
  }
  Var flat(raw.reshaped({1, kLabelCount * text_dim_}));
  return ops::reshape(dense_(flat), {1, kProjectedSide, kProjectedSide});
}

}  // namespace grunet

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

#include "grunet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "grunet/error.hpp"

namespace fs = std::filesystem;

namespace grunet {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'U', 'N', 'E', 'T', 'C', 'K'};
constexpr const char* kTextArray = "text.raw_embeddings";
static_assert(std::endian::native == std::endian::little, "checkpoint payload is little-endian");

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const fs::path& path, const GruNet& model, const TextEmbeddingMatrix* text,
                     const nlohmann::json& extra) {
  std::vector<std::pair<std::string, const Tensor*>> arrays;
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  const auto add = [&](const std::string& name, const Tensor& t, const char* kind) {
    index.push_back({{"name", name}, {"kind", kind}, {"shape", t.shape()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
    arrays.emplace_back(name, &t);
  };
  for (const auto& e : model.parameters().entries()) add(e.name, e.var.value(), e.trainable ? "parameter" : "buffer");
  if (text) add(kTextArray, text->raw, "input");

  nlohmann::json manifest{{"format", "grunet-checkpoint"},
                          {"version", 1},
                          {"model", model.config()},
                          {"arrays", index},
                          {"extra", extra}};
  if (text) manifest["text"] = {{"encoder_id", text->encoder_id}, {"labels", text->labels}};
  const std::string m = manifest.dump();
  const std::uint64_t len = m.size();

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(m.data(), static_cast<std::streamsize>(m.size()));
    for (const auto& [name, t] : arrays) {
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path.string() + " is not a checkpoint");
  std::string m(len, '\0');
  in.read(m.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint manifest in " + path.string());

  Checkpoint ck;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(m);
    ck.config = manifest.at("model").get<ModelConfig>();
    ck.extra = manifest.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint manifest in " + path.string() + ": " + e.what());
  }
  const auto payload_start = in.tellg();
  for (const auto& entry : manifest.at("arrays")) {
    Tensor t(entry.at("shape").get<Shape>());
    in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint payload in " + path.string());
    ck.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  if (manifest.contains("text")) {
    const Tensor* raw = ck.find(kTextArray);
    if (!raw) throw DataError("checkpoint " + path.string() + " lists text metadata without embeddings");
    ck.text = TextEmbeddingMatrix{*raw, manifest["text"].value("encoder_id", ""),
                                  manifest["text"].value("labels", std::vector<std::string>{})};
  }
  return ck;
}

void load_weights(GruNet& model, const Checkpoint& checkpoint) {
  for (const auto& e : model.parameters().entries()) {
    const Tensor* t = checkpoint.find(e.name);
    if (!t) throw ShapeError("checkpoint has no array for layer '" + e.name + "'");
    if (t->shape() != e.var.value().shape()) {
      throw ShapeError("layer '" + e.name + "' expects " + to_string(e.var.value().shape()) + ", checkpoint has " +
                       to_string(t->shape()));
    }
    Var v = e.var;
    v.mutable_value() = *t;
  }
}

std::unique_ptr<GruNet> load_model(const Checkpoint& checkpoint) {
  auto model = std::make_unique<GruNet>(checkpoint.config);
  load_weights(*model, checkpoint);
  return model;
}

}  // namespace grunet

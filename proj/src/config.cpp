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

#include "grunet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grunet/error.hpp"

namespace fs = std::filesystem;

namespace grunet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string unquote(const std::string& key, const std::string& v) {
  if (v.empty() || v.front() != '"') return v;
  if (v.size() < 2 || v.back() != '"') throw ConfigError("unterminated string for key '" + key + "'");
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) ++i;
    out += v[i];
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects a real number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::string body = v;
  if (!body.empty() && body.front() == '[') {
    if (body.back() != ']') throw ConfigError("unterminated list for key '" + key + "'");
    body = body.substr(1, body.size() - 2);
  }
  std::vector<T> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

fs::path parse_path(const std::string& v, const fs::path& base) {
  if (v.empty()) return {};
  fs::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string real(double d) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

template <typename T>
std::string list(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + std::to_string(xs[i]);
  return out + "]";
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "input_height",  "input_width",     "input_channels", "depth",          "base_width",
      "alpha",         "variant",         "gdam_broadcast", "text_dim",       "res_blocks",
      "seed",          "lr",              "batch_size",     "epochs",         "beta1",
      "beta2",         "adam_eps",        "max_steps",      "data_dir",       "predefined_split",
      "train_frac",    "val_frac",        "test_frac",      "split_seed",     "synthetic_count",
      "synthetic_size", "synthetic_seed", "labels_path",    "encoder",        "embeddings_path",
      "encoder_seed",  "ablation_seeds",  "output_dir"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& raw, const fs::path& base) {
  const std::string v = unquote(key, trim(raw));
  if (key == "input_height") model.input_height = parse_number<Index>(key, v);
  else if (key == "input_width") model.input_width = parse_number<Index>(key, v);
  else if (key == "input_channels") model.input_channels = parse_number<Index>(key, v);
  else if (key == "depth") model.depth = parse_number<int>(key, v);
  else if (key == "base_width") model.base_width = parse_number<Index>(key, v);
  else if (key == "alpha") model.alpha = parse_real(key, v);
  else if (key == "variant") model.variant = parse_variant(v);
  else if (key == "gdam_broadcast") model.gdam_broadcast = parse_bool(key, v);
  else if (key == "text_dim") model.text_dim = parse_number<Index>(key, v);
  else if (key == "res_blocks") model.res_blocks = parse_list<int>(key, v);
  else if (key == "seed") set_seed(parse_number<std::uint64_t>(key, v));
  else if (key == "lr") train.lr = parse_real(key, v);
  else if (key == "batch_size") train.batch_size = parse_number<Index>(key, v);
  else if (key == "epochs") train.epochs = parse_number<int>(key, v);
  else if (key == "beta1") train.beta1 = parse_real(key, v);
  else if (key == "beta2") train.beta2 = parse_real(key, v);
  else if (key == "adam_eps") train.adam_eps = parse_real(key, v);
  else if (key == "max_steps") train.max_steps = parse_number<Index>(key, v);
  else if (key == "data_dir") data_dir = parse_path(v, base);
  else if (key == "predefined_split") predefined_split = parse_bool(key, v);
  else if (key == "train_frac") split.train_frac = parse_real(key, v);
  else if (key == "val_frac") split.val_frac = parse_real(key, v);
  else if (key == "test_frac") split.test_frac = parse_real(key, v);
  else if (key == "split_seed") split.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "synthetic_count") synthetic_count = parse_number<Index>(key, v);
  else if (key == "synthetic_size") synthetic_size = parse_number<Index>(key, v);
  else if (key == "synthetic_seed") synthetic_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "labels_path") labels_path = parse_path(v, base);
  else if (key == "encoder") encoder = v;
  else if (key == "embeddings_path") embeddings_path = parse_path(v, base);
  else if (key == "encoder_seed") encoder_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "ablation_seeds") ablation_seeds = parse_list<std::uint64_t>(key, v);
  else if (key == "output_dir") output_dir = parse_path(v, base);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::set_seed(std::uint64_t seed) {
  model.seed = seed;
  train.seed = seed;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  split.validate();
  if (encoder != "stub" && encoder != "file") throw ConfigError("encoder must be 'stub' or 'file', got '" + encoder + "'");
  if (ablation_seeds.empty()) throw ConfigError("ablation_seeds must not be empty");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (!data_dir.empty()) {
    if (!fs::is_directory(data_dir)) throw ConfigError("data_dir not found: " + data_dir.string());
  } else {
    if (synthetic_count < 3) throw ConfigError("synthetic_count must be >= 3");
    if (synthetic_size != model.input_height || synthetic_size != model.input_width) {
      throw ConfigError("synthetic_size " + std::to_string(synthetic_size) + " does not match the model input " +
                        std::to_string(model.input_height) + "x" + std::to_string(model.input_width));
    }
    if (predefined_split) throw ConfigError("predefined_split needs data_dir");
  }
  if (model.variant == Variant::kFull) {
    if (!labels_path.empty()) require_file(labels_path, "labels file");
    if (encoder == "file") {
      if (embeddings_path.empty()) throw ConfigError("encoder 'file' needs embeddings_path");
      require_file(embeddings_path, "embeddings file");
    }
  }
}

std::string RunConfig::to_toml() const {
  std::ostringstream o;
  o << "# model\n"
    << "input_height = " << model.input_height << '\n'
    << "input_width = " << model.input_width << '\n'
    << "input_channels = " << model.input_channels << '\n'
    << "depth = " << model.depth << '\n'
    << "base_width = " << model.base_width << '\n'
    << "alpha = " << real(model.alpha) << '\n'
    << "variant = " << quote(to_string(model.variant)) << '\n'
    << "gdam_broadcast = " << (model.gdam_broadcast ? "true" : "false") << '\n'
    << "text_dim = " << model.text_dim << '\n'
    << "res_blocks = " << list(model.res_blocks) << '\n'
    << "\n# training\n"
    << "seed = " << train.seed << '\n'
    << "lr = " << real(train.lr) << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "epochs = " << train.epochs << '\n'
    << "beta1 = " << real(train.beta1) << '\n'
    << "beta2 = " << real(train.beta2) << '\n'
    << "adam_eps = " << real(train.adam_eps) << '\n'
    << "max_steps = " << train.max_steps << '\n'
    << "\n# data\n"
    << "data_dir = " << quote(data_dir.string()) << '\n'
    << "predefined_split = " << (predefined_split ? "true" : "false") << '\n'
    << "train_frac = " << real(split.train_frac) << '\n'
    << "val_frac = " << real(split.val_frac) << '\n'
    << "test_frac = " << real(split.test_frac) << '\n'
    << "split_seed = " << split.seed << '\n'
    << "synthetic_count = " << synthetic_count << '\n'
    << "synthetic_size = " << synthetic_size << '\n'
    << "synthetic_seed = " << synthetic_seed << '\n'
    << "\n# text\n"
    << "labels_path = " << quote(labels_path.string()) << '\n'
    << "encoder = " << quote(encoder) << '\n'
    << "embeddings_path = " << quote(embeddings_path.string()) << '\n'
    << "encoder_seed = " << encoder_seed << '\n'
    << "\n# run\n"
    << "ablation_seeds = " << list(ablation_seeds) << '\n'
    << "output_dir = " << quote(output_dir.string()) << '\n';
  return o.str();
}

void parse_run_config(const std::string& text, RunConfig& into, const fs::path& base, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    try {
      into.set(key, body.substr(eq + 1), base);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

DatasetSplit load_run_data(const RunConfig& config) {
  const ModelConfig& m = config.model;
  DatasetSplit data;
  if (config.data_dir.empty()) {
    data = split(make_synthetic(config.synthetic_count, config.synthetic_size, config.synthetic_seed), config.split);
  } else if (config.predefined_split) {
    data = load_predefined_split(config.data_dir, config.split, m.input_channels);
  } else {
    data = split(load_dataset(config.data_dir, m.input_channels), config.split);
  }
  for (const auto* part : {&data.train, &data.val, &data.test}) {
    for (const Sample& s : *part) {
      if (s.image.dim(0) != m.input_height || s.image.dim(1) != m.input_width) {
        throw ShapeError("sample '" + s.id + "' is " + std::to_string(s.image.dim(0)) + "x" +
                         std::to_string(s.image.dim(1)) + ", the model expects " + std::to_string(m.input_height) +
                         "x" + std::to_string(m.input_width));
      }
    }
  }
  return data;
}

std::optional<TextEmbeddingMatrix> load_run_text(RunConfig& config) {
  if (config.model.variant != Variant::kFull) return std::nullopt;
  const LabelSet labels = config.labels_path.empty() ? default_labels() : load_labels(config.labels_path);
  if (config.encoder == "file") {
    TextEmbeddingMatrix text = encode_labels(labels, FileTextEncoder(config.embeddings_path));
    config.model.text_dim = text.dim();
    return text;
  }
  return encode_labels(labels, StubTextEncoder(config.model.text_dim, config.encoder_seed));
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  parse_run_config(ss.str(), cfg, fs::absolute(path).parent_path(), path.string());
  return cfg;
}

}  // namespace grunet

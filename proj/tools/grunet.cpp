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

// grunet: train, evaluate, predict, ablate, export heatmaps and generate synthetic data.
// Exit codes: 0 success, 1 runtime failure, 2 configuration or input error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grunet/checkpoint.hpp"
#include "grunet/config.hpp"
#include "grunet/data.hpp"
#include "grunet/error.hpp"
#include "grunet/export.hpp"
#include "grunet/train.hpp"

namespace fs = std::filesystem;
using namespace grunet;

namespace {

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config, "Run configuration file (key = value)");
  cmd->add_option("--set", args.overrides, "Override one config key, as key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "Seed for model initialisation, noise and batch order");
}

// File, then GRUNET_OUT, then --set, then --seed.
RunConfig resolve(const ConfigArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : load_run_config(args.config);
  if (const char* out = std::getenv("GRUNET_OUT"); out && *out) cfg.output_dir = out;
  for (const auto& o : args.overrides) cfg.apply_override(o);
  if (args.seed) cfg.set_seed(*args.seed);
  return cfg;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

const TextEmbeddingMatrix* text_ptr(const std::optional<TextEmbeddingMatrix>& t) { return t ? &*t : nullptr; }

Tensor load_input(const fs::path& image, const ModelConfig& m) {
  if (!fs::is_regular_file(image)) throw ConfigError("image not found: " + image.string());
  const Tensor img = read_image(image, m.input_channels);
  const Index step = Index{1} << m.depth;
  if (img.dim(0) % step != 0 || img.dim(1) % step != 0) {
    throw ShapeError("image " + image.string() + " is " + std::to_string(img.dim(0)) + "x" +
                     std::to_string(img.dim(1)) + ", not divisible by " + std::to_string(step));
  }
  return img.reshaped({1, img.dim(0), img.dim(1), img.dim(2)});
}

Checkpoint open_checkpoint(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("checkpoint not found: " + path);
  return read_checkpoint(path);
}

int cmd_train(const ConfigArgs& args) {
  RunConfig cfg = resolve(args);
  cfg.validate();
  const auto text = load_run_text(cfg);
  const DatasetSplit data = load_run_data(cfg);
  fs::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir / "config.toml", cfg.to_toml());
  write_split_manifest(cfg.output_dir / "split.json", data);

  GruNet model(cfg.model);
  TrainConfig tc = cfg.train;
  tc.checkpoint_dir = cfg.output_dir;
  const TrainingRecord record = train(model, tc, data.train, data.val, text_ptr(text), [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " val dice " << e.val.mean.dice << '\n';
  });
  nlohmann::json summary{{"epochs", record.epochs.size()},
                         {"best_epoch", record.best_epoch},
                         {"best_val_dice", record.best_val_dice},
                         {"output_dir", cfg.output_dir.string()}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& which) {
  RunConfig cfg = resolve(args);
  const Checkpoint ck = open_checkpoint(checkpoint);
  cfg.model = ck.config;
  cfg.validate();
  const DatasetSplit data = load_run_data(cfg);
  const std::vector<Sample>* samples = which == "train" ? &data.train : which == "val" ? &data.val : &data.test;
  std::string protocol = (cfg.predefined_split ? "predefined-" : "") + which + "-split";
  if (samples->empty() && which == "test") {
    samples = &data.val;
    protocol = "val-split";
  }
  if (samples->empty()) throw ConfigError("the " + which + " split is empty");
  const auto model = load_model(ck);
  const EvaluationReport r = evaluate(*model, *samples, ck.text ? &*ck.text : nullptr, cfg.train.batch_size);
  nlohmann::json out{{"checkpoint", checkpoint},
                     {"protocol", protocol},
                     {"samples", samples->size()},
                     {"mean", r.mean},
                     {"pooled", r.pooled}};
  fs::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir / "eval.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& image, const std::string& out_dir) {
  const Checkpoint ck = open_checkpoint(checkpoint);
  const Tensor input = load_input(image, ck.config);
  const auto model = load_model(ck);
  const Tensor p = model->predict(input, ck.text ? &*ck.text : nullptr);
  const Tensor map = p.reshaped({p.dim(1), p.dim(2)});
  fs::create_directories(out_dir);
  const std::string stem = fs::path(image).stem().string();
  write_probability_png(fs::path(out_dir) / (stem + "_prob.png"), map);
  write_mask_png(fs::path(out_dir) / (stem + "_mask.png"), map);
  std::cout << (fs::path(out_dir) / (stem + "_prob.png")).string() << '\n'
            << (fs::path(out_dir) / (stem + "_mask.png")).string() << '\n';
  return 0;
}

int cmd_heatmaps(const std::string& checkpoint, const std::string& image, const std::string& out_dir) {
  const Checkpoint ck = open_checkpoint(checkpoint);
  const Tensor input = load_input(image, ck.config);
  const auto model = load_model(ck);
  ForwardTrace trace;
  {
    NoGradGuard guard;
    model->forward(Var(input), ck.text ? &*ck.text : nullptr, ForwardContext{}, &trace);
  }
  const fs::path out(out_dir);
  fs::create_directories(out);
  const Index h = input.dim(1), w = input.dim(2);
  const auto panel = [&](const std::string& name, const Tensor& activation) {
    const Tensor m = channel_mean(activation);
    write_heatmap_png(out / (name + ".png"), m, h, w);
    write_npy(out / (name + ".npy"), m);
    std::cout << (out / (name + ".png")).string() << '\n';
  };
  for (std::size_t l = 0; l < trace.encoder.size(); ++l) panel("encoder" + std::to_string(l), trace.encoder[l]);
  for (std::size_t k = 0; k < trace.decoder.size(); ++k) {
    panel("decoder" + std::to_string(trace.decoder.size() - 1 - k), trace.decoder[k]);
  }
  if (ck.config.variant != Variant::kFull) {
    std::cerr << "no GdAM heatmap: variant '" << to_string(ck.config.variant)
              << "' has no attention module (encoder and decoder heatmaps were written)\n";
    return 2;
  }
  panel("gdam_attention", trace.attention);
  return 0;
}

int cmd_ablate(const ConfigArgs& args) {
  RunConfig cfg = resolve(args);
  cfg.model.variant = Variant::kFull;
  cfg.validate();
  const auto text = load_run_text(cfg);
  const DatasetSplit data = load_run_data(cfg);
  fs::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir / "config.toml", cfg.to_toml());
  write_split_manifest(cfg.output_dir / "split.json", data);
  TrainConfig tc = cfg.train;
  tc.checkpoint_dir = cfg.output_dir / "ablation";
  const auto rows = ablate(cfg.model, tc, data, text_ptr(text), cfg.ablation_seeds);
  const fs::path csv = cfg.output_dir / "ablation.csv";
  write_ablation_csv(csv, rows);
  std::ifstream in(csv);
  std::cout << in.rdbuf();
  return 0;
}

int cmd_gen_synthetic(const std::string& out, Index count, Index size, std::uint64_t seed) {
  if (count < 1) throw ConfigError("count must be >= 1");
  if (size < 8) throw ConfigError("size must be >= 8");
  const auto samples = make_synthetic(count, size, seed);
  write_dataset(out, samples);
  std::cout << "wrote " << samples.size() << " samples to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-guided nuclei segmentation: training, evaluation and visualisation"};
  app.require_subcommand(1);

  ConfigArgs train_args, eval_args, ablate_args;
  std::string checkpoint, image, out, which = "test";
  Index count = 8, size = 64;
  std::uint64_t gen_seed = 0;

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes config, split, record and checkpoints");
  add_config_options(train_cmd, train_args);

  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a data split");
  add_config_options(eval_cmd, eval_args);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--split", which, "Split to score")->check(CLI::IsMember({"train", "val", "test"}));

  auto* predict_cmd = app.add_subcommand("predict", "Write the probability and mask PNGs for one image");
  predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--image", image, "Input image")->required();
  predict_cmd->add_option("--out", out, "Output directory")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Train the four ablation variants and write ablation.csv");
  add_config_options(ablate_cmd, ablate_args);

  auto* heat_cmd = app.add_subcommand("heatmaps", "Export encoder, decoder and attention heatmaps for one image");
  heat_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  heat_cmd->add_option("--image", image, "Input image")->required();
  heat_cmd->add_option("--out", out, "Output directory")->required();

  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic dataset in the images/ + masks/ layout");
  gen_cmd->add_option("--out", out, "Dataset root")->required();
  gen_cmd->add_option("--count", count, "Number of samples");
  gen_cmd->add_option("--size", size, "Image side in pixels");
  gen_cmd->add_option("--seed", gen_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_eval(eval_args, checkpoint, which);
    if (*predict_cmd) return cmd_predict(checkpoint, image, out);
    if (*ablate_cmd) return cmd_ablate(ablate_args);
    if (*heat_cmd) return cmd_heatmaps(checkpoint, image, out);
    if (*gen_cmd) return cmd_gen_synthetic(out, count, size, gen_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

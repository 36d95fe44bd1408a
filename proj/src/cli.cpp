// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "warpsynth/archive.hpp"
#include "warpsynth/image_io.hpp"
#include "warpsynth/trainer.hpp"

namespace warpsynth {
namespace {

namespace fs = std::filesystem;

// Errors the user can fix by changing inputs map to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Tensor<float> load_exemplar(const fs::path& path, Index size) {
  if (!fs::exists(path)) throw DataError("exemplar not found: " + path.string());
  const Tensor<float> photo = read_photo(path);
  if (photo.shape().h == size && photo.shape().w == size) return photo;
  return resize_image(photo, size, size, Resample::Bilinear);
}

Tensor<float> load_input(const fs::path& path, const ModelConfig& m, std::vector<int>* labels = nullptr) {
  return load_annotation(path, m.task, m.input_channels, m.image_size, labels);
}

// Nearest upsampling by an integer factor, for side-by-side panels.
Tensor<float> upscale(const Tensor<float>& image, Index size) {
  return resize_image(image, size, size, Resample::Nearest);
}

void write_points(const fs::path& path, const std::vector<GridPoint>& queries, const std::vector<GridPoint>& found) {
  std::ostringstream text;
  for (std::size_t i = 0; i < queries.size(); ++i)
    text << queries[i].row << " " << queries[i].col << " " << found[i].row << " " << found[i].col << "\n";
  write_file_atomic(path, text.str());
}

std::vector<GridPoint> read_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("points file not found: " + path.string());
  std::vector<GridPoint> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream fields(line);
    GridPoint p;
    if (!(fields >> p.row >> p.col))
      throw DataError(path.string() + ":" + std::to_string(number) + ": expected \"row col\"");
    out.push_back(p);
  }
  return out;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::string resume;
  std::optional<bool> deterministic;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.steps) cfg.train.steps = *a.steps;
  cfg.train.deterministic = a.deterministic.value_or(deterministic_from_env(cfg.train.deterministic));
  validate(cfg);
  Dataset data = load_dataset(a.data, "train");
  if (data.size() == 0) throw DataError("no training pairs in " + a.data);
  Trainer trainer(cfg, std::move(data));

  RunOptions opts;
  opts.steps = cfg.train.steps;
  opts.checkpoint_every = cfg.train.checkpoint_every;
  opts.progress = &out;
  if (!a.resume.empty()) {
    trainer.restore(a.resume);
    // A checkpoint lives in <run>/checkpoints/; resuming continues that run.
    opts.run_dir = fs::absolute(a.resume).parent_path().parent_path();
  } else {
    opts.run_dir = make_run_dir(a.out, cfg);
  }
  out << "run directory: " << opts.run_dir.string() << "\n";
  run_training(trainer, opts);
  out << "finished at step " << trainer.iteration() << "\n";
  return 0;
}

struct InferArgs {
  std::string checkpoint;
  std::string config;
  std::string input;
  std::string exemplar;
  std::string out;
  std::string dump_warp;
  std::string side_by_side;
};

std::optional<ExperimentConfig> expected_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_config(path);
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto expected = expected_config(a.config);
  InferenceModel model = InferenceModel::load(a.checkpoint, expected ? &*expected : nullptr);
  const ModelConfig& m = model.config().model;
  const TranslationResult r = model.translate(load_input(a.input, m), load_exemplar(a.exemplar, m.image_size));
  write_photo(a.out, r.output.value());
  out << "wrote " << a.out << "\n";
  if (!a.dump_warp.empty()) {
    write_photo(a.dump_warp, r.correspondence.warped.value());
    out << "wrote " << a.dump_warp << "\n";
  }
  if (!a.side_by_side.empty()) {
    write_photo(a.side_by_side, side_by_side({upscale(r.correspondence.warped.value(), m.image_size), r.output.value()}));
    out << "wrote " << a.side_by_side << "\n";
  }
  return 0;
}

struct WarpArgs {
  std::string checkpoint;
  std::string input;
  std::string exemplar;
  std::string out;
  std::string points;
  std::string points_out;
};

int cmd_warp(const WarpArgs& a, std::ostream& out) {
  InferenceModel model = InferenceModel::load(a.checkpoint);
  const ModelConfig& m = model.config().model;
  std::vector<GridPoint> queries;
  if (!a.points.empty()) {
    queries = read_points(a.points);
    for (const auto& q : queries)
      if (q.row < 0 || q.col < 0 || q.row >= m.corr_size || q.col >= m.corr_size)
        throw UsageError("point (" + std::to_string(q.row) + ", " + std::to_string(q.col) + ") lies outside the " +
                         std::to_string(m.corr_size) + "x" + std::to_string(m.corr_size) + " correspondence grid");
  }
  const TranslationResult r = model.translate(load_input(a.input, m), load_exemplar(a.exemplar, m.image_size));
  write_photo(a.out, r.correspondence.warped.value());
  out << "wrote " << a.out << "\n";
  if (!a.points.empty()) {
    const fs::path target = a.points_out.empty() ? fs::path(a.out).replace_extension(".points.txt") : fs::path(a.points_out);
    write_points(target, queries,
                 export_sparse_correspondence(r.correspondence.correlation.value(), m.corr_size, queries));
    out << "wrote " << target.string() << "\n";
  }
  return 0;
}

struct EditArgs {
  std::string checkpoint;
  std::string image;
  std::string mask;
  std::string edited;
  std::string out;
};

int cmd_edit(const EditArgs& a, std::ostream& out) {
  InferenceModel model = InferenceModel::load(a.checkpoint);
  const ModelConfig& m = model.config().model;
  if (m.task != TaskKind::Mask) throw UsageError("edit needs a model trained on masks, this one is " + to_string(m.task));
  auto check_classes = [&](const std::string& path) {
    Index h = 0, w = 0;
    const std::vector<int> labels = read_labels(path, &h, &w);
    const int top = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    if (top >= m.input_channels)
      throw UsageError(path + " uses class " + std::to_string(top) + " but the checkpoint was trained with " +
                       std::to_string(m.input_channels) + " classes");
    return std::pair<Index, Index>{h, w};
  };
  if (!fs::exists(a.mask)) throw DataError("mask not found: " + a.mask);
  if (!fs::exists(a.edited)) throw DataError("edited mask not found: " + a.edited);
  if (check_classes(a.mask) != check_classes(a.edited)) throw UsageError("original and edited masks differ in size");
  std::vector<int> before, after;
  load_input(a.mask, m, &before);
  const Tensor<float> edited = load_input(a.edited, m, &after);
  Index changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i];
  const TranslationResult r = model.translate(edited, load_exemplar(a.image, m.image_size));
  write_photo(a.out, r.output.value());
  out << "wrote " << a.out << " (" << changed << " pixels relabelled)\n";
  return 0;
}

struct MetricsArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "val";
  std::string out;
  bool identity_outputs = false;
};

// Held-out evaluation: each pair is translated with the next pair's photo as
// exemplar (itself when the split has one pair).
int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  InferenceModel model = InferenceModel::load(a.checkpoint);
  const ModelConfig& m = model.config().model;
  const Dataset data = load_dataset(a.data, a.split);
  if (data.size() == 0) throw UsageError("split '" + a.split + "' of " + a.data + " is empty");
  if (data.image_size != m.image_size || data.classes != m.input_channels)
    throw UsageError("dataset " + a.data + " does not match the checkpoint's image size or input channels");
  double semantic = 0, color = 0, texture = 0;
  for (Index i = 0; i < data.size(); ++i) {
    const auto& gt = data.x_b[static_cast<std::size_t>(i)];
    const auto& exemplar = data.x_b[static_cast<std::size_t>((i + 1) % data.size())];
    const Tensor<float> output =
        a.identity_outputs ? gt : model.translate(data.x_a[static_cast<std::size_t>(i)], exemplar).output.value();
    const auto& backbone = model.networks().backbone;
    semantic += semantic_consistency_score(Var<float>(output), Var<float>(gt), backbone);
    const StyleRelevance s = style_relevance_score(Var<float>(output), Var<float>(exemplar), backbone);
    color += s.color;
    texture += s.texture;
  }
  const double n = static_cast<double>(data.size());
  nlohmann::json j = {{"semantic_consistency", semantic / n}, {"style_color", color / n}, {"style_texture", texture / n}};
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    out << "wrote " << a.out << "\n";
  }
  return 0;
}

struct ToyArgs {
  std::string out;
  Index count = 64;
  Index size = 32;
  std::string task = "mask";
  std::uint64_t seed = 0;
};

int cmd_gen_toy(const ToyArgs& a, std::ostream& out) {
  write_dataset(make_toy_dataset(a.count, a.size, parse_task_kind(a.task), a.seed), a.out);
  out << "wrote " << a.count << " pairs to " << a.out << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exemplar-based image translation"};
  app.name("warpsynth");
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train on a dataset directory");
  c_train->add_option("--config", train.config, "Experiment config (YAML)")->required();
  c_train->add_option("--data", train.data, "Dataset root holding manifest.json")->required();
  c_train->add_option("--out", train.out, "Root for run directories");
  c_train->add_option("--seed", train.seed, "Override train.seed");
  c_train->add_option("--steps", train.steps, "Override train.steps");
  c_train->add_option("--resume", train.resume, "Checkpoint to continue from");
  c_train->add_flag("--deterministic,!--no-deterministic", train.deterministic,
                    "Bit-reproducible mode (default: WARPSYNTH_DETERMINISTIC or the config)");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Translate one input with an exemplar");
  c_infer->add_option("--checkpoint", infer.checkpoint)->required();
  c_infer->add_option("--config", infer.config, "Reject the checkpoint unless it matches this config");
  c_infer->add_option("--input", infer.input, "Domain-A annotation (label PNG, edge PNG or pose JSON)")->required();
  c_infer->add_option("--exemplar", infer.exemplar, "Exemplar photo (PNG)")->required();
  c_infer->add_option("--out", infer.out, "Output PNG")->required();
  c_infer->add_option("--dump-warp", infer.dump_warp, "Also write the warped exemplar at grid resolution");
  c_infer->add_option("--side-by-side", infer.side_by_side, "Also write [warped exemplar | output]");

  WarpArgs warp;
  auto* c_warp = app.add_subcommand("warp", "Dense warp and sparse correspondences");
  c_warp->add_option("--checkpoint", warp.checkpoint)->required();
  c_warp->add_option("--input", warp.input)->required();
  c_warp->add_option("--exemplar", warp.exemplar)->required();
  c_warp->add_option("--out", warp.out, "Warped exemplar PNG")->required();
  c_warp->add_option("--points", warp.points, "Query grid points, one \"row col\" per line");
  c_warp->add_option("--points-out", warp.points_out, "Matches as \"u_row u_col v_row v_col\" lines");

  EditArgs edit;
  auto* c_edit = app.add_subcommand("edit", "Re-render a photo from an edited mask");
  c_edit->add_option("--checkpoint", edit.checkpoint)->required();
  c_edit->add_option("--image", edit.image, "Original photo, used as the exemplar")->required();
  c_edit->add_option("--mask", edit.mask, "Original label PNG")->required();
  c_edit->add_option("--edited-mask", edit.edited, "Edited label PNG")->required();
  c_edit->add_option("--out", edit.out)->required();

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "Semantic consistency and style relevance on a split");
  c_metrics->add_option("--checkpoint", metrics.checkpoint)->required();
  c_metrics->add_option("--data", metrics.data)->required();
  c_metrics->add_option("--split", metrics.split, "Manifest split");
  c_metrics->add_option("--out", metrics.out, "JSON file (stdout when omitted)");
  c_metrics->add_flag("--identity-outputs", metrics.identity_outputs, "Score the ground-truth photos themselves");

  ToyArgs toy;
  auto* c_toy = app.add_subcommand("gen-toy-data", "Write a procedural shapes dataset");
  c_toy->add_option("--out", toy.out)->required();
  c_toy->add_option("--count", toy.count)->check(CLI::PositiveNumber);
  c_toy->add_option("--size", toy.size)->check(CLI::PositiveNumber);
  c_toy->add_option("--task", toy.task)->check(CLI::IsMember({"mask", "edge", "pose"}));
  c_toy->add_option("--seed", toy.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "warpsynth: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*c_train) return cmd_train(train, out);
    if (*c_infer) return cmd_infer(infer, out);
    if (*c_warp) return cmd_warp(warp, out);
    if (*c_edit) return cmd_edit(edit, out);
    if (*c_metrics) return cmd_metrics(metrics, out);
    if (*c_toy) return cmd_gen_toy(toy, out);
  } catch (const UsageError& e) {
    err << "warpsynth: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "warpsynth: config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "warpsynth: data error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    err << "warpsynth: checkpoint error: " << e.what() << "\n";
    return 2;
  } catch (const ArchiveError& e) {
    err << "warpsynth: checkpoint error: " << e.what() << "\n";
    return 2;
  } catch (const ImageIoError& e) {
    err << "warpsynth: image error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    err << "warpsynth: shape error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "warpsynth: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace warpsynth

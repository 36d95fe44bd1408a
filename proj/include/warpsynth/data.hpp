// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Input rasterization, pseudo-exemplar distortion, batch sampling, the
// procedural toy dataset and on-disk manifests.
//
// Manifest (manifest.json at the dataset root):
//   {"task": "mask" | "edge" | "pose", "classes": K, "image_size": S,
//    "pairs": [{"image": "images/0000.png", "annotation": "annotations/0000.png",
//               "split": "train" | "val"}, ...]}
// Mask annotations are 8-bit label PNGs, edge annotations grayscale PNGs
// (> 127 is an edge), pose annotations JSON files {"keypoints": [[row, col], ...]}
// with K entries (negative coordinates mark a missing joint).

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "warpsynth/config.hpp"
#include "warpsynth/random.hpp"
#include "warpsynth/tensor.hpp"

namespace warpsynth {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double row = 0;
  double col = 0;
};

using Polyline = std::vector<Point2>;

/// [1, classes, H, W] one-hot. Throws DataError for labels outside [0, classes).
Tensor<float> rasterize_mask(const std::vector<int>& labels, Index height, Index width, Index classes);
/// [1, 1, H, W] binary map of the polylines' segments (Bresenham).
Tensor<float> rasterize_edges(const std::vector<Polyline>& lines, Index height, Index width);
/// Heatmap width used for pose inputs: 2 px at 64×64, proportional otherwise.
inline double pose_sigma(Index size) { return 2.0 * static_cast<double>(size) / 64.0; }

/// [1, J, H, W] heatmaps exp(−d²/2σ²), one per keypoint. Keypoints outside the
/// frame are clamped to the border and reported through `warnings`.
/// Keypoints with a negative coordinate are treated as missing (zero map).
Tensor<float> rasterize_pose(const std::vector<Point2>& keypoints, Index height, Index width, double sigma = 2.0,
                             std::vector<std::string>* warnings = nullptr);
/// [1, 1, H, W] edges where some 4-neighbour carries a different label.
Tensor<float> label_boundaries(const std::vector<int>& labels, Index height, Index width);
/// Sobel gradient magnitude of the luminance (photo mapped to [0, 1]), scaled
/// by 1/4 so a unit step scores 1, thresholded at kSobelThreshold.
inline constexpr double kSobelThreshold = 0.25;
Tensor<float> sobel_edges(const Tensor<float>& photo, double threshold = kSobelThreshold);

/// The concrete geometric distortion drawn from an AugmentationSpec.
struct AugmentationRecord {
  bool flip = false;
  double rotation_rad = 0;
  double scale = 1;
  double translate_row = 0;  // pixels
  double translate_col = 0;
  std::vector<double> tps_dx;  // 3×3 control displacements in pixels
  std::vector<double> tps_dy;

  bool is_identity() const;
};

AugmentationRecord draw_augmentation(const AugmentationSpec& spec, Index height, Index width);

enum class Resample { Bilinear, Nearest };

/// Applies the recorded distortion to every channel of every sample.
Tensor<float> apply_augmentation(const Tensor<float>& image, const AugmentationRecord& record, Resample mode);

/// x′_B = h(x_B) with h drawn from `spec` (deterministic in spec.seed).
std::pair<Tensor<float>, AugmentationRecord> make_pseudo_pair(const Tensor<float>& x_b, const AugmentationSpec& spec);

/// Aligned pairs held in memory; immutable once built.
struct Dataset {
  TaskKind task = TaskKind::Mask;
  Index classes = 0;      // channels of x_a
  Index image_size = 0;
  std::vector<Tensor<float>> x_a;  // [1, classes, S, S]
  std::vector<Tensor<float>> x_b;  // [1, 3, S, S] in [-1, 1]
  std::vector<std::vector<int>> labels;  // label maps for mask tasks (may be empty)
  std::vector<std::vector<Point2>> keypoints;  // pose tasks (may be empty)

  Index size() const { return static_cast<Index>(x_b.size()); }
};

struct PairedSample {
  Tensor<float> x_a;
  Tensor<float> x_b;
  Tensor<float> exemplar;
  Tensor<float> exemplar_x_a;  // domain-A raster aligned with the exemplar
  bool is_pseudo = false;
  Index index = 0;
  Index exemplar_index = 0;
  AugmentationRecord augmentation;
};

/// Stacked batch tensors.
struct Batch {
  Tensor<float> x_a;
  Tensor<float> x_b;
  Tensor<float> exemplar;
  Tensor<float> exemplar_x_a;
  std::vector<bool> is_pseudo;
  std::vector<Index> indices;

  Index size() const { return static_cast<Index>(indices.size()); }
  std::vector<Index> pseudo_indices() const;
};

/// Uniform draws with replacement. A pseudo sample's exemplar is h(x_b); any
/// other sample's exemplar is the photo of a uniformly chosen different index.
std::vector<PairedSample> sample_batch(const Dataset& data, Index batch, double pseudo_prob,
                                       const AugmentationSpec& augment, RandomState& rng);
Batch stack(const std::vector<PairedSample>& samples);

/// Procedural scenes: background plus 1–3 rectangles, ellipses and triangles
/// with random colours; class ids 0 background, 1 rectangle, 2 ellipse,
/// 3 triangle. Pose inputs place one keypoint per shape slot at its centre.
inline constexpr Index kToyClasses = 4;
inline constexpr Index kToyMaxShapes = 3;

struct ToyScene {
  Tensor<float> photo;     // [1, 3, S, S]
  std::vector<int> labels; // S·S class ids
  std::vector<int> owner;  // S·S index of the painting shape, −1 for background
  std::vector<Point2> centers;  // one per shape slot (negative when absent)
};

ToyScene render_toy_scene(Index size, RandomState& rng);
Dataset make_toy_dataset(Index count, Index size, TaskKind task, std::uint64_t seed);

/// Writes images/, annotations/ and manifest.json; every fifth pair is "val".
void write_dataset(const Dataset& data, const std::filesystem::path& root);
/// Loads the pairs of one split ("" for all). Throws DataError naming the
/// missing path when the manifest or a referenced file does not exist.
Dataset load_dataset(const std::filesystem::path& root, const std::string& split = "train");

/// Builds the domain-A raster of a task from an annotation file.
Tensor<float> load_annotation(const std::filesystem::path& path, TaskKind task, Index classes, Index size,
                              std::vector<int>* labels = nullptr);

/// Bilinear (photos) or nearest (labels) resize of a [N, C, H, W] tensor.
Tensor<float> resize_image(const Tensor<float>& image, Index height, Index width, Resample mode);

}  // namespace warpsynth

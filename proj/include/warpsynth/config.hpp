// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace warpsynth {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { Mask, Edge, Pose };
enum class BackboneMode { DeterministicSmall, PretrainedVgg19 };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);
std::string to_string(BackboneMode mode);
BackboneMode parse_backbone_mode(const std::string& text);

/// Activation size entering one generator block.
struct LayerSpec {
  int height = 0;
  int width = 0;
  int channels = 0;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelConfig {
  TaskKind task = TaskKind::Mask;
  int input_channels = 3;     // channels of the domain-A raster
  int aux_channels = 0;       // warm-up mask / noise channels appended to both adaptors
  int image_size = 256;
  int corr_size = 64;         // side of the shared-domain grid; corr_size² is the correlation side
  int feature_channels = 256;
  int adaptor_base_channels = 64;
  int adaptor_resblocks = 3;
  int shared_resblocks = 4;
  std::vector<LayerSpec> generator_layers = {
      {8, 8, 1024}, {16, 16, 1024}, {32, 32, 512}, {64, 64, 256}, {128, 128, 256}, {128, 128, 256}, {256, 256, 64}};
  int style_hidden_channels = 128;
  double softmax_alpha = 100.0;
  double pn_epsilon = 1e-5;
  bool use_nonlocal = true;
  bool spectral_norm = true;
  int warmup_epochs = 0;
  int disc_base_channels = 64;
  int disc_layers = 3;
  int disc_scales = 2;
  BackboneMode backbone = BackboneMode::DeterministicSmall;
  int backbone_base_channels = 16;
  std::uint64_t backbone_seed = 1234;
  std::string backbone_weights;       // pretrained-vgg19 weight archive
  std::string backbone_checksum;      // expected payload checksum (hex), optional

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Objective weights. The ψ defaults are engineering choices, not published values.
struct LossConfig {
  double psi_feat = 10.0;
  double psi_perc = 1.0;
  double psi_context = 1.0;
  double psi_adv = 1.0;
  double psi_domain = 10.0;
  double psi_reg = 1.0;
  double warmup_ce_weight = 1.0;
  std::vector<std::string> feat_layers = {"relu1_2", "relu2_2", "relu3_2", "relu4_2", "relu5_2"};
  std::vector<double> lambda_feat = {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  std::string perc_layer = "relu4_2";
  std::vector<std::string> context_layers = {"relu2_2", "relu3_2", "relu4_2", "relu5_2"};
  std::vector<double> omega_context = {1.0, 1.0, 1.0, 1.0};
  double context_bandwidth = 0.5;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct TrainConfig {
  int batch_size = 4;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double pseudo_prob = 0.5;
  int steps = 1000;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int checkpoint_every = 0;   // 0: only at the end

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Parameters of the random geometric distortion h used for pseudo exemplars.
struct AugmentationSpec {
  double flip_prob = 0.5;
  double rotation_deg = 10.0;
  double translate_frac = 0.05;
  double scale_min = 0.95;
  double scale_max = 1.05;
  double tps_jitter = 0.03;   // control-point displacement as a fraction of the image side
  std::uint64_t seed = 0;

  static AugmentationSpec identity() { return {0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0}; }
  friend bool operator==(const AugmentationSpec&, const AugmentationSpec&) = default;
};

struct ExperimentConfig {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  AugmentationSpec augment;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError naming the offending key.
void validate(const ModelConfig& model);
void validate(const LossConfig& loss);
void validate(const TrainConfig& train);
void validate(const AugmentationSpec& augment);
void validate(const ExperimentConfig& config);

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize(const ExperimentConfig& config);

/// Hash of the model and loss sections: what a checkpoint's parameters and
/// optimizer state depend on. Training schedule keys are excluded.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hash_hex(std::uint64_t hash);

/// Environment override for deterministic mode: WARPSYNTH_DETERMINISTIC=0|1.
bool deterministic_from_env(bool fallback);

}  // namespace warpsynth

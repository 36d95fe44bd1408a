// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Alternating discriminator / generator optimization.

#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "warpsynth/correspondence.hpp"
#include "warpsynth/data.hpp"
#include "warpsynth/discriminator.hpp"
#include "warpsynth/feature_extractor.hpp"
#include "warpsynth/losses.hpp"
#include "warpsynth/translation.hpp"

namespace warpsynth {

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& term, const std::string& dump)
      : std::runtime_error("non-finite " + term + " loss: " + dump), term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction; moments are keyed by parameter name.
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Applies one update to every parameter that carries a gradient.
  void step(ParameterSet<float>& params);
  std::int64_t steps() const { return t_; }
  void set_lr(double lr) { lr_ = lr; }

  std::map<std::string, Tensor<float>>& first_moments() { return m_; }
  std::map<std::string, Tensor<float>>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  double lr_ = 1e-4;
  double beta1_ = 0.0;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor<float>> m_;
  std::map<std::string, Tensor<float>> v_;
};

/// Every learned component of the system.
struct Networks {
  CorrespondenceNet<float> correspondence;
  TranslationNet<float> translation;
  PatchDiscriminator<float> discriminator;
  PerceptualBackbone<float> backbone;

  Networks(const ModelConfig& config, std::uint64_t seed);

  /// Correspondence ("corr.*") and translation ("trans.*") parameters.
  ParameterSet<float> generator_params();
  /// Discriminator parameters ("disc.*").
  ParameterSet<float> discriminator_params();
};

struct TranslationResult {
  Correspondence<float> correspondence;
  Var<float> output;
};

class Trainer {
 public:
  Trainer(ExperimentConfig config, Dataset data);

  /// Draws the next batch from (seed, epoch, batch index) and runs one step.
  LossReport train_step();
  /// One D update, then one G update, on the given batch.
  LossReport train_step(const Batch& batch);

  /// Auxiliary adaptor channels and whether the warm-up is active at the
  /// current epoch: the domain-A rasters while warming up, Gaussian noise
  /// after, undefined when the model has no auxiliary channels.
  struct WarmupInputs {
    Var<float> aux_a;
    Var<float> aux_b;
    bool active = false;
  };
  WarmupInputs apply_warmup(const Batch& batch) const;

  Batch next_batch() const;

  void checkpoint(const std::filesystem::path& path) const;
  /// Restores parameters, optimizer moments and counters. Throws
  /// CheckpointError when the checkpoint's config hash differs.
  void restore(const std::filesystem::path& path);

  /// Inference on arbitrary inputs (no graph, frozen spectral estimates). The
  /// auxiliary channels, if any, are a fixed noise draw of the run seed.
  TranslationResult translate(const Tensor<float>& x_a, const Tensor<float>& exemplar);

  const ExperimentConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  Networks& networks() { return *nets_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t epoch() const { return iteration_ / batches_per_epoch(); }
  std::int64_t batches_per_epoch() const;
  bool warmup_active() const { return epoch() < config_.model.warmup_epochs; }
  Adam& adam_g() { return adam_g_; }
  Adam& adam_d() { return adam_d_; }

 private:
  Var<float> noise(Index batch, std::uint64_t stream) const;

  ExperimentConfig config_;
  Dataset data_;
  std::unique_ptr<Networks> nets_;
  Adam adam_g_;
  Adam adam_d_;
  std::int64_t iteration_ = 0;
};

/// A trained system restored from a checkpoint's embedded config and weights.
class InferenceModel {
 public:
  /// Throws CheckpointError when the checkpoint is inconsistent with its own
  /// config or, if given, with `expected`.
  static InferenceModel load(const std::filesystem::path& checkpoint, const ExperimentConfig* expected = nullptr);

  /// Same semantics as Trainer::translate.
  TranslationResult translate(const Tensor<float>& x_a, const Tensor<float>& exemplar);
  const ExperimentConfig& config() const { return config_; }
  Networks& networks() { return *nets_; }
  std::int64_t iteration() const { return iteration_; }

 private:
  ExperimentConfig config_;
  std::unique_ptr<Networks> nets_;
  std::int64_t iteration_ = 0;
};

/// Mean |x̂ − x_B| of a trained system on fixed pseudo pairs of every sample.
double reconstruction_l1(Trainer& trainer, const Dataset& data, std::uint64_t seed);

/// Training loop with JSON-lines logging and periodic checkpoints.
struct RunOptions {
  std::filesystem::path run_dir;
  int steps = 0;
  int checkpoint_every = 0;
  std::ostream* progress = nullptr;
};

void run_training(Trainer& trainer, const RunOptions& options);

/// "<config hash>-<UTC timestamp>" under `root`, suffixed "-2", "-3", ... if taken.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const ExperimentConfig& config);

}  // namespace warpsynth

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Training objectives and evaluation metrics. Every L1-style term is a mean
// over all elements.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "warpsynth/config.hpp"
#include "warpsynth/feature_extractor.hpp"

namespace warpsynth {

struct LossReport {
  double feat = 0;
  double perc = 0;
  double context = 0;
  double adv_g = 0;
  double adv_d = 0;
  double domain = 0;
  double reg = 0;
  double total = 0;
  std::optional<double> warmup_ce;  // present only while the warm-up is active
  double recon_l1 = 0;              // mean |x̂ − x_B| over pseudo samples (diagnostic)
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;

  nlohmann::json to_json() const;
  static LossReport from_json(const nlohmann::json& j);
  bool all_finite() const;
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Σ_l λ_l mean|φ_l(a) − φ_l(b)| over the configured layers, from features.
template <typename T>
Var<T> feature_matching_loss(const FeatureSet<T>& out, const FeatureSet<T>& gt, const LossConfig& cfg);
template <typename T>
Var<T> feature_matching_loss(const Var<T>& out, const Var<T>& gt, const PerceptualBackbone<T>& backbone,
                             const LossConfig& cfg);

template <typename T>
Var<T> domain_alignment_loss(const Var<T>& xs, const Var<T>& ys);

/// mean|φ(a) − φ(b)| at cfg.perc_layer.
template <typename T>
Var<T> perceptual_loss(const FeatureSet<T>& out, const FeatureSet<T>& gt, const LossConfig& cfg);
template <typename T>
Var<T> perceptual_loss(const Var<T>& out, const Var<T>& gt, const PerceptualBackbone<T>& backbone,
                       const LossConfig& cfg);

/// Contextual loss between two feature sets, averaged over the batch.
/// Both sets are centered by the exemplar's mean feature and L2-normalized;
/// d_ij = 1 − cos, d̃_ij = d_ij / (min_k d_ik + 1e-5),
/// A_ij = softmax_j((1 − d̃_ij) / bandwidth),
/// loss = −log((1/n) Σ_i max_j A_ij). Spatial sizes may differ.
template <typename T>
Var<T> contextual_loss(const Var<T>& out_features, const Var<T>& exemplar_features, T bandwidth);
/// Σ_l ω_l · contextual loss at the configured layers.
template <typename T>
Var<T> contextual_loss(const FeatureSet<T>& out, const FeatureSet<T>& exemplar, const LossConfig& cfg);
template <typename T>
Var<T> contextual_loss(const Var<T>& out, const Var<T>& exemplar, const PerceptualBackbone<T>& backbone,
                       const LossConfig& cfg);

/// mean|warp_backward(M, warp(M, y↓)) − y↓| with y↓ = y bilinearly resized to the
/// grid unless it already has HW positions.
template <typename T>
Var<T> cycle_regularization(const Var<T>& y, const Var<T>& m, T alpha);

/// −E[h(D_real)] − E[h(−D_fake)], averaged over scales.
template <typename T>
Var<T> hinge_d_loss(const std::vector<Var<T>>& real_logits, const std::vector<Var<T>>& fake_logits);
/// −E[D_fake], averaged over scales.
template <typename T>
Var<T> hinge_g_loss(const std::vector<Var<T>>& fake_logits);

/// Generator-side terms in ψ order: feat, perc, context, adv, domain, reg.
template <typename T>
struct GeneratorTerms {
  Var<T> feat;
  Var<T> perc;
  Var<T> context;
  Var<T> adv;
  Var<T> domain;
  Var<T> reg;
};

std::array<double, 6> psi_weights(const LossConfig& cfg);
double total_generator_loss(const std::array<double, 6>& terms, const LossConfig& cfg);
/// Undefined terms count as zero.
template <typename T>
Var<T> total_generator_loss(const GeneratorTerms<T>& terms, const LossConfig& cfg);

/// Cosine similarity of each sample's flattened maps, averaged over the batch.
template <typename T>
double feature_cosine(const Tensor<T>& a, const Tensor<T>& b);

inline const std::vector<std::string>& semantic_layers() {
  static const std::vector<std::string> layers = {"relu3_2", "relu4_2", "relu5_2"};
  return layers;
}

/// Mean over relu3_2, relu4_2, relu5_2 of the feature cosine.
template <typename T>
double semantic_consistency_score(const FeatureSet<T>& out, const FeatureSet<T>& gt);
template <typename T>
double semantic_consistency_score(const Var<T>& out, const Var<T>& gt, const PerceptualBackbone<T>& backbone);

struct StyleRelevance {
  double color = 0;    // relu1_2
  double texture = 0;  // relu2_2
};

template <typename T>
StyleRelevance style_relevance_score(const Var<T>& out, const Var<T>& exemplar, const PerceptualBackbone<T>& backbone);

}  // namespace warpsynth

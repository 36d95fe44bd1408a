// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Translation network: a learned constant code is decoded by seven modulated
// residual blocks whose positional normalization is denormalized with
// per-position (α, β) predicted from the warped exemplar.

#pragma once

#include <vector>

#include "warpsynth/config.hpp"
#include "warpsynth/nn.hpp"

namespace warpsynth {

template <typename T>
struct PositionalStats {
  Var<T> normalized;
  Tensor<T> mean;    // [B, 1, H, W]
  Tensor<T> stddev;  // [B, 1, H, W], sqrt(var + eps)
};

/// Normalizes across channels at every position (biased variance).
template <typename T>
PositionalStats<T> positional_normalize(const Var<T>& f, T eps);

/// α ⊙ PN(f) + β. α and β must match f's shape.
template <typename T>
Var<T> spade_pn_modulate(const Var<T>& f, const Var<T>& alpha, const Var<T>& beta, T eps);

template <typename T>
struct StyleLayer {
  Var<T> alpha;
  Var<T> beta;
};

/// Bilinear resize of the warped exemplar to one block's resolution, then two
/// 3×3 convolutions. The α head is offset by one so a zero response leaves
/// the normalized activation unscaled.
template <typename T>
class StyleEncoder {
 public:
  StyleEncoder() = default;
  StyleEncoder(const LayerSpec& target, Index hidden, bool spectral, RandomState& rng);

  StyleLayer<T> operator()(const Var<T>& warped);
  void collect(const std::string& prefix, ParameterSet<T>& out);
  const LayerSpec& target() const { return target_; }

 private:
  LayerSpec target_;
  Conv2d<T> hidden_;
  Conv2d<T> head_;
};

template <typename T>
class StyleEncoderBank {
 public:
  StyleEncoderBank() = default;
  StyleEncoderBank(const ModelConfig& config, RandomState& rng);

  /// (α_i, β_i) for generator block `layer` ∈ [0, 7).
  StyleLayer<T> encode(const Var<T>& warped, Index layer);
  Index size() const { return static_cast<Index>(encoders_.size()); }
  StyleEncoder<T>& encoder(Index i) { return encoders_.at(static_cast<std::size_t>(i)); }
  void collect(const std::string& prefix, ParameterSet<T>& out);

 private:
  std::vector<StyleEncoder<T>> encoders_;
};

template <typename T>
class SpadeResBlock {
 public:
  SpadeResBlock() = default;
  SpadeResBlock(Index in, Index out, bool upsample, T eps, bool spectral, RandomState& rng);

  Var<T> operator()(const Var<T>& x, const StyleLayer<T>& style);
  void collect(const std::string& prefix, ParameterSet<T>& out);

 private:
  Conv2d<T> conv1_;
  Conv2d<T> conv2_;
  Conv2d<T> shortcut_;
  bool learned_ = false;
  bool upsample_ = false;
  T eps_ = T(1e-5);
};

/// Self-attention over positions with keys and values pooled by 2, blended
/// into the residual stream by a learned gain initialized at zero.
template <typename T>
class NonLocalBlock {
 public:
  NonLocalBlock() = default;
  NonLocalBlock(Index channels, bool spectral, RandomState& rng);

  Var<T> operator()(const Var<T>& x);
  void collect(const std::string& prefix, ParameterSet<T>& out);
  Var<T>& gain() { return gamma_; }

 private:
  Conv2d<T> query_;
  Conv2d<T> key_;
  Conv2d<T> value_;
  Conv2d<T> out_;
  Var<T> gamma_;
};

template <typename T>
class Generator {
 public:
  Generator() = default;
  Generator(const ModelConfig& config, RandomState& rng);

  /// x̂ = G(z, T_i(r)); r must be [B, 3, corr_size, corr_size].
  Var<T> operator()(const Var<T>& warped, StyleEncoderBank<T>& styles);
  void collect(const std::string& prefix, ParameterSet<T>& out);

  /// Activation shapes entering each modulated block during the last call.
  const std::vector<Shape>& last_block_shapes() const { return block_shapes_; }
  Var<T>& code() { return z_; }

 private:
  ModelConfig config_;
  Var<T> z_;
  Conv2d<T> conv_in_;
  std::vector<SpadeResBlock<T>> blocks_;
  NonLocalBlock<T> nonlocal_;
  Conv2d<T> conv_out_;
  std::vector<Shape> block_shapes_;
};

/// Style encoders plus generator: everything downstream of the warp.
template <typename T>
class TranslationNet {
 public:
  TranslationNet() = default;
  TranslationNet(const ModelConfig& config, RandomState& rng) : styles_(config, rng), generator_(config, rng) {}

  Var<T> operator()(const Var<T>& warped) { return generator_(warped, styles_); }
  void collect(const std::string& prefix, ParameterSet<T>& out) {
    styles_.collect(prefix + ".style", out);
    generator_.collect(prefix + ".gen", out);
  }
  StyleEncoderBank<T>& styles() { return styles_; }
  Generator<T>& generator() { return generator_; }

 private:
  StyleEncoderBank<T> styles_;
  Generator<T> generator_;
};

template <typename T>
Var<T> generate(const Var<T>& warped, Generator<T>& generator, StyleEncoderBank<T>& styles) {
  return generator(warped, styles);
}

}  // namespace warpsynth

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Cross-domain correspondence: both inputs are mapped into a shared feature
// domain, compared through a cosine correlation matrix, and the exemplar is
// warped by a row softmax over that matrix.

#pragma once

#include <utility>
#include <vector>

#include "warpsynth/config.hpp"
#include "warpsynth/nn.hpp"

namespace warpsynth {

enum class Domain { A, B };

/// Per-domain feature pyramid: Conv–IN–LeakyReLU stages that reach corr_size,
/// followed by residual blocks projecting to feature_channels.
template <typename T>
class DomainAdaptor {
 public:
  DomainAdaptor() = default;
  DomainAdaptor(Index in_channels, const ModelConfig& config, RandomState& rng);

  Var<T> operator()(const Var<T>& x);
  void collect(const std::string& prefix, ParameterSet<T>& out);
  Index in_channels() const { return in_channels_; }

 private:
  Index in_channels_ = 0;
  std::vector<ConvNormAct<T>> stages_;
  std::vector<ResBlock<T>> blocks_;
};

template <typename T>
struct Correspondence {
  Var<T> x_features;      // adapted input, [B, C, S, S], unit-norm channel vectors
  Var<T> y_features;      // adapted exemplar
  Var<T> correlation;     // [B, 1, S², S²]
  Var<T> exemplar_small;  // exemplar resized to S×S
  Var<T> warped;          // r_{y→x}, [B, 3, S, S]
};

template <typename T>
class CorrespondenceNet {
 public:
  CorrespondenceNet() = default;
  CorrespondenceNet(const ModelConfig& config, RandomState& rng);

  /// Maps an image of the given domain into the shared domain. `aux` carries
  /// the warm-up mask or noise channels and is required iff aux_channels > 0.
  Var<T> adapt(const Var<T>& x, Domain which, const Var<T>& aux = {});

  Correspondence<T> operator()(const Var<T>& x_a, const Var<T>& aux_a, const Var<T>& exemplar,
                               const Var<T>& aux_b);

  void collect(const std::string& prefix, ParameterSet<T>& out);
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  DomainAdaptor<T> adaptor_a_;
  DomainAdaptor<T> adaptor_b_;
  std::vector<ResBlock<T>> shared_blocks_;
  Conv2d<T> shared_out_;
};

/// Channel-wise centralization: subtracts each position's channel mean.
template <typename T>
Var<T> centralize(const Var<T>& f);

/// M(u, v) = cosine between centralized x(u) and y(v); shape [B, 1, HW, HW].
/// Norms are guarded by `eps`, so degenerate vectors give 0 rather than NaN.
template <typename T>
Var<T> correlation(const Var<T>& x_features, const Var<T>& y_features, T eps = T(1e-8));

/// r(u) = Σ_v softmax_v(α M(u, v)) y(v). `y` is bilinearly resized to the
/// square correlation grid first unless it already has HW positions.
template <typename T>
Var<T> warp(const Var<T>& m, const Var<T>& y, T alpha);

/// r'(v) = Σ_u softmax_u(α M(u, v)) r(u): the column-softmax back-warp.
template <typename T>
Var<T> warp_backward(const Var<T>& m, const Var<T>& r, T alpha);

struct GridPoint {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// For each query position u of sample `batch`, argmax_v M(u, v) as grid
/// coordinates; ties go to the smallest linear index. Throws
/// std::out_of_range for queries outside the grid.
template <typename T>
std::vector<GridPoint> export_sparse_correspondence(const Tensor<T>& m, Index grid_side,
                                                    const std::vector<GridPoint>& queries, Index batch = 0);

}  // namespace warpsynth

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable tensor operations. All image-like tensors are [n, c, h, w];
// matrices are [batch, 1, rows, cols].

#pragma once

#include <vector>

#include "warpsynth/autograd.hpp"

namespace warpsynth::ops {

// Elementwise arithmetic (operands must have identical shapes).
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);
/// a * s where s is a single-element variable.
template <typename T> Var<T> scale_by(const Var<T>& a, const Var<T>& s);
/// Σ weights[i] * terms[i] over single-element terms.
template <typename T> Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights);

// Activations.
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2));
template <typename T> Var<T> tanh(const Var<T>& x);

// Convolution with zero padding. weight [co, ci, k, k]; bias [1, co, 1, 1] or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, Index stride, Index padding);

/// W / σ(W) with σ = uᵀ W v estimated by power iteration on the [co, ci*k*k]
/// reshaping. When `update` is set one power-iteration step refreshes `u`
/// before use; otherwise the stored `u` is used as is.
template <typename T>
Var<T> spectral_normalize(const Var<T>& weight, Tensor<T>& u, bool update, T* sigma_out = nullptr);

// Normalization.
/// Per-sample, per-channel statistics over spatial positions (no affine).
template <typename T> Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));
/// Per-position statistics across channels: (x - μ_hw) / sqrt(var_hw + eps).
template <typename T> Var<T> positional_norm(const Var<T>& x, T eps);
/// Subtracts the channel mean at every spatial position.
template <typename T> Var<T> channel_center(const Var<T>& x);
/// Divides each position's channel vector by max(‖·‖₂, eps).
template <typename T> Var<T> l2_normalize_channels(const Var<T>& x, T eps = T(1e-8));

// Resampling.
template <typename T> Var<T> upsample_nearest2(const Var<T>& x);
template <typename T> Var<T> avg_pool2(const Var<T>& x);
template <typename T> Var<T> max_pool2(const Var<T>& x);
/// Bilinear resize with half-pixel centers (no corner alignment).
template <typename T> Var<T> resize_bilinear(const Var<T>& x, Index h, Index w);

// Layout.
template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& xs);
template <typename T> Var<T> slice_channels(const Var<T>& x, Index begin, Index count);
template <typename T> Var<T> reshape(const Var<T>& x, const Shape& shape);
/// Broadcasts a batch-1 tensor to `n` samples.
template <typename T> Var<T> repeat_batch(const Var<T>& x, Index n);
template <typename T> Var<T> gather_batch(const Var<T>& x, const std::vector<Index>& indices);

// Matrix ops on [batch, 1, rows, cols].
/// op(a) * op(b) per batch entry; a batch of 1 broadcasts.
template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_a = false, bool transpose_b = false);
enum class Axis { Rows, Cols };
/// softmax(alpha * m) normalized along each row (Axis::Rows: over the column
/// index within a row) or along each column (Axis::Cols).
template <typename T> Var<T> softmax(const Var<T>& m, T alpha, Axis axis);

// Reductions to a single element [1, 1, 1, 1].
template <typename T> Var<T> mean(const Var<T>& x);
/// mean |a - b|
template <typename T> Var<T> l1_loss(const Var<T>& a, const Var<T>& b);
/// mean max(0, 1 - s * x): the hinge penalty −h(s·x) with h(t) = min(0, t − 1).
template <typename T> Var<T> hinge_mean(const Var<T>& x, T s);
/// -mean over pixels of Σ_k target_k log(max(prob_k, eps)).
template <typename T> Var<T> cross_entropy(const Var<T>& prob, const Tensor<T>& target, T eps);

}  // namespace warpsynth::ops

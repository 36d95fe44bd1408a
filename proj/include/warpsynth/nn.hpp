// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Parameterized building blocks shared by the networks.

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "warpsynth/ops.hpp"
#include "warpsynth/random.hpp"

namespace warpsynth {

/// Flat view of a network's trainable parameters and persistent buffers,
/// keyed by dotted names ("gen.block3.conv1.weight").
template <typename T>
struct ParameterSet {
  std::vector<std::pair<std::string, Var<T>>> params;
  std::vector<std::pair<std::string, Tensor<T>*>> buffers;

  void add(const std::string& name, const Var<T>& v) { params.emplace_back(name, v); }
  void add_buffer(const std::string& name, Tensor<T>* t) { buffers.emplace_back(name, t); }
  void append(const ParameterSet& other) {
    params.insert(params.end(), other.params.begin(), other.params.end());
    buffers.insert(buffers.end(), other.buffers.begin(), other.buffers.end());
  }
  Index count() const {
    Index total = 0;
    for (const auto& [_, v] : params) total += v.value().size();
    return total;
  }
  void zero_grad() {
    for (auto& [_, v] : params) v.zero_grad();
  }
};

bool spectral_updates_enabled();

/// Freezes spectral-normalization power iteration in the current thread:
/// the stored singular vector is used as is. Inference, gradient checks and
/// the discriminator phase's generator pass run under this guard.
class FrozenSpectralGuard {
 public:
  FrozenSpectralGuard();
  ~FrozenSpectralGuard();
  FrozenSpectralGuard(const FrozenSpectralGuard&) = delete;
  FrozenSpectralGuard& operator=(const FrozenSpectralGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
Var<T> parameter(Tensor<T> value) {
  return Var<T>(std::move(value), true);
}

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Index in, Index out, Index kernel, Index stride, Index padding, bool spectral, RandomState& rng)
      : stride_(stride), padding_(padding), spectral_(spectral) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
    weight_ = parameter(rng.uniform_tensor<T>(Shape{out, in, kernel, kernel}, -bound, bound));
    bias_ = parameter(rng.uniform_tensor<T>(Shape{1, out, 1, 1}, -bound, bound));
    if (spectral_) {
      u_ = rng.normal_tensor<T>(Shape{1, 1, 1, out});
      u_.vec().normalize();
    }
  }

  Var<T> operator()(const Var<T>& x) {
    Var<T> w = spectral_ ? ops::spectral_normalize(weight_, u_, spectral_updates_enabled()) : weight_;
    return ops::conv2d(x, w, bias_, stride_, padding_);
  }

  void collect(const std::string& prefix, ParameterSet<T>& out) {
    out.add(prefix + ".weight", weight_);
    out.add(prefix + ".bias", bias_);
    if (spectral_) out.add_buffer(prefix + ".u", &u_);
  }

  Var<T>& weight() { return weight_; }
  Var<T>& bias() { return bias_; }
  Tensor<T>& singular_vector() { return u_; }
  bool spectral() const { return spectral_; }
  Index out_channels() const { return weight_.shape().n; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  Tensor<T> u_;
  Index stride_ = 1;
  Index padding_ = 0;
  bool spectral_ = false;
};

/// Conv–InstanceNorm–LeakyReLU.
template <typename T>
class ConvNormAct {
 public:
  ConvNormAct() = default;
  ConvNormAct(Index in, Index out, Index kernel, Index stride, Index padding, bool spectral, RandomState& rng)
      : conv_(in, out, kernel, stride, padding, spectral, rng) {}

  Var<T> operator()(const Var<T>& x) { return ops::leaky_relu(ops::instance_norm(conv_(x)), T(0.2)); }
  void collect(const std::string& prefix, ParameterSet<T>& out) { conv_.collect(prefix + ".conv", out); }

 private:
  Conv2d<T> conv_;
};

/// Two 3×3 convolutions with instance normalization and an identity (or 1×1)
/// shortcut.
template <typename T>
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(Index in, Index out, bool spectral, RandomState& rng)
      : conv1_(in, out, 3, 1, 1, spectral, rng), conv2_(out, out, 3, 1, 1, spectral, rng), learned_(in != out) {
    if (learned_) shortcut_ = Conv2d<T>(in, out, 1, 1, 0, spectral, rng);
  }

  Var<T> operator()(const Var<T>& x) {
    Var<T> h = ops::leaky_relu(ops::instance_norm(conv1_(x)), T(0.2));
    h = ops::instance_norm(conv2_(h));
    return ops::add(learned_ ? shortcut_(x) : x, h);
  }

  void collect(const std::string& prefix, ParameterSet<T>& out) {
    conv1_.collect(prefix + ".conv1", out);
    conv2_.collect(prefix + ".conv2", out);
    if (learned_) shortcut_.collect(prefix + ".shortcut", out);
  }

 private:
  Conv2d<T> conv1_;
  Conv2d<T> conv2_;
  Conv2d<T> shortcut_;
  bool learned_ = false;
};

}  // namespace warpsynth

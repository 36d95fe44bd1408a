// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Conditional multi-scale patch critic with hinge logits.

#pragma once

#include <vector>

#include "warpsynth/config.hpp"
#include "warpsynth/nn.hpp"

namespace warpsynth {

/// One scale: a k4s2 stack (instance norm after every layer but the first,
/// LeakyReLU 0.2) closed by a k3s1 convolution to one logit channel.
template <typename T>
class PatchCritic {
 public:
  PatchCritic() = default;
  PatchCritic(Index in_channels, const ModelConfig& config, RandomState& rng);

  Var<T> operator()(const Var<T>& x);
  void collect(const std::string& prefix, ParameterSet<T>& out);

 private:
  std::vector<Conv2d<T>> layers_;
  Conv2d<T> head_;
};

template <typename T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const ModelConfig& config, RandomState& rng);

  /// One logit grid per scale; scale s sees the input average-pooled s times.
  std::vector<Var<T>> operator()(const Var<T>& x_a, const Var<T>& candidate);
  void collect(const std::string& prefix, ParameterSet<T>& out);
  Index scales() const { return static_cast<Index>(critics_.size()); }
  PatchCritic<T>& critic(Index s) { return critics_.at(static_cast<std::size_t>(s)); }

 private:
  ModelConfig config_;
  std::vector<PatchCritic<T>> critics_;
};

template <typename T>
std::vector<Var<T>> criticize(const Var<T>& x_a, const Var<T>& candidate, PatchDiscriminator<T>& critic) {
  return critic(x_a, candidate);
}

}  // namespace warpsynth

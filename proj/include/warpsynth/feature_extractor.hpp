// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Frozen perceptual backbone exposing VGG-style layer names (relu{stage}_{conv}).
//
// deterministic-small: five seeded stages of two 3×3 conv+ReLU layers with
// widths base·(1, 2, 4, 8, 8) and 2×2 max pooling between stages. Inputs in
// [-1, 1] are fed as is.
//
// pretrained-vgg19: the VGG-19 convolutional stack (2, 2, 4, 4, 4 convs per
// stage) loaded from a weight archive. Inputs are mapped to [0, 1] and
// standardized per channel with mean (0.485, 0.456, 0.406) and standard
// deviation (0.229, 0.224, 0.225).

#pragma once

#include <map>
#include <string>
#include <vector>

#include "warpsynth/config.hpp"
#include "warpsynth/nn.hpp"

namespace warpsynth {

template <typename T>
using FeatureSet = std::map<std::string, Var<T>>;

template <typename T>
class PerceptualBackbone {
 public:
  PerceptualBackbone() = default;
  explicit PerceptualBackbone(const ModelConfig& config);

  /// One feature map per requested layer. Throws std::invalid_argument for an
  /// unknown layer name. Gradients flow to the image, never to the weights.
  FeatureSet<T> extract(const Var<T>& image, const std::vector<std::string>& layers) const;

  std::vector<std::string> layer_names() const;
  /// Downsampling factor of a layer relative to the input.
  Index stride(const std::string& layer) const;
  BackboneMode mode() const { return mode_; }
  /// Frozen weights, exposed for isolation checks.
  const std::vector<Var<T>>& weights() const { return weights_; }

 private:
  struct Layer {
    std::string name;
    Index stage = 0;
  };
  BackboneMode mode_ = BackboneMode::DeterministicSmall;
  std::vector<Layer> layers_;
  std::vector<Var<T>> weights_;  // weight, bias pairs per conv
};

template <typename T>
FeatureSet<T> extract(const Var<T>& image, const std::vector<std::string>& layers,
                      const PerceptualBackbone<T>& backbone) {
  return backbone.extract(image, layers);
}

}  // namespace warpsynth

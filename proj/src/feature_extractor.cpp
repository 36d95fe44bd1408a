// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/feature_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "warpsynth/archive.hpp"

namespace warpsynth {
namespace {

constexpr double kMean[3] = {0.485, 0.456, 0.406};
constexpr double kStd[3] = {0.229, 0.224, 0.225};

}  // namespace

template <typename T>
PerceptualBackbone<T>::PerceptualBackbone(const ModelConfig& config) : mode_(config.backbone) {
  std::vector<Index> convs;
  std::vector<Index> widths;
  if (mode_ == BackboneMode::DeterministicSmall) {
    const Index b = config.backbone_base_channels;
    convs = {2, 2, 2, 2, 2};
    widths = {b, 2 * b, 4 * b, 8 * b, 8 * b};
  } else {
    convs = {2, 2, 4, 4, 4};
    widths = {64, 128, 256, 512, 512};
  }
  for (std::size_t s = 0; s < convs.size(); ++s)
    for (Index i = 1; i <= convs[s]; ++i)
      layers_.push_back({"relu" + std::to_string(s + 1) + "_" + std::to_string(i), static_cast<Index>(s)});

  if (mode_ == BackboneMode::DeterministicSmall) {
    RandomState rng(config.backbone_seed);
    Index in = 3;
    for (const auto& layer : layers_) {
      const Index out = widths[static_cast<std::size_t>(layer.stage)];
      // He-normal weights keep activation scale roughly constant with depth.
      const double std = std::sqrt(2.0 / static_cast<double>(in * 9));
      weights_.emplace_back(rng.normal_tensor<T>(Shape{out, in, 3, 3}, std));
      weights_.emplace_back(rng.uniform_tensor<T>(Shape{1, out, 1, 1}, -0.05, 0.05));
      in = out;
    }
    return;
  }

  if (config.backbone_weights.empty())
    throw ConfigError("model.backbone_weights: required for pretrained-vgg19 mode");
  ArchiveReader archive(config.backbone_weights);
  if (!config.backbone_checksum.empty() && hash_hex(archive.file_checksum()) != config.backbone_checksum) {
    throw ConfigError("model.backbone_checksum: " + config.backbone_weights + " has checksum " +
                      hash_hex(archive.file_checksum()) + ", expected " + config.backbone_checksum);
  }
  Index in = 3;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Index out = widths[static_cast<std::size_t>(layers_[i].stage)];
    const std::string key = "conv" + std::to_string(i);
    Tensor<T> w = archive.get<T>(key + ".weight");
    Tensor<T> b = archive.get<T>(key + ".bias");
    require_shape(w.shape(), Shape{out, in, 3, 3}, "vgg19 weight");
    weights_.emplace_back(std::move(w));
    weights_.emplace_back(b.reshaped(Shape{1, out, 1, 1}));
    in = out;
  }
}

template <typename T>
FeatureSet<T> PerceptualBackbone<T>::extract(const Var<T>& image, const std::vector<std::string>& layers) const {
  std::size_t deepest = 0;
  for (const auto& name : layers) {
    auto it = std::find_if(layers_.begin(), layers_.end(), [&](const Layer& l) { return l.name == name; });
    if (it == layers_.end()) throw std::invalid_argument("unknown backbone layer '" + name + "'");
    deepest = std::max(deepest, static_cast<std::size_t>(it - layers_.begin()) + 1);
  }
  if (image.shape().c != 3) throw ShapeError("extract: expected a 3-channel image, got " + image.shape().str());

  Var<T> h = image;
  if (mode_ == BackboneMode::PretrainedVgg19) {
    const Shape s = image.shape();
    Tensor<T> scale(Shape{s.n, 3, s.h, s.w});
    Tensor<T> shift(Shape{s.n, 3, s.h, s.w});
    for (Index n = 0; n < s.n; ++n)
      for (Index c = 0; c < 3; ++c) {
        scale.channels(n).row(c).setConstant(static_cast<T>(0.5 / kStd[c]));
        shift.channels(n).row(c).setConstant(static_cast<T>((0.5 - kMean[c]) / kStd[c]));
      }
    h = ops::add(ops::mul(h, Var<T>(scale)), Var<T>(shift));
  }

  FeatureSet<T> out;
  for (std::size_t i = 0; i < deepest; ++i) {
    if (i > 0 && layers_[i].stage != layers_[i - 1].stage) h = ops::max_pool2(h);
    h = ops::relu(ops::conv2d(h, weights_[2 * i], weights_[2 * i + 1], 1, 1));
    if (std::find(layers.begin(), layers.end(), layers_[i].name) != layers.end()) out[layers_[i].name] = h;
  }
  return out;
}

template <typename T>
std::vector<std::string> PerceptualBackbone<T>::layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : layers_) names.push_back(l.name);
  return names;
}

template <typename T>
Index PerceptualBackbone<T>::stride(const std::string& layer) const {
  for (const auto& l : layers_)
    if (l.name == layer) return Index(1) << l.stage;
  throw std::invalid_argument("unknown backbone layer '" + layer + "'");
}

template class PerceptualBackbone<float>;
template class PerceptualBackbone<double>;

}  // namespace warpsynth

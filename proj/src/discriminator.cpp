// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/discriminator.hpp"

#include <algorithm>

namespace warpsynth {

template <typename T>
PatchCritic<T>::PatchCritic(Index in_channels, const ModelConfig& config, RandomState& rng) {
  const Index base = config.disc_base_channels;
  Index channels = in_channels;
  for (int i = 0; i < config.disc_layers; ++i) {
    const Index next = std::min<Index>(8 * base, base << i);
    layers_.emplace_back(channels, next, 4, 2, 1, config.spectral_norm, rng);
    channels = next;
  }
  head_ = Conv2d<T>(channels, 1, 3, 1, 1, config.spectral_norm, rng);
}

template <typename T>
Var<T> PatchCritic<T>::operator()(const Var<T>& x) {
  Var<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i > 0) h = ops::instance_norm(h);
    h = ops::leaky_relu(h, T(0.2));
  }
  return head_(h);
}

template <typename T>
void PatchCritic<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
  head_.collect(prefix + ".head", out);
}

template <typename T>
PatchDiscriminator<T>::PatchDiscriminator(const ModelConfig& config, RandomState& rng) : config_(config) {
  const int min_side = config.image_size >> (config.disc_scales - 1);
  if (config.disc_scales < 1 || (min_side >> config.disc_layers) < 1)
    throw ConfigError("model.disc_layers: critic stack too deep for image_size " + std::to_string(config.image_size));
  for (int s = 0; s < config.disc_scales; ++s) critics_.emplace_back(config.input_channels + 3, config, rng);
}

template <typename T>
std::vector<Var<T>> PatchDiscriminator<T>::operator()(const Var<T>& x_a, const Var<T>& candidate) {
  const Shape s = candidate.shape();
  require_shape(s, Shape{s.n, 3, config_.image_size, config_.image_size}, "criticize: candidate");
  require_shape(x_a.shape(), Shape{s.n, config_.input_channels, s.h, s.w}, "criticize: domain-A input");
  Var<T> x = ops::concat_channels<T>({x_a, candidate});
  std::vector<Var<T>> logits;
  for (std::size_t i = 0; i < critics_.size(); ++i) {
    if (i > 0) x = ops::avg_pool2(x);
    logits.push_back(critics_[i](x));
  }
  return logits;
}

template <typename T>
void PatchDiscriminator<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  for (std::size_t i = 0; i < critics_.size(); ++i) critics_[i].collect(prefix + ".scale" + std::to_string(i), out);
}

template class PatchCritic<float>;
template class PatchCritic<double>;
template class PatchDiscriminator<float>;
template class PatchDiscriminator<double>;

}  // namespace warpsynth

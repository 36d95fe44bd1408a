// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/translation.hpp"

#include <stdexcept>

namespace warpsynth {

template <typename T>
PositionalStats<T> positional_normalize(const Var<T>& f, T eps) {
  const Shape s = f.shape();
  if (s.c < 2) throw ShapeError("positional_normalize: needs at least 2 channels, got " + s.str());
  PositionalStats<T> out;
  out.normalized = ops::positional_norm(f, eps);
  out.mean = Tensor<T>(Shape{s.n, 1, s.h, s.w});
  out.stddev = Tensor<T>(Shape{s.n, 1, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) {
    const auto x = f.value().channels(n);
    const auto mu = x.colwise().mean().eval();
    const auto var = ((x.rowwise() - mu).array().square().colwise().sum() / T(s.c)).eval();
    out.mean.channels(n) = mu;
    out.stddev.channels(n) = (var + eps).sqrt().matrix();
  }
  return out;
}

template <typename T>
Var<T> spade_pn_modulate(const Var<T>& f, const Var<T>& alpha, const Var<T>& beta, T eps) {
  require_shape(alpha.shape(), f.shape(), "spade_pn_modulate alpha");
  require_shape(beta.shape(), f.shape(), "spade_pn_modulate beta");
  return ops::add(ops::mul(alpha, ops::positional_norm(f, eps)), beta);
}

template <typename T>
StyleEncoder<T>::StyleEncoder(const LayerSpec& target, Index hidden, bool spectral, RandomState& rng)
    : target_(target),
      hidden_(3, hidden, 3, 1, 1, spectral, rng),
      head_(hidden, 2 * Index(target.channels), 3, 1, 1, spectral, rng) {}

template <typename T>
StyleLayer<T> StyleEncoder<T>::operator()(const Var<T>& warped) {
  Var<T> r = ops::resize_bilinear(warped, target_.height, target_.width);
  Var<T> h = head_(ops::leaky_relu(hidden_(r), T(0.2)));
  const Index c = target_.channels;
  return {ops::add_scalar(ops::slice_channels(h, 0, c), T(1)), ops::slice_channels(h, c, c)};
}

template <typename T>
void StyleEncoder<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  hidden_.collect(prefix + ".conv1", out);
  head_.collect(prefix + ".conv2", out);
}

template <typename T>
StyleEncoderBank<T>::StyleEncoderBank(const ModelConfig& config, RandomState& rng) {
  for (const auto& spec : config.generator_layers)
    encoders_.emplace_back(spec, config.style_hidden_channels, config.spectral_norm, rng);
}

template <typename T>
StyleLayer<T> StyleEncoderBank<T>::encode(const Var<T>& warped, Index layer) {
  if (layer < 0 || layer >= size()) throw std::out_of_range("encode_style: layer " + std::to_string(layer));
  return encoders_[static_cast<std::size_t>(layer)](warped);
}

template <typename T>
void StyleEncoderBank<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  for (std::size_t i = 0; i < encoders_.size(); ++i) encoders_[i].collect(prefix + std::to_string(i), out);
}

template <typename T>
SpadeResBlock<T>::SpadeResBlock(Index in, Index out, bool upsample, T eps, bool spectral, RandomState& rng)
    : conv1_(in, out, 3, 1, 1, spectral, rng),
      conv2_(out, out, 3, 1, 1, spectral, rng),
      learned_(in != out),
      upsample_(upsample),
      eps_(eps) {
  if (learned_) shortcut_ = Conv2d<T>(in, out, 1, 1, 0, spectral, rng);
}

template <typename T>
Var<T> SpadeResBlock<T>::operator()(const Var<T>& x, const StyleLayer<T>& style) {
  Var<T> h = ops::leaky_relu(spade_pn_modulate(x, style.alpha, style.beta, eps_), T(0.2));
  Var<T> skip = x;
  if (upsample_) {
    h = ops::upsample_nearest2(h);
    skip = ops::upsample_nearest2(skip);
  }
  h = conv2_(ops::leaky_relu(conv1_(h), T(0.2)));
  return ops::add(learned_ ? shortcut_(skip) : skip, h);
}

template <typename T>
void SpadeResBlock<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
  if (learned_) shortcut_.collect(prefix + ".shortcut", out);
}

template <typename T>
NonLocalBlock<T>::NonLocalBlock(Index channels, bool spectral, RandomState& rng)
    : query_(channels, std::max<Index>(1, channels / 8), 1, 1, 0, spectral, rng),
      key_(channels, std::max<Index>(1, channels / 8), 1, 1, 0, spectral, rng),
      value_(channels, std::max<Index>(1, channels / 2), 1, 1, 0, spectral, rng),
      out_(std::max<Index>(1, channels / 2), channels, 1, 1, 0, spectral, rng),
      gamma_(parameter(Tensor<T>(Shape{1, 1, 1, 1}))) {}

template <typename T>
Var<T> NonLocalBlock<T>::operator()(const Var<T>& x) {
  const Shape s = x.shape();
  const bool pool = s.h >= 2 && s.h % 2 == 0 && s.w % 2 == 0;
  Var<T> q = query_(x);
  Var<T> k = key_(x);
  Var<T> v = value_(x);
  if (pool) {
    k = ops::avg_pool2(k);
    v = ops::avg_pool2(v);
  }
  const Index hw = s.plane();
  const Index kv = k.shape().plane();
  Var<T> qf = ops::reshape(q, Shape{s.n, 1, q.shape().c, hw});
  Var<T> kf = ops::reshape(k, Shape{s.n, 1, k.shape().c, kv});
  Var<T> vf = ops::reshape(v, Shape{s.n, 1, v.shape().c, kv});
  Var<T> attention = ops::softmax(ops::bmm(qf, kf, true, false), T(1), ops::Axis::Rows);  // [B,1,HW,kv]
  Var<T> o = ops::reshape(ops::bmm(vf, attention, false, true), Shape{s.n, v.shape().c, s.h, s.w});
  return ops::add(x, ops::scale_by(out_(o), gamma_));
}

template <typename T>
void NonLocalBlock<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  query_.collect(prefix + ".query", out);
  key_.collect(prefix + ".key", out);
  value_.collect(prefix + ".value", out);
  out_.collect(prefix + ".out", out);
  out.add(prefix + ".gamma", gamma_);
}

template <typename T>
Generator<T>::Generator(const ModelConfig& config, RandomState& rng) : config_(config) {
  validate(config);
  const auto& layers = config.generator_layers;
  const bool sn = config.spectral_norm;
  const LayerSpec& first = layers.front();
  z_ = parameter(rng.normal_tensor<T>(Shape{1, first.channels, first.height, first.width}));
  conv_in_ = Conv2d<T>(first.channels, first.channels, 3, 1, 1, sn, rng);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool last = i + 1 == layers.size();
    const int next_h = last ? config.image_size : layers[i + 1].height;
    const int next_c = last ? layers[i].channels : layers[i + 1].channels;
    blocks_.emplace_back(layers[i].channels, next_c, next_h == 2 * layers[i].height,
                         static_cast<T>(config.pn_epsilon), sn, rng);
  }
  if (config.use_nonlocal) nonlocal_ = NonLocalBlock<T>(layers[5].channels, sn, rng);
  conv_out_ = Conv2d<T>(layers.back().channels, 3, 3, 1, 1, sn, rng);
}

template <typename T>
Var<T> Generator<T>::operator()(const Var<T>& warped, StyleEncoderBank<T>& styles) {
  const Shape rs = warped.shape();
  require_shape(rs, Shape{rs.n, 3, config_.corr_size, config_.corr_size}, "generate: warped exemplar");
  if (styles.size() != static_cast<Index>(blocks_.size())) throw ShapeError("generate: style bank size mismatch");
  block_shapes_.clear();
  Var<T> x = conv_in_(ops::repeat_batch(z_, rs.n));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& spec = config_.generator_layers[i];
    require_shape(x.shape(), Shape{rs.n, spec.channels, spec.height, spec.width}, "generator block input");
    block_shapes_.push_back(x.shape());
    x = blocks_[i](x, styles.encode(warped, static_cast<Index>(i)));
    if (i == 4 && config_.use_nonlocal) x = nonlocal_(x);
  }
  return ops::tanh(conv_out_(ops::leaky_relu(x, T(0.2))));
}

template <typename T>
void Generator<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  out.add(prefix + ".z", z_);
  conv_in_.collect(prefix + ".conv_in", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
  if (config_.use_nonlocal) nonlocal_.collect(prefix + ".nonlocal", out);
  conv_out_.collect(prefix + ".conv_out", out);
}

#define WARPSYNTH_INSTANTIATE_TRANSLATION(T)                                              \
  template PositionalStats<T> positional_normalize(const Var<T>&, T);                   \
  template Var<T> spade_pn_modulate(const Var<T>&, const Var<T>&, const Var<T>&, T);    \
  template class StyleEncoder<T>;                                                       \
  template class StyleEncoderBank<T>;                                                   \
  template class SpadeResBlock<T>;                                                      \
  template class NonLocalBlock<T>;                                                      \
  template class Generator<T>;

WARPSYNTH_INSTANTIATE_TRANSLATION(float)
WARPSYNTH_INSTANTIATE_TRANSLATION(double)

}  // namespace warpsynth

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/correspondence.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace warpsynth {

template <typename T>
DomainAdaptor<T>::DomainAdaptor(Index in_channels, const ModelConfig& config, RandomState& rng)
    : in_channels_(in_channels) {
  const Index base = config.adaptor_base_channels;
  const Index cap = 8 * base;
  const int downsamples = std::countr_zero(static_cast<unsigned>(config.image_size / config.corr_size));
  Index channels = base;
  stages_.emplace_back(in_channels, channels, 3, 1, 1, false, rng);
  // Each halving is a k4s2 stage followed by a k3s1 stage, widening toward 8×base.
  for (int d = 1; d <= downsamples; ++d) {
    const Index down = std::min(cap, base << (2 * d - 1));
    const Index flat = std::min(cap, base << (2 * d));
    stages_.emplace_back(channels, down, 4, 2, 1, false, rng);
    stages_.emplace_back(down, flat, 3, 1, 1, false, rng);
    channels = flat;
  }
  for (int i = 0; i < config.adaptor_resblocks; ++i) {
    blocks_.emplace_back(i == 0 ? channels : config.feature_channels, config.feature_channels, false, rng);
  }
}

template <typename T>
Var<T> DomainAdaptor<T>::operator()(const Var<T>& x) {
  Var<T> h = x;
  for (auto& stage : stages_) h = stage(h);
  for (auto& block : blocks_) h = block(h);
  return h;
}

template <typename T>
void DomainAdaptor<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i].collect(prefix + ".stage" + std::to_string(i), out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".res" + std::to_string(i), out);
}

template <typename T>
CorrespondenceNet<T>::CorrespondenceNet(const ModelConfig& config, RandomState& rng)
    : config_(config),
      adaptor_a_(config.input_channels + config.aux_channels, config, rng),
      adaptor_b_(3 + config.aux_channels, config, rng) {
  for (int i = 0; i < config.shared_resblocks; ++i)
    shared_blocks_.emplace_back(config.feature_channels, config.feature_channels, false, rng);
  shared_out_ = Conv2d<T>(config.feature_channels, config.feature_channels, 1, 1, 0, false, rng);
}

template <typename T>
Var<T> CorrespondenceNet<T>::adapt(const Var<T>& x, Domain which, const Var<T>& aux) {
  const Index want = which == Domain::A ? config_.input_channels : 3;
  const Shape s = x.shape();
  if (s.c != want) {
    throw ShapeError(std::string("adapt: domain ") + (which == Domain::A ? "A" : "B") + " expects " +
                     std::to_string(want) + " channels, got " + std::to_string(s.c));
  }
  if (s.h != config_.image_size || s.w != config_.image_size)
    throw ShapeError("adapt: input must be " + std::to_string(config_.image_size) + " pixels square, got " + s.str());
  Var<T> input = x;
  if (config_.aux_channels > 0) {
    if (!aux.defined()) throw ShapeError("adapt: auxiliary channels required by this model");
    require_shape(aux.shape(), Shape{s.n, config_.aux_channels, s.h, s.w}, "adapt auxiliary input");
    input = ops::concat_channels<T>({x, aux});
  }
  Var<T> h = which == Domain::A ? adaptor_a_(input) : adaptor_b_(input);
  for (auto& block : shared_blocks_) h = block(h);
  h = shared_out_(h);
  return ops::l2_normalize_channels(h, T(1e-8));
}

template <typename T>
Correspondence<T> CorrespondenceNet<T>::operator()(const Var<T>& x_a, const Var<T>& aux_a, const Var<T>& exemplar,
                                                   const Var<T>& aux_b) {
  Correspondence<T> out;
  out.x_features = adapt(x_a, Domain::A, aux_a);
  out.y_features = adapt(exemplar, Domain::B, aux_b);
  out.correlation = correlation(out.x_features, out.y_features);
  out.exemplar_small = ops::resize_bilinear(exemplar, config_.corr_size, config_.corr_size);
  out.warped = warp(out.correlation, out.exemplar_small, static_cast<T>(config_.softmax_alpha));
  return out;
}

template <typename T>
void CorrespondenceNet<T>::collect(const std::string& prefix, ParameterSet<T>& out) {
  adaptor_a_.collect(prefix + ".adaptor_a", out);
  adaptor_b_.collect(prefix + ".adaptor_b", out);
  for (std::size_t i = 0; i < shared_blocks_.size(); ++i)
    shared_blocks_[i].collect(prefix + ".shared.res" + std::to_string(i), out);
  shared_out_.collect(prefix + ".shared.out", out);
}

template <typename T>
Var<T> centralize(const Var<T>& f) {
  return ops::channel_center(f);
}

template <typename T>
Var<T> correlation(const Var<T>& x_features, const Var<T>& y_features, T eps) {
  require_shape(y_features.shape(), x_features.shape(), "correlation");
  const Shape s = x_features.shape();
  const Shape flat{s.n, 1, s.c, s.plane()};
  Var<T> x = ops::reshape(ops::l2_normalize_channels(centralize(x_features), eps), flat);
  Var<T> y = ops::reshape(ops::l2_normalize_channels(centralize(y_features), eps), flat);
  return ops::bmm(x, y, true, false);
}

template <typename T>
Var<T> warp(const Var<T>& m, const Var<T>& y, T alpha) {
  const Shape ms = m.shape();
  const Shape ys = y.shape();
  const Index hw = ms.h;
  if (ms.w != hw) throw ShapeError("warp: correlation must be square");
  Var<T> small = y;
  if (ys.plane() != hw) {
    Index side = 0;
    while (side * side < hw) ++side;
    if (side * side != hw) throw ShapeError("warp: exemplar does not match a non-square correlation grid");
    small = ops::resize_bilinear(y, side, side);
  }
  const Shape ss = small.shape();
  Var<T> weights = ops::softmax(m, alpha, ops::Axis::Rows);
  Var<T> flat = ops::reshape(small, Shape{ss.n, 1, ss.c, hw});
  return ops::reshape(ops::bmm(flat, weights, false, true), ss);
}

template <typename T>
Var<T> warp_backward(const Var<T>& m, const Var<T>& r, T alpha) {
  const Shape ms = m.shape();
  const Shape rs = r.shape();
  if (rs.plane() != ms.h || ms.h != ms.w) throw ShapeError("warp_backward: warped image does not match correlation");
  Var<T> weights = ops::softmax(m, alpha, ops::Axis::Cols);
  Var<T> flat = ops::reshape(r, Shape{rs.n, 1, rs.c, rs.plane()});
  return ops::reshape(ops::bmm(flat, weights, false, false), rs);
}

template <typename T>
std::vector<GridPoint> export_sparse_correspondence(const Tensor<T>& m, Index grid_side,
                                                    const std::vector<GridPoint>& queries, Index batch) {
  const Shape s = m.shape();
  if (s.h != grid_side * grid_side || s.w != s.h) throw ShapeError("export_sparse_correspondence: grid mismatch");
  if (batch < 0 || batch >= s.n) throw std::out_of_range("export_sparse_correspondence: batch index out of range");
  std::vector<GridPoint> result;
  result.reserve(queries.size());
  const auto mat = m.matrix(batch);
  for (const auto& q : queries) {
    if (q.row < 0 || q.row >= grid_side || q.col < 0 || q.col >= grid_side) {
      throw std::out_of_range("query point (" + std::to_string(q.row) + ", " + std::to_string(q.col) +
                              ") outside the " + std::to_string(grid_side) + "x" + std::to_string(grid_side) + " grid");
    }
    const Index u = q.row * grid_side + q.col;
    Index best = 0;
    for (Index v = 1; v < s.w; ++v)
      if (mat(u, v) > mat(u, best)) best = v;  // strict: first maximum wins
    result.push_back({best / grid_side, best % grid_side});
  }
  return result;
}

#define WARPSYNTH_INSTANTIATE_CORR(T)                                                                  \
  template class DomainAdaptor<T>;                                                                   \
  template class CorrespondenceNet<T>;                                                               \
  template Var<T> centralize(const Var<T>&);                                                         \
  template Var<T> correlation(const Var<T>&, const Var<T>&, T);                                      \
  template Var<T> warp(const Var<T>&, const Var<T>&, T);                                             \
  template Var<T> warp_backward(const Var<T>&, const Var<T>&, T);                                    \
  template std::vector<GridPoint> export_sparse_correspondence(const Tensor<T>&, Index,              \
                                                               const std::vector<GridPoint>&, Index);

WARPSYNTH_INSTANTIATE_CORR(float)
WARPSYNTH_INSTANTIATE_CORR(double)

}  // namespace warpsynth

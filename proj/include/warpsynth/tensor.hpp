// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace warpsynth {

using Index = Eigen::Index;

/// Four-dimensional batched layout [n, c, h, w], row-major with w fastest.
/// Matrices are carried as [batch, 1, rows, cols].
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  constexpr Index size() const { return n * c * h * w; }
  constexpr Index plane() const { return h * w; }
  constexpr Index sample() const { return c * h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "[" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
           std::to_string(w) + "]";
  }
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected " + want.str() + ", got " + got.str());
  }
}

/// Dense tensor with Eigen-backed contiguous storage.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Storage = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Storage::Zero(shape.size())) {}
  Tensor(const Shape& shape, T fill) : shape_(shape), data_(Storage::Constant(shape.size(), fill)) {}
  Tensor(const Shape& shape, Storage data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) throw ShapeError("tensor storage does not match shape " + shape.str());
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }
  static Tensor constant(const Shape& shape, T value) { return Tensor(shape, value); }

  const Shape& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return shape_.size(); }
  bool empty() const { return data_.size() == 0; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  Storage& vec() { return data_; }
  const Storage& vec() const { return data_; }

  T& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  T operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }
  T& operator[](Index i) { return data_[i]; }
  T operator[](Index i) const { return data_[i]; }

  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  /// Sample `n` viewed as a [c, h*w] matrix.
  MatrixMap channels(Index n) { return MatrixMap(data() + n * shape_.sample(), shape_.c, shape_.plane()); }
  ConstMatrixMap channels(Index n) const {
    return ConstMatrixMap(data() + n * shape_.sample(), shape_.c, shape_.plane());
  }
  /// Matrix `n` of a [batch, 1, rows, cols] tensor.
  MatrixMap matrix(Index n) { return MatrixMap(data() + n * shape_.sample(), shape_.h, shape_.w); }
  ConstMatrixMap matrix(Index n) const { return ConstMatrixMap(data() + n * shape_.sample(), shape_.h, shape_.w); }

  Tensor reshaped(const Shape& shape) const {
    if (shape.size() != size()) throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    return Tensor(shape, data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, data_.template cast<U>());
  }

  bool all_finite() const { return data_.allFinite(); }
  T max_abs_diff(const Tensor& other) const {
    require_shape(other.shape(), shape_, "max_abs_diff");
    if (empty()) return T(0);
    return (data_ - other.data_).cwiseAbs().maxCoeff();
  }

  void set_zero() { data_.setZero(); }

 private:
  Shape shape_{};
  Storage data_;
};

}  // namespace warpsynth

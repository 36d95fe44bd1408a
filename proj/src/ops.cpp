// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>

namespace warpsynth::ops {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using RowMatrix = typename Tensor<T>::RowMatrix;

template <typename T>
Tensor<T>& grad_of(const NodePtr<T>& p) {
  return p->grad_buffer();
}

template <typename T>
Shape scalar_shape() {
  return Shape{1, 1, 1, 1};
}

// Upper bound on im2col buffer entries; larger convolutions are processed in
// bands of output rows.
constexpr Index kColumnBudget = Index(1) << 22;

template <typename T>
void im2col(const T* x, Index channels, Index h, Index w, Index k, Index stride, Index pad, Index row0,
            Index row1, Index wo, T* cols) {
  const Index len = (row1 - row0) * wo;
  for (Index c = 0; c < channels; ++c) {
    const T* plane = x + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        T* dst = cols + ((c * k + ky) * k + kx) * len;
        for (Index oh = row0; oh < row1; ++oh) {
          const Index iy = oh * stride - pad + ky;
          T* out = dst + (oh - row0) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* src = plane + iy * w;
          for (Index ow = 0; ow < wo; ++ow) {
            const Index ix = ow * stride - pad + kx;
            out[ow] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, Index channels, Index h, Index w, Index k, Index stride, Index pad, Index row0,
            Index row1, Index wo, T* dx) {
  const Index len = (row1 - row0) * wo;
  for (Index c = 0; c < channels; ++c) {
    T* plane = dx + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const T* src = cols + ((c * k + ky) * k + kx) * len;
        for (Index oh = row0; oh < row1; ++oh) {
          const Index iy = oh * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* in = src + (oh - row0) * wo;
          T* row = plane + iy * w;
          for (Index ow = 0; ow < wo; ++ow) {
            const Index ix = ow * stride - pad + kx;
            if (ix >= 0 && ix < w) row[ix] += in[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void check_same(const Var<T>& a, const Var<T>& b, const char* what) {
  require_shape(b.shape(), a.shape(), what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "add");
  Tensor<T> out(a.shape());
  out.vec() = a.value().vec() + b.value().vec();
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) grad_of(p).vec() += self.grad.vec();
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "sub");
  Tensor<T> out(a.shape());
  out.vec() = a.value().vec() - b.value().vec();
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    if (self.parents[0]->requires_grad) grad_of(self.parents[0]).vec() += self.grad.vec();
    if (self.parents[1]->requires_grad) grad_of(self.parents[1]).vec() -= self.grad.vec();
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "mul");
  Tensor<T> out(a.shape());
  out.vec() = a.value().vec().cwiseProduct(b.value().vec());
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) grad_of(pa).vec() += self.grad.vec().cwiseProduct(pb->value.vec());
    if (pb->requires_grad) grad_of(pb).vec() += self.grad.vec().cwiseProduct(pa->value.vec());
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a.shape());
  out.vec() = a.value().vec() * s;
  return make_result<T>(std::move(out), {a.node()},
                        [s](Node<T>& self) { grad_of(self.parents[0]).vec() += self.grad.vec() * s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out(a.shape());
  out.vec() = a.value().vec().array() + s;
  return make_result<T>(std::move(out), {a.node()},
                        [](Node<T>& self) { grad_of(self.parents[0]).vec() += self.grad.vec(); });
}

template <typename T>
Var<T> scale_by(const Var<T>& a, const Var<T>& s) {
  if (s.value().size() != 1) throw ShapeError("scale_by: scale must have one element");
  Tensor<T> out(a.shape());
  out.vec() = a.value().vec() * s.value()[0];
  return make_result<T>(std::move(out), {a.node(), s.node()}, [](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& ps = self.parents[1];
    if (pa->requires_grad) grad_of(pa).vec() += self.grad.vec() * ps->value[0];
    if (ps->requires_grad) grad_of(ps)[0] += self.grad.vec().dot(pa->value.vec());
  });
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights) {
  if (terms.size() != weights.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  Tensor<T> out(scalar_shape<T>());
  std::vector<NodePtr<T>> parents;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw ShapeError("weighted_sum: terms must be scalars");
    out[0] += weights[i] * terms[i].value()[0];
    parents.push_back(terms[i].node());
  }
  return make_result<T>(std::move(out), std::move(parents), [weights](Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i)
      if (self.parents[i]->requires_grad) grad_of(self.parents[i])[0] += weights[i] * self.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.shape());
  out.vec() = x.value().vec().cwiseMax(T(0));
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    auto& p = self.parents[0];
    grad_of(p).vec().array() += (p->value.vec().array() > T(0)).select(self.grad.vec().array(), T(0));
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  out.vec().array() = (x.value().vec().array() > T(0)).select(x.value().vec().array(), x.value().vec().array() * slope);
  return make_result<T>(std::move(out), {x.node()}, [slope](Node<T>& self) {
    auto& p = self.parents[0];
    grad_of(p).vec().array() +=
        (p->value.vec().array() > T(0)).select(self.grad.vec().array(), self.grad.vec().array() * slope);
  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x.shape());
  out.vec() = x.value().vec().array().tanh().matrix();
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    grad_of(self.parents[0]).vec().array() += self.grad.vec().array() * (T(1) - self.value.vec().array().square());
  });
}

// ---------------------------------------------------------------------------
// Convolution

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, Index stride, Index padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  const Index k = ws.h;
  const Index co = ws.n;
  const Index ho = (xs.h + 2 * padding - k) / stride + 1;
  const Index wo = (xs.w + 2 * padding - k) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: empty output for input " + xs.str());
  const Index kdim = xs.c * k * k;
  const bool pointwise = (k == 1 && stride == 1 && padding == 0);
  const Index band = std::max<Index>(1, std::min<Index>(ho, kColumnBudget / std::max<Index>(1, kdim * wo)));

  Tensor<T> out(Shape{xs.n, co, ho, wo});
  typename Tensor<T>::ConstMatrixMap wm(weight.value().data(), co, kdim);
  RowMatrix<T> cols;
  for (Index n = 0; n < xs.n; ++n) {
    const T* xn = x.value().data() + n * xs.sample();
    auto om = out.channels(n);
    if (pointwise) {
      om.noalias() = wm * typename Tensor<T>::ConstMatrixMap(xn, xs.c, xs.plane());
    } else {
      for (Index r0 = 0; r0 < ho; r0 += band) {
        const Index r1 = std::min(ho, r0 + band);
        cols.resize(kdim, (r1 - r0) * wo);
        im2col(xn, xs.c, xs.h, xs.w, k, stride, padding, r0, r1, wo, cols.data());
        om.middleCols(r0 * wo, (r1 - r0) * wo).noalias() = wm * cols;
      }
    }
    if (bias.defined()) {
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.value().data(), co);
      om.colwise() += b;
    }
  }

  std::vector<NodePtr<T>> parents{x.node(), weight.node()};
  if (bias.defined()) parents.push_back(bias.node());
  return make_result<T>(std::move(out), std::move(parents),
                        [stride, padding, k, co, ho, wo, kdim, pointwise, band](Node<T>& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    const Shape xs = px->value.shape();
    typename Tensor<T>::ConstMatrixMap wm(pw->value.data(), co, kdim);
    RowMatrix<T> cols;
    RowMatrix<T> dcols;
    for (Index n = 0; n < xs.n; ++n) {
      auto go = self.grad.channels(n);
      const T* xn = px->value.data() + n * xs.sample();
      if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grad_of(self.parents[2]).data(), co);
        db += go.rowwise().sum();
      }
      if (pointwise) {
        typename Tensor<T>::ConstMatrixMap xm(xn, xs.c, xs.plane());
        if (pw->requires_grad) {
          typename Tensor<T>::MatrixMap dw(grad_of(pw).data(), co, kdim);
          dw.noalias() += go * xm.transpose();
        }
        if (px->requires_grad) grad_of(px).channels(n).noalias() += wm.transpose() * go;
        continue;
      }
      for (Index r0 = 0; r0 < ho; r0 += band) {
        const Index r1 = std::min(ho, r0 + band);
        const Index len = (r1 - r0) * wo;
        auto gband = go.middleCols(r0 * wo, len);
        if (pw->requires_grad) {
          cols.resize(kdim, len);
          im2col(xn, xs.c, xs.h, xs.w, k, stride, padding, r0, r1, wo, cols.data());
          typename Tensor<T>::MatrixMap dw(grad_of(pw).data(), co, kdim);
          dw.noalias() += gband * cols.transpose();
        }
        if (px->requires_grad) {
          dcols.noalias() = wm.transpose() * gband;
          col2im(dcols.data(), xs.c, xs.h, xs.w, k, stride, padding, r0, r1, wo,
                 grad_of(px).data() + n * xs.sample());
        }
      }
    }
  });
}

template <typename T>
Var<T> spectral_normalize(const Var<T>& weight, Tensor<T>& u, bool update, T* sigma_out) {
  const Shape ws = weight.shape();
  const Index rows = ws.n;
  const Index cols = ws.sample();
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  typename Tensor<T>::ConstMatrixMap wm(weight.value().data(), rows, cols);
  Eigen::Map<Vec> um(u.data(), rows);
  constexpr T eps = T(1e-12);
  Vec v = wm.transpose() * um;
  v /= std::max(v.norm(), eps);
  if (update) {
    Vec nu = wm * v;
    um = nu / std::max(nu.norm(), eps);
  }
  // Without an update σ = ‖Wᵀu‖ exactly, so u vᵀ is its true derivative.
  const Vec uu = um;
  const T sigma = std::max(uu.dot(wm * v), eps);
  if (sigma_out) *sigma_out = sigma;
  Tensor<T> out(ws);
  out.vec() = weight.value().vec() / sigma;
  return make_result<T>(std::move(out), {weight.node()}, [uu, v, sigma, rows, cols](Node<T>& self) {
    auto& pw = self.parents[0];
    typename Tensor<T>::ConstMatrixMap g(self.grad.data(), rows, cols);
    typename Tensor<T>::MatrixMap dw(grad_of(pw).data(), rows, cols);
    const T inner = self.grad.vec().dot(pw->value.vec());
    dw += g / sigma;
    dw.noalias() -= (inner / (sigma * sigma)) * (uu * v.transpose());
  });
}

// ---------------------------------------------------------------------------
// Normalization

template <typename T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const Shape s = x.shape();
  const Index planes = s.n * s.c;
  const Index hw = s.plane();
  Tensor<T> out(s);
  std::vector<T> inv_std(planes);
  for (Index p = 0; p < planes; ++p) {
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> in(x.value().data() + p * hw, hw);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> o(out.data() + p * hw, hw);
    const T mu = in.mean();
    o = in.array() - mu;
    const T var = o.squaredNorm() / T(hw);
    inv_std[p] = T(1) / std::sqrt(var + eps);
    o *= inv_std[p];
  }
  return make_result<T>(std::move(out), {x.node()}, [inv_std = std::move(inv_std), planes, hw](Node<T>& self) {
    auto& px = self.parents[0];
    for (Index p = 0; p < planes; ++p) {
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> g(self.grad.data() + p * hw, hw);
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> y(self.value.data() + p * hw, hw);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dx(grad_of(px).data() + p * hw, hw);
      const T gm = g.mean();
      const T gy = g.dot(y) / T(hw);
      dx.array() += inv_std[p] * (g.array() - gm - y.array() * gy);
    }
  });
}

template <typename T>
Var<T> positional_norm(const Var<T>& x, T eps) {
  const Shape s = x.shape();
  Tensor<T> out(s);
  Tensor<T> inv_std(Shape{s.n, 1, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) {
    auto in = x.value().channels(n);
    auto o = out.channels(n);
    const auto mu = in.colwise().mean().eval();
    o = in.rowwise() - mu;
    const auto var = (o.array().square().colwise().sum() / T(s.c)).eval();
    auto is = inv_std.channels(n);
    is = (var + eps).sqrt().inverse().matrix();
    o.array().rowwise() *= is.array().row(0);
  }
  return make_result<T>(std::move(out), {x.node()}, [inv_std = std::move(inv_std)](Node<T>& self) {
    auto& px = self.parents[0];
    const Shape s = self.value.shape();
    for (Index n = 0; n < s.n; ++n) {
      auto g = self.grad.channels(n);
      auto y = self.value.channels(n);
      const auto gm = g.colwise().mean().eval();
      const auto gy = (g.cwiseProduct(y).colwise().sum() / T(s.c)).eval();
      RowMatrix<T> d = g.rowwise() - gm;
      d -= (y.array().rowwise() * gy.array()).matrix();
      d.array().rowwise() *= inv_std.channels(n).array().row(0);
      grad_of(px).channels(n) += d;
    }
  });
}

template <typename T>
Var<T> channel_center(const Var<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out(s);
  for (Index n = 0; n < s.n; ++n) {
    auto in = x.value().channels(n);
    out.channels(n) = in.rowwise() - in.colwise().mean();
  }
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    const Shape s = self.value.shape();
    for (Index n = 0; n < s.n; ++n) {
      auto g = self.grad.channels(n);
      grad_of(self.parents[0]).channels(n) += g.rowwise() - g.colwise().mean();
    }
  });
}

template <typename T>
Var<T> l2_normalize_channels(const Var<T>& x, T eps) {
  const Shape s = x.shape();
  Tensor<T> out(s);
  Tensor<T> norms(Shape{s.n, 1, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) {
    auto in = x.value().channels(n);
    auto nm = norms.channels(n);
    nm = in.colwise().norm();
    auto o = out.channels(n);
    o = in;
    o.array().rowwise() /= nm.array().row(0).max(eps);
  }
  return make_result<T>(std::move(out), {x.node()}, [norms = std::move(norms), eps](Node<T>& self) {
    const Shape s = self.value.shape();
    for (Index n = 0; n < s.n; ++n) {
      auto g = self.grad.channels(n);
      auto y = self.value.channels(n);
      auto nm = norms.channels(n);
      RowMatrix<T> d = g;
      for (Index j = 0; j < s.plane(); ++j) {
        if (nm(0, j) > eps) d.col(j) -= y.col(j) * y.col(j).dot(g.col(j));
        d.col(j) /= std::max(nm(0, j), eps);
      }
      grad_of(self.parents[0]).channels(n) += d;
    }
  });
}

// ---------------------------------------------------------------------------
// Resampling

template <typename T>
Var<T> upsample_nearest2(const Var<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  const Index planes = s.n * s.c;
  for (Index p = 0; p < planes; ++p) {
    const T* in = x.value().data() + p * s.plane();
    T* o = out.data() + p * s.plane() * 4;
    for (Index i = 0; i < s.h * 2; ++i)
      for (Index j = 0; j < s.w * 2; ++j) o[i * s.w * 2 + j] = in[(i / 2) * s.w + j / 2];
  }
  return make_result<T>(std::move(out), {x.node()}, [planes](Node<T>& self) {
    const Shape s = self.parents[0]->value.shape();
    T* dx = grad_of(self.parents[0]).data();
    for (Index p = 0; p < planes; ++p) {
      const T* g = self.grad.data() + p * s.plane() * 4;
      T* d = dx + p * s.plane();
      for (Index i = 0; i < s.h * 2; ++i)
        for (Index j = 0; j < s.w * 2; ++j) d[(i / 2) * s.w + j / 2] += g[i * s.w * 2 + j];
    }
  });
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  const Shape s = x.shape();
  if (s.h % 2 || s.w % 2) throw ShapeError("avg_pool2: odd spatial size " + s.str());
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor<T> out(os);
  const Index planes = s.n * s.c;
  for (Index p = 0; p < planes; ++p) {
    const T* in = x.value().data() + p * s.plane();
    T* o = out.data() + p * os.plane();
    for (Index i = 0; i < os.h; ++i)
      for (Index j = 0; j < os.w; ++j)
        o[i * os.w + j] = T(0.25) * (in[2 * i * s.w + 2 * j] + in[2 * i * s.w + 2 * j + 1] +
                                     in[(2 * i + 1) * s.w + 2 * j] + in[(2 * i + 1) * s.w + 2 * j + 1]);
  }
  return make_result<T>(std::move(out), {x.node()}, [planes](Node<T>& self) {
    const Shape s = self.parents[0]->value.shape();
    const Shape os = self.value.shape();
    T* dx = grad_of(self.parents[0]).data();
    for (Index p = 0; p < planes; ++p) {
      const T* g = self.grad.data() + p * os.plane();
      T* d = dx + p * s.plane();
      for (Index i = 0; i < os.h; ++i)
        for (Index j = 0; j < os.w; ++j) {
          const T v = T(0.25) * g[i * os.w + j];
          d[2 * i * s.w + 2 * j] += v;
          d[2 * i * s.w + 2 * j + 1] += v;
          d[(2 * i + 1) * s.w + 2 * j] += v;
          d[(2 * i + 1) * s.w + 2 * j + 1] += v;
        }
    }
  });
}

template <typename T>
Var<T> max_pool2(const Var<T>& x) {
  const Shape s = x.shape();
  if (s.h % 2 || s.w % 2) throw ShapeError("max_pool2: odd spatial size " + s.str());
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor<T> out(os);
  std::vector<Index> arg(os.size());
  const Index planes = s.n * s.c;
  for (Index p = 0; p < planes; ++p) {
    const T* in = x.value().data() + p * s.plane();
    for (Index i = 0; i < os.h; ++i)
      for (Index j = 0; j < os.w; ++j) {
        Index best = 2 * i * s.w + 2 * j;
        for (Index a = 0; a < 2; ++a)
          for (Index b = 0; b < 2; ++b) {
            const Index idx = (2 * i + a) * s.w + 2 * j + b;
            if (in[idx] > in[best]) best = idx;
          }
        const Index o = p * os.plane() + i * os.w + j;
        out[o] = in[best];
        arg[o] = p * s.plane() + best;
      }
  }
  return make_result<T>(std::move(out), {x.node()}, [arg = std::move(arg)](Node<T>& self) {
    T* dx = grad_of(self.parents[0]).data();
    for (std::size_t o = 0; o < arg.size(); ++o) dx[arg[o]] += self.grad[static_cast<Index>(o)];
  });
}

namespace {
struct LinearTaps {
  std::vector<Index> lo, hi;
  std::vector<double> frac;
};

LinearTaps linear_taps(Index in, Index out) {
  LinearTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    Index lo = static_cast<Index>(src);
    if (lo > in - 1) lo = in - 1;
    t.lo[i] = lo;
    t.hi[i] = lo < in - 1 ? lo + 1 : lo;
    t.frac[i] = src - static_cast<double>(lo);
  }
  return t;
}
}  // namespace

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, Index h, Index w) {
  const Shape s = x.shape();
  if (s.h == h && s.w == w) return x;
  const LinearTaps ty = linear_taps(s.h, h);
  const LinearTaps tx = linear_taps(s.w, w);
  const Shape os{s.n, s.c, h, w};
  Tensor<T> out(os);
  const Index planes = s.n * s.c;
  for (Index p = 0; p < planes; ++p) {
    const T* in = x.value().data() + p * s.plane();
    T* o = out.data() + p * os.plane();
    for (Index i = 0; i < h; ++i) {
      const T fy = static_cast<T>(ty.frac[i]);
      for (Index j = 0; j < w; ++j) {
        const T fx = static_cast<T>(tx.frac[j]);
        const T top = in[ty.lo[i] * s.w + tx.lo[j]] * (T(1) - fx) + in[ty.lo[i] * s.w + tx.hi[j]] * fx;
        const T bot = in[ty.hi[i] * s.w + tx.lo[j]] * (T(1) - fx) + in[ty.hi[i] * s.w + tx.hi[j]] * fx;
        o[i * w + j] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return make_result<T>(std::move(out), {x.node()}, [ty, tx, planes](Node<T>& self) {
    const Shape s = self.parents[0]->value.shape();
    const Shape os = self.value.shape();
    T* dx = grad_of(self.parents[0]).data();
    for (Index p = 0; p < planes; ++p) {
      const T* g = self.grad.data() + p * os.plane();
      T* d = dx + p * s.plane();
      for (Index i = 0; i < os.h; ++i) {
        const T fy = static_cast<T>(ty.frac[i]);
        for (Index j = 0; j < os.w; ++j) {
          const T fx = static_cast<T>(tx.frac[j]);
          const T gv = g[i * os.w + j];
          d[ty.lo[i] * s.w + tx.lo[j]] += gv * (T(1) - fy) * (T(1) - fx);
          d[ty.lo[i] * s.w + tx.hi[j]] += gv * (T(1) - fy) * fx;
          d[ty.hi[i] * s.w + tx.lo[j]] += gv * fy * (T(1) - fx);
          d[ty.hi[i] * s.w + tx.hi[j]] += gv * fy * fx;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Layout

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Shape s = xs.front().shape();
  s.c = 0;
  for (const auto& x : xs) {
    const Shape& xsh = x.shape();
    if (xsh.n != s.n || xsh.h != s.h || xsh.w != s.w) throw ShapeError("concat_channels: mismatched " + xsh.str());
    s.c += xsh.c;
  }
  Tensor<T> out(s);
  std::vector<NodePtr<T>> parents;
  for (Index n = 0; n < s.n; ++n) {
    Index c0 = 0;
    for (const auto& x : xs) {
      out.channels(n).middleRows(c0, x.shape().c) = x.value().channels(n);
      c0 += x.shape().c;
    }
  }
  for (const auto& x : xs) parents.push_back(x.node());
  return make_result<T>(std::move(out), std::move(parents), [](Node<T>& self) {
    const Index n_samples = self.value.n();
    Index c0 = 0;
    for (auto& p : self.parents) {
      const Index c = p->value.c();
      if (p->requires_grad)
        for (Index n = 0; n < n_samples; ++n) grad_of(p).channels(n) += self.grad.channels(n).middleRows(c0, c);
      c0 += c;
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, Index begin, Index count) {
  const Shape s = x.shape();
  if (begin < 0 || count <= 0 || begin + count > s.c) throw ShapeError("slice_channels: out of range on " + s.str());
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) out.channels(n) = x.value().channels(n).middleRows(begin, count);
  return make_result<T>(std::move(out), {x.node()}, [begin, count](Node<T>& self) {
    for (Index n = 0; n < self.value.n(); ++n)
      grad_of(self.parents[0]).channels(n).middleRows(begin, count) += self.grad.channels(n);
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, const Shape& shape) {
  Tensor<T> out = x.value().reshaped(shape);
  return make_result<T>(std::move(out), {x.node()},
                        [](Node<T>& self) { grad_of(self.parents[0]).vec() += self.grad.vec(); });
}

template <typename T>
Var<T> repeat_batch(const Var<T>& x, Index n) {
  const Shape s = x.shape();
  if (s.n != 1) throw ShapeError("repeat_batch: expects batch 1, got " + s.str());
  Tensor<T> out(Shape{n, s.c, s.h, s.w});
  for (Index i = 0; i < n; ++i) out.vec().segment(i * s.sample(), s.sample()) = x.value().vec();
  return make_result<T>(std::move(out), {x.node()}, [n](Node<T>& self) {
    const Index len = self.parents[0]->value.size();
    for (Index i = 0; i < n; ++i) grad_of(self.parents[0]).vec() += self.grad.vec().segment(i * len, len);
  });
}

template <typename T>
Var<T> gather_batch(const Var<T>& x, const std::vector<Index>& indices) {
  const Shape s = x.shape();
  const Index m = static_cast<Index>(indices.size());
  Tensor<T> out(Shape{m, s.c, s.h, s.w});
  for (Index i = 0; i < m; ++i) {
    if (indices[i] < 0 || indices[i] >= s.n) throw ShapeError("gather_batch: index out of range");
    out.vec().segment(i * s.sample(), s.sample()) = x.value().vec().segment(indices[i] * s.sample(), s.sample());
  }
  return make_result<T>(std::move(out), {x.node()}, [indices](Node<T>& self) {
    const Index len = self.value.shape().sample();
    for (std::size_t i = 0; i < indices.size(); ++i)
      grad_of(self.parents[0]).vec().segment(indices[i] * len, len) +=
          self.grad.vec().segment(static_cast<Index>(i) * len, len);
  });
}

// ---------------------------------------------------------------------------
// Matrices

namespace {
// c (+)= op(a) op(b)
template <typename T, typename A, typename B, typename C>
void gemm(bool ta, bool tb, const A& a, const B& b, C&& c, bool accumulate) {
  if (!accumulate) c.setZero();
  if (!ta && !tb) c.noalias() += a * b;
  else if (ta && !tb) c.noalias() += a.transpose() * b;
  else if (!ta && tb) c.noalias() += a * b.transpose();
  else c.noalias() += a.transpose() * b.transpose();
}
}  // namespace

template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool transpose_a, bool transpose_b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.c != 1 || bs.c != 1) throw ShapeError("bmm: expects [batch, 1, rows, cols]");
  const Index batch = std::max(as.n, bs.n);
  if ((as.n != batch && as.n != 1) || (bs.n != batch && bs.n != 1)) throw ShapeError("bmm: batch mismatch");
  const Index ar = transpose_a ? as.w : as.h;
  const Index ak = transpose_a ? as.h : as.w;
  const Index bk = transpose_b ? bs.w : bs.h;
  const Index bc = transpose_b ? bs.h : bs.w;
  if (ak != bk) throw ShapeError("bmm: inner dimensions differ, " + as.str() + " x " + bs.str());
  Tensor<T> out(Shape{batch, 1, ar, bc});
  for (Index i = 0; i < batch; ++i) {
    gemm<T>(transpose_a, transpose_b, a.value().matrix(as.n == 1 ? 0 : i), b.value().matrix(bs.n == 1 ? 0 : i),
            out.matrix(i), false);
  }
  return make_result<T>(std::move(out), {a.node(), b.node()}, [transpose_a, transpose_b](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const Index an = pa->value.n();
    const Index bn = pb->value.n();
    for (Index i = 0; i < self.value.n(); ++i) {
      auto g = self.grad.matrix(i);
      const auto am = pa->value.matrix(an == 1 ? 0 : i);
      const auto bm = pb->value.matrix(bn == 1 ? 0 : i);
      if (pa->requires_grad) {
        auto da = grad_of(pa).matrix(an == 1 ? 0 : i);
        // d op(a) = g op(b)ᵀ ; if a was transposed, da = op(b) gᵀ.
        if (!transpose_a) gemm<T>(false, !transpose_b, g, bm, da, true);
        else gemm<T>(transpose_b, true, bm, g, da, true);
      }
      if (pb->requires_grad) {
        auto db = grad_of(pb).matrix(bn == 1 ? 0 : i);
        // d op(b) = op(a)ᵀ g ; if b was transposed, db = gᵀ op(a).
        if (!transpose_b) gemm<T>(!transpose_a, false, am, g, db, true);
        else gemm<T>(true, transpose_a, g, am, db, true);
      }
    }
  });
}

template <typename T>
Var<T> softmax(const Var<T>& m, T alpha, Axis axis) {
  const Shape s = m.shape();
  if (s.c != 1) throw ShapeError("softmax: expects [batch, 1, rows, cols]");
  Tensor<T> out(s);
  for (Index i = 0; i < s.n; ++i) {
    auto in = m.value().matrix(i);
    auto o = out.matrix(i);
    if (axis == Axis::Rows) {
      for (Index r = 0; r < s.h; ++r) {
        const T mx = in.row(r).maxCoeff();
        o.row(r) = ((in.row(r).array() - mx) * alpha).exp().matrix();
        o.row(r) /= o.row(r).sum();
      }
    } else {
      for (Index c = 0; c < s.w; ++c) {
        const T mx = in.col(c).maxCoeff();
        o.col(c) = ((in.col(c).array() - mx) * alpha).exp().matrix();
        o.col(c) /= o.col(c).sum();
      }
    }
  }
  return make_result<T>(std::move(out), {m.node()}, [alpha, axis](Node<T>& self) {
    const Shape s = self.value.shape();
    for (Index i = 0; i < s.n; ++i) {
      auto p = self.value.matrix(i);
      auto g = self.grad.matrix(i);
      auto d = grad_of(self.parents[0]).matrix(i);
      if (axis == Axis::Rows) {
        const auto dot = g.cwiseProduct(p).rowwise().sum().eval();
        d.array() += alpha * p.array() * (g.colwise() - dot).array();
      } else {
        const auto dot = g.cwiseProduct(p).colwise().sum().eval();
        d.array() += alpha * p.array() * (g.rowwise() - dot).array();
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> mean(const Var<T>& x) {
  Tensor<T> out(scalar_shape<T>());
  const Index count = x.value().size();
  out[0] = x.value().vec().mean();
  return make_result<T>(std::move(out), {x.node()}, [count](Node<T>& self) {
    grad_of(self.parents[0]).vec().array() += self.grad[0] / T(count);
  });
}

template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
  check_same(a, b, "l1_loss");
  const Index count = a.value().size();
  Tensor<T> out(scalar_shape<T>());
  out[0] = (a.value().vec() - b.value().vec()).cwiseAbs().sum() / T(count);
  return make_result<T>(std::move(out), {a.node(), b.node()}, [count](Node<T>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const auto sign = (pa->value.vec() - pb->value.vec()).array().sign().eval();
    const T g = self.grad[0] / T(count);
    if (pa->requires_grad) grad_of(pa).vec().array() += g * sign;
    if (pb->requires_grad) grad_of(pb).vec().array() -= g * sign;
  });
}

template <typename T>
Var<T> hinge_mean(const Var<T>& x, T s) {
  const Index count = x.value().size();
  Tensor<T> out(scalar_shape<T>());
  out[0] = (T(1) - s * x.value().vec().array()).max(T(0)).sum() / T(count);
  return make_result<T>(std::move(out), {x.node()}, [s, count](Node<T>& self) {
    auto& px = self.parents[0];
    const T g = self.grad[0] / T(count);
    const auto active = ((T(1) - s * px->value.vec().array()) > T(0)).template cast<T>();
    grad_of(px).vec().array() += (-s * g) * active;
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& prob, const Tensor<T>& target, T eps) {
  require_shape(target.shape(), prob.shape(), "cross_entropy");
  const Shape s = prob.shape();
  const Index pixels = s.n * s.plane();
  Tensor<T> out(scalar_shape<T>());
  out[0] = -(target.vec().array() * prob.value().vec().array().max(eps).log()).sum() / T(pixels);
  return make_result<T>(std::move(out), {prob.node()}, [target, eps, pixels](Node<T>& self) {
    auto& pp = self.parents[0];
    const T g = self.grad[0] / T(pixels);
    const auto p = pp->value.vec().array();
    grad_of(pp).vec().array() += (p > eps).select(-g * target.vec().array() / p, T(0));
  });
}

#define WARPSYNTH_INSTANTIATE_OPS(T)                                                                    \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> scale(const Var<T>&, T);                                                            \
  template Var<T> add_scalar(const Var<T>&, T);                                                       \
  template Var<T> scale_by(const Var<T>&, const Var<T>&);                                             \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);                    \
  template Var<T> relu(const Var<T>&);                                                                \
  template Var<T> leaky_relu(const Var<T>&, T);                                                       \
  template Var<T> tanh(const Var<T>&);                                                                \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, Index, Index);                  \
  template Var<T> spectral_normalize(const Var<T>&, Tensor<T>&, bool, T*);                            \
  template Var<T> instance_norm(const Var<T>&, T);                                                    \
  template Var<T> positional_norm(const Var<T>&, T);                                                  \
  template Var<T> channel_center(const Var<T>&);                                                      \
  template Var<T> l2_normalize_channels(const Var<T>&, T);                                            \
  template Var<T> upsample_nearest2(const Var<T>&);                                                   \
  template Var<T> avg_pool2(const Var<T>&);                                                           \
  template Var<T> max_pool2(const Var<T>&);                                                           \
  template Var<T> resize_bilinear(const Var<T>&, Index, Index);                                       \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                        \
  template Var<T> slice_channels(const Var<T>&, Index, Index);                                        \
  template Var<T> reshape(const Var<T>&, const Shape&);                                               \
  template Var<T> repeat_batch(const Var<T>&, Index);                                                 \
  template Var<T> gather_batch(const Var<T>&, const std::vector<Index>&);                             \
  template Var<T> bmm(const Var<T>&, const Var<T>&, bool, bool);                                      \
  template Var<T> softmax(const Var<T>&, T, Axis);                                                    \
  template Var<T> mean(const Var<T>&);                                                                \
  template Var<T> l1_loss(const Var<T>&, const Var<T>&);                                              \
  template Var<T> hinge_mean(const Var<T>&, T);                                                       \
  template Var<T> cross_entropy(const Var<T>&, const Tensor<T>&, T);

WARPSYNTH_INSTANTIATE_OPS(float)
WARPSYNTH_INSTANTIATE_OPS(double)

}  // namespace warpsynth::ops

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_support.hpp"
#include "warpsynth/correspondence.hpp"
#include "warpsynth/losses.hpp"

using namespace warpsynth;
using warpsynth::testing::gradient_error;
using warpsynth::testing::project;
using warpsynth::testing::random_var;

namespace {

// Direct evaluation of the cosine between channel-centred feature vectors.
Tensor<double> correlation_oracle(const Tensor<double>& x, const Tensor<double>& y) {
  const Shape s = x.shape();
  const Index hw = s.plane();
  Tensor<double> out(Shape{s.n, 1, hw, hw});
  for (Index n = 0; n < s.n; ++n)
    for (Index u = 0; u < hw; ++u)
      for (Index v = 0; v < hw; ++v) {
        double mx = 0, my = 0;
        for (Index c = 0; c < s.c; ++c) {
          mx += x(n, c, u / s.w, u % s.w);
          my += y(n, c, v / s.w, v % s.w);
        }
        mx /= s.c;
        my /= s.c;
        double dot = 0, nx = 0, ny = 0;
        for (Index c = 0; c < s.c; ++c) {
          const double a = x(n, c, u / s.w, u % s.w) - mx;
          const double b = y(n, c, v / s.w, v % s.w) - my;
          dot += a * b;
          nx += a * a;
          ny += b * b;
        }
        out(n, 0, u, v) = dot / (std::max(std::sqrt(nx), 1e-8) * std::max(std::sqrt(ny), 1e-8));
      }
  return out;
}

Var<double> matrix_var(Index rows, const std::vector<double>& values, bool grad = false) {
  Tensor<double> t(Shape{1, 1, rows, static_cast<Index>(values.size()) / rows});
  for (std::size_t i = 0; i < values.size(); ++i) t[static_cast<Index>(i)] = values[i];
  return Var<double>(t, grad);
}

// One-hot M(u, perm[u]) = 1 with an α large enough to make the softmax hard.
Var<double> permutation_matrix(const std::vector<Index>& perm) {
  const Index hw = static_cast<Index>(perm.size());
  Tensor<double> t(Shape{1, 1, hw, hw});
  for (Index u = 0; u < hw; ++u) t(0, 0, u, perm[u]) = 1.0;
  return Var<double>(t);
}

ModelConfig small_model() {
  ModelConfig m;
  m.input_channels = 3;
  m.image_size = 16;
  m.corr_size = 8;
  m.feature_channels = 16;
  m.adaptor_base_channels = 4;
  m.adaptor_resblocks = 1;
  m.shared_resblocks = 1;
  return m;
}

}  // namespace

TEST_CASE("centralize") {
  Var<double> f = matrix_var(1, {2, 0});
  f = ops::reshape(f, Shape{1, 2, 1, 1});
  const Tensor<double> c = centralize(f).value();
  CHECK(c[0] == 1.0);
  CHECK(c[1] == -1.0);
  Var<double> constant(Tensor<double>(Shape{1, 5, 2, 2}, 3.25));
  CHECK(centralize(constant).value().vec().cwiseAbs().maxCoeff() == 0.0);
  Var<double> r = random_var({2, 7, 3, 3}, 1);
  const Tensor<double> rc = centralize(r).value();
  for (Index n = 0; n < 2; ++n) CHECK(rc.channels(n).colwise().mean().cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("correlation matches the entrywise oracle") {
  Var<double> x = random_var({2, 4, 2, 2}, 2);
  Var<double> y = random_var({2, 4, 2, 2}, 3);
  const Tensor<double> m = correlation(x, y).value();
  REQUIRE(m.shape() == Shape{2, 1, 4, 4});
  CHECK(m.max_abs_diff(correlation_oracle(x.value(), y.value())) < 1e-12);
  CHECK(m.vec().cwiseAbs().maxCoeff() <= 1.0 + 1e-12);

  SUBCASE("symmetry") {
    const Tensor<double> swapped = correlation(y, x).value();
    for (Index n = 0; n < 2; ++n) CHECK((m.matrix(n) - swapped.matrix(n).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("self correlation peaks on the diagonal") {
    const Tensor<double> self = correlation(x, x).value();
    for (Index n = 0; n < 2; ++n)
      for (Index u = 0; u < 4; ++u) {
        CHECK(self(n, 0, u, u) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(self(n, 0, u, u) >= self.matrix(n).row(u).maxCoeff());
      }
  }
  SUBCASE("antipodal centred vectors") {
    Var<double> a(Tensor<double>(Shape{1, 2, 1, 1}, (Eigen::VectorXd(2) << 1, -1).finished()));
    Var<double> b(Tensor<double>(Shape{1, 2, 1, 1}, (Eigen::VectorXd(2) << -1, 1).finished()));
    CHECK(correlation(a, b).item() == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("degenerate positions are finite") {
    Var<double> flat(Tensor<double>(Shape{1, 4, 2, 2}, 1.0));
    CHECK(correlation(flat, random_var({1, 4, 2, 2}, 3, false)).value().all_finite());
  }
  SUBCASE("gradients") {
    CHECK(gradient_error(x, [&] { return project(correlation(x, y)); }) < 1e-6);
    CHECK(gradient_error(y, [&] { return project(correlation(x, y)); }) < 1e-6);
  }
}

TEST_CASE("warp hand cases") {
  SUBCASE("equal scores average the exemplar") {
    Var<double> m = matrix_var(2, {0, 0, 0, 0});
    Var<double> y(Tensor<double>(Shape{1, 1, 1, 2}, (Eigen::VectorXd(2) << 0, 1).finished()));
    const Tensor<double> r = warp(m, y, 100.0).value();
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(0.5));
    const Tensor<double> back = warp_backward(m, Var<double>(r), 100.0).value();
    CHECK(back[0] == doctest::Approx(0.5));
    CHECK(back[1] == doctest::Approx(0.5));
    CHECK(cycle_regularization(y, m, 100.0).item() == doctest::Approx(0.5));
  }
  SUBCASE("permutation warps are invertible") {
    const std::vector<Index> perm = {2, 0, 3, 1};
    Var<double> m = permutation_matrix(perm);
    Var<double> y = random_var({1, 3, 2, 2}, 4, false);
    const Tensor<double> r = warp(m, y, 1e4).value();
    for (Index c = 0; c < 3; ++c)
      for (Index u = 0; u < 4; ++u) CHECK(r.channels(0)(c, u) == y.value().channels(0)(c, perm[u]));
    const Tensor<double> back = warp_backward(m, Var<double>(r), 1e4).value();
    CHECK(back.max_abs_diff(y.value()) == 0.0);
    CHECK(cycle_regularization(y, m, 1e4).item() == 0.0);
  }
  SUBCASE("constant exemplars survive any warp") {
    Var<double> m = random_var({1, 1, 4, 4}, 5, false);
    Var<double> y(Tensor<double>(Shape{1, 3, 2, 2}, 0.3));
    CHECK(warp(m, y, 3.0).value().max_abs_diff(y.value()) < 1e-15);
    CHECK(cycle_regularization(y, m, 3.0).item() < 1e-15);
  }
}

TEST_CASE("warp invariants") {
  Var<double> x = random_var({2, 8, 4, 4}, 6);
  Var<double> yf = random_var({2, 8, 4, 4}, 7);
  Var<double> m = correlation(x, yf);
  Var<double> y = random_var({2, 3, 8, 8}, 8, false);

  SUBCASE("rows of the softmax sum to one") {
    const Tensor<double> w = ops::softmax(m, 100.0, ops::Axis::Rows).value();
    for (Index n = 0; n < 2; ++n) CHECK((w.matrix(n).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("convexity per channel") {
    const Tensor<double> r = warp(m, y, 100.0).value();
    const Tensor<double> small = ops::resize_bilinear(y, 4, 4).value();
    for (Index n = 0; n < 2; ++n)
      for (Index c = 0; c < 3; ++c) {
        const auto row = r.channels(n).row(c);
        const auto src = small.channels(n).row(c);
        CHECK(row.minCoeff() >= src.minCoeff() - 1e-12);
        CHECK(row.maxCoeff() <= src.maxCoeff() + 1e-12);
      }
  }
  SUBCASE("row offsets do not change the warp") {
    Tensor<double> shifted = m.value();
    for (Index u = 0; u < 16; ++u) shifted.matrix(1).row(u).array() += 0.37 * static_cast<double>(u);
    CHECK(warp(Var<double>(shifted), y, 100.0).value().max_abs_diff(warp(m, y, 100.0).value()) < 1e-6);
  }
  SUBCASE("large temperatures select the argmax pixel") {
    const Tensor<double> r = warp(m, y, 1e4).value();
    const Tensor<double> small = ops::resize_bilinear(y, 4, 4).value();
    double worst = 0;
    for (Index n = 0; n < 2; ++n)
      for (Index u = 0; u < 16; ++u) {
        Index best;
        m.value().matrix(n).row(u).maxCoeff(&best);
        for (Index c = 0; c < 3; ++c)
          worst = std::max(worst, std::abs(r.channels(n)(c, u) - small.channels(n)(c, best)));
      }
    CHECK(worst < 1e-3);
  }
  SUBCASE("gradient with respect to M and the exemplar") {
    Var<double> mg = random_var({1, 1, 4, 4}, 9);
    Var<double> yg = random_var({1, 3, 2, 2}, 10);
    CHECK(gradient_error(mg, [&] { return project(warp(mg, yg, 2.0)); }) < 1e-6);
    CHECK(gradient_error(yg, [&] { return project(warp(mg, yg, 2.0)); }) < 1e-6);
    CHECK(gradient_error(mg, [&] { return project(warp_backward(mg, yg, 2.0)); }) < 1e-6);
    CHECK(gradient_error(mg, [&] { return cycle_regularization(yg, mg, 2.0); }) < 1e-6);
  }
  SUBCASE("grid mismatch is rejected") {
    CHECK_THROWS_AS(warp(random_var({1, 1, 5, 5}, 11, false), y, 1.0), ShapeError);
    CHECK_THROWS_AS(warp_backward(m, y, 1.0), ShapeError);
  }
}

TEST_CASE("sparse correspondence export") {
  SUBCASE("identity") {
    std::vector<Index> perm(64);
    for (Index i = 0; i < 64; ++i) perm[i] = i;
    const auto out = export_sparse_correspondence(permutation_matrix(perm).value(), 8, {{3, 5}, {0, 0}, {7, 7}});
    CHECK(out == std::vector<GridPoint>{{3, 5}, {0, 0}, {7, 7}});
  }
  SUBCASE("matches a brute-force argmax") {
    const Tensor<double> m = random_var({2, 1, 16, 16}, 12, false).value();
    std::vector<GridPoint> queries;
    for (Index u = 0; u < 16; ++u) queries.push_back({u / 4, u % 4});
    const auto out = export_sparse_correspondence(m, 4, queries, 1);
    for (Index u = 0; u < 16; ++u) {
      Index best = 0;
      for (Index v = 1; v < 16; ++v)
        if (m(1, 0, u, v) > m(1, 0, u, best)) best = v;
      CHECK(out[u] == GridPoint{best / 4, best % 4});
    }
  }
  SUBCASE("ties go to the smallest index") {
    Tensor<double> m(Shape{1, 1, 4, 4});
    m(0, 0, 2, 1) = 1;
    m(0, 0, 2, 3) = 1;
    CHECK(export_sparse_correspondence(m, 2, {{1, 0}}) == std::vector<GridPoint>{{0, 1}});
    CHECK(export_sparse_correspondence(m, 2, {{0, 0}}) == std::vector<GridPoint>{{0, 0}});
  }
  SUBCASE("queries outside the grid") {
    Tensor<double> m(Shape{1, 1, 4, 4});
    CHECK_THROWS_AS(export_sparse_correspondence(m, 2, {{2, 0}}), std::out_of_range);
    CHECK_THROWS_AS(export_sparse_correspondence(m, 2, {{0, -1}}), std::out_of_range);
  }
}

TEST_CASE("domain adaptors") {
  const ModelConfig cfg = small_model();
  RandomState rng(13);
  CorrespondenceNet<double> net(cfg, rng);
  Var<double> x = random_var({2, 3, 16, 16}, 14, false);

  auto check_unit = [](const Tensor<double>& f) {
    for (Index n = 0; n < f.shape().n; ++n)
      CHECK((f.channels(n).colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-5);
  };
  SUBCASE("shape and normalization") {
    const Tensor<double> f = net.adapt(x, Domain::A).value();
    CHECK(f.shape() == Shape{2, 16, 8, 8});
    check_unit(f);
    check_unit(net.adapt(x, Domain::B).value());
  }
  SUBCASE("zero input") {
    const Tensor<double> f = net.adapt(Var<double>(Tensor<double>(Shape{1, 3, 16, 16})), Domain::A).value();
    CHECK(f.all_finite());
    check_unit(f);
  }
  SUBCASE("wrong channel count or size") {
    CHECK_THROWS_AS(net.adapt(random_var({1, 4, 16, 16}, 15, false), Domain::A), ShapeError);
    CHECK_THROWS_AS(net.adapt(random_var({1, 3, 8, 8}, 15, false), Domain::B), ShapeError);
  }
  SUBCASE("full forward shapes") {
    const Correspondence<double> c = net(x, {}, x, {});
    CHECK(c.correlation.shape() == Shape{2, 1, 64, 64});
    CHECK(c.warped.shape() == Shape{2, 3, 8, 8});
    CHECK(c.correlation.value().vec().cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
  }
  SUBCASE("auxiliary channels are required when configured") {
    ModelConfig aux_cfg = cfg;
    aux_cfg.aux_channels = 2;
    RandomState r2(16);
    CorrespondenceNet<double> aux_net(aux_cfg, r2);
    CHECK_THROWS_AS(aux_net.adapt(x, Domain::A), ShapeError);
    const Tensor<double> f = aux_net.adapt(x, Domain::A, random_var({2, 2, 16, 16}, 17, false)).value();
    CHECK(f.shape() == Shape{2, 16, 8, 8});
  }
}

TEST_CASE("correlation side at full scale") {
  NoGradGuard no_grad;
  Var<float> f(RandomState(18).normal_tensor<float>(Shape{1, 8, 64, 64}));
  CHECK(correlation(f, f).shape() == Shape{1, 1, 4096, 4096});
}

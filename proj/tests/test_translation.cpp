// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_support.hpp"
#include "warpsynth/translation.hpp"

using namespace warpsynth;
using warpsynth::testing::gradient_error;
using warpsynth::testing::project;
using warpsynth::testing::random_var;

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.image_size = 32;
  m.corr_size = 8;
  m.generator_layers = {{4, 4, 8}, {8, 8, 8}, {8, 8, 6}, {16, 16, 6}, {16, 16, 4}, {16, 16, 4}, {32, 32, 4}};
  m.style_hidden_channels = 4;
  return m;
}

Var<double> position_vector(std::initializer_list<double> values) {
  Tensor<double> t(Shape{1, static_cast<Index>(values.size()), 1, 1});
  Index i = 0;
  for (double v : values) t[i++] = v;
  return Var<double>(t, true);
}

// x[n, c, r, col] as a scalar node.
Var<double> pick(const Var<double>& x, Index n, Index c, Index r, Index col) {
  Tensor<double> mask(x.shape());
  mask(n, c, r, col) = 1.0;
  return ops::scale(ops::mean(ops::mul(x, Var<double>(mask))), static_cast<double>(x.value().size()));
}

}  // namespace

TEST_CASE("positional normalization hand cases") {
  SUBCASE("two channels") {
    const PositionalStats<double> s = positional_normalize(position_vector({1, 3}), 1e-12);
    CHECK(s.normalized.value()[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(s.normalized.value()[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.mean[0] == 2.0);
    CHECK(s.stddev[0] == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("constant position") {
    const PositionalStats<double> s = positional_normalize(position_vector({4, 4, 4}), 1e-5);
    CHECK(s.normalized.value().vec().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("needs two channels") {
    CHECK_THROWS(positional_normalize(position_vector({1}), 1e-5));
  }
}

TEST_CASE("positional normalization statistics") {
  for (Index channels : {2, 3, 16, 64}) {
    CAPTURE(channels);
    Var<double> f = random_var({2, channels, 5, 4}, 100 + channels, false, 3.0);
    const Tensor<double> y = positional_normalize(f, 1e-5).normalized.value();
    for (Index n = 0; n < 2; ++n) {
      const auto m = y.channels(n);
      const Eigen::RowVectorXd mean = m.colwise().mean();
      const Eigen::RowVectorXd var = (m.rowwise() - mean).array().square().colwise().mean();
      const auto x = f.value().channels(n);
      const Eigen::RowVectorXd raw = (x.rowwise() - x.colwise().mean()).array().square().colwise().mean();
      CHECK(mean.cwiseAbs().maxCoeff() < 1e-5);
      // Output variance is exactly v / (v + eps); within 1e-3 of one once v >= 1000 eps.
      const Eigen::RowVectorXd expected = raw.array() / (raw.array() + 1e-5);
      CHECK((var - expected).cwiseAbs().maxCoeff() < 1e-9);
      for (Index p = 0; p < raw.size(); ++p)
        if (raw[p] >= 1e-2) CHECK(std::abs(var[p] - 1.0) < 1e-3);
    }
  }
}

TEST_CASE("modulation") {
  Var<double> f = random_var({2, 6, 4, 4}, 1);
  SUBCASE("identity modulation equals normalization exactly") {
    Var<double> ones(Tensor<double>(f.shape(), 1.0));
    Var<double> zeros(Tensor<double>(f.shape()));
    const Tensor<double> pn = positional_normalize(f, 1e-5).normalized.value();
    CHECK(spade_pn_modulate(f, ones, zeros, 1e-5).value().vec() == pn.vec());
  }
  SUBCASE("zero scale leaves the shift") {
    Var<double> beta = random_var(f.shape(), 2, false);
    Var<double> zeros(Tensor<double>(f.shape()));
    CHECK(spade_pn_modulate(f, zeros, beta, 1e-5).value().max_abs_diff(beta.value()) == 0.0);
  }
  SUBCASE("hand case") {
    Var<double> g = position_vector({1, 3});
    Var<double> alpha(Tensor<double>(g.shape(), 2.0));
    Var<double> beta(Tensor<double>(g.shape(), 5.0));
    const Tensor<double> y = spade_pn_modulate(g, alpha, beta, 1e-12).value();
    CHECK(y[0] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(y[1] == doctest::Approx(7.0).epsilon(1e-9));
  }
  SUBCASE("shape mismatch") {
    Var<double> small = random_var({2, 6, 2, 2}, 3, false);
    CHECK_THROWS_AS(spade_pn_modulate(f, small, small, 1e-5), ShapeError);
  }
  SUBCASE("gradients") {
    Var<double> alpha = random_var(f.shape(), 4);
    Var<double> beta = random_var(f.shape(), 5);
    CHECK(gradient_error(f, [&] { return project(positional_normalize(f, 1e-5).normalized); }) < 1e-6);
    CHECK(gradient_error(f, [&] { return project(spade_pn_modulate(f, alpha, beta, 1e-5)); }) < 1e-6);
    CHECK(gradient_error(alpha, [&] { return project(spade_pn_modulate(f, alpha, beta, 1e-5)); }) < 1e-6);
    CHECK(gradient_error(beta, [&] { return project(spade_pn_modulate(f, alpha, beta, 1e-5)); }) < 1e-6);
  }
}

TEST_CASE("style encoders") {
  const ModelConfig cfg = tiny_model();
  RandomState rng(6);
  StyleEncoderBank<double> bank(cfg, rng);
  REQUIRE(bank.size() == 7);
  Var<double> r = random_var({2, 3, 8, 8}, 7, false, 0.5);
  for (Index i = 0; i < 7; ++i) {
    const auto& spec = cfg.generator_layers[static_cast<std::size_t>(i)];
    const StyleLayer<double> s = bank.encode(r, i);
    CHECK(s.alpha.shape() == Shape{2, spec.channels, spec.height, spec.width});
    CHECK(s.beta.shape() == s.alpha.shape());
  }
  CHECK_THROWS_AS(bank.encode(r, 7), std::out_of_range);

  FrozenSpectralGuard frozen;
  const StyleLayer<double> a = bank.encode(r, 1);
  const StyleLayer<double> b = bank.encode(r, 1);
  CHECK(a.alpha.value().vec() == b.alpha.value().vec());
  CHECK(a.beta.value().vec() == b.beta.value().vec());

  const StyleLayer<double> bright = bank.encode(ops::scale(r, 2.0), 1);
  CHECK(bright.alpha.value().all_finite());
  CHECK(bright.beta.value().all_finite());
  CHECK(bright.alpha.value().max_abs_diff(a.alpha.value()) > 0.0);
}

TEST_CASE("generator") {
  const ModelConfig cfg = tiny_model();
  RandomState rng(8);
  TranslationNet<double> net(cfg, rng);
  FrozenSpectralGuard frozen;
  Var<double> r = random_var({1, 3, 8, 8}, 9, false, 0.5);

  SUBCASE("shape ladder") {
    const Var<double> out = net(r);
    CHECK(out.shape() == Shape{1, 3, 32, 32});
    const auto& shapes = net.generator().last_block_shapes();
    REQUIRE(shapes.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
      const auto& spec = cfg.generator_layers[i];
      CHECK(shapes[i] == Shape{1, spec.channels, spec.height, spec.width});
    }
    CHECK(out.value().vec().cwiseAbs().maxCoeff() < 1.0);
  }
  SUBCASE("identical exemplars in a batch give identical outputs") {
    const Tensor<double> out = net(ops::repeat_batch(r, 2)).value();
    CHECK(out.channels(0) == out.channels(1));
  }
  SUBCASE("warped exemplar must sit on the correlation grid") {
    CHECK_THROWS_AS(net(random_var({1, 3, 16, 16}, 10, false)), ShapeError);
  }
  SUBCASE("invalid ladders are rejected at construction") {
    ModelConfig bad = cfg;
    bad.generator_layers[3] = {32, 32, 6};
    RandomState r2(11);
    CHECK_THROWS_AS(Generator<double>(bad, r2), ConfigError);
  }
  SUBCASE("nonlocal gain starts at zero") {
    ParameterSet<double> params;
    net.collect("t", params);
    bool found = false;
    for (auto& [name, v] : params.params)
      if (name == "t.gen.nonlocal.gamma") {
        found = true;
        CHECK(v.value()[0] == 0.0);
      }
    CHECK(found);
  }
  SUBCASE("pixel to style weight gradient") {
    ParameterSet<double> params;
    net.styles().encoder(2).collect("s", params);
    Var<double> weight;
    for (auto& [name, v] : params.params)
      if (name == "s.conv1.weight") weight = v;
    REQUIRE(weight.defined());
    auto pixel = [&] { return pick(net(r), 0, 1, 13, 20); };
    CHECK(gradient_error(weight, pixel, 1e-6) < 1e-3);
    Var<double> rg = random_var({1, 3, 8, 8}, 12, true, 0.5);
    CHECK(gradient_error(rg, [&] { return project(net(rg)); }, 1e-6, 48) < 1e-3);
  }
}

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/SVD>

#include "test_support.hpp"
#include "warpsynth/discriminator.hpp"

using namespace warpsynth;
using warpsynth::testing::random_var;

namespace {

ModelConfig critic_model() {
  ModelConfig m;
  m.input_channels = 4;
  m.image_size = 32;
  m.corr_size = 8;
  m.generator_layers = {{4, 4, 8}, {8, 8, 8}, {8, 8, 8}, {16, 16, 8}, {16, 16, 8}, {16, 16, 8}, {32, 32, 8}};
  m.disc_base_channels = 8;
  m.disc_layers = 3;
  m.disc_scales = 2;
  return m;
}

double top_singular_value(const Tensor<double>& w) {
  const Shape s = w.shape();
  Eigen::MatrixXd m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      w.data(), s.n, s.c * s.h * s.w);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()[0];
}

}  // namespace

TEST_CASE("logit grids per scale") {
  const ModelConfig cfg = critic_model();
  RandomState rng(1);
  PatchDiscriminator<double> d(cfg, rng);
  REQUIRE(d.scales() == 2);
  Var<double> x_a = random_var({2, 4, 32, 32}, 2, false);
  Var<double> img = random_var({2, 3, 32, 32}, 3, true);
  FrozenSpectralGuard frozen;
  const auto logits = criticize(x_a, img, d);
  REQUIRE(logits.size() == 2);
  CHECK(logits[0].shape() == Shape{2, 1, 4, 4});
  CHECK(logits[1].shape() == Shape{2, 1, 2, 2});

  SUBCASE("full resolution") {
    ModelConfig big = ExperimentConfig{}.model;
    big.input_channels = 4;
    RandomState r2(4);
    PatchDiscriminator<float> dbig(big, r2);
    NoGradGuard no_grad;
    Var<float> xa(Tensor<float>(Shape{1, 4, 256, 256}));
    Var<float> y(Tensor<float>(Shape{1, 3, 256, 256}));
    const auto l = dbig(xa, y);
    CHECK(l[0].shape() == Shape{1, 1, 32, 32});
    CHECK(l[1].shape() == Shape{1, 1, 16, 16});
  }
  SUBCASE("deterministic") {
    const auto again = d(x_a, img);
    for (std::size_t s = 0; s < 2; ++s) CHECK(again[s].value().vec() == logits[s].value().vec());
  }
  SUBCASE("candidate pixels receive gradient") {
    std::vector<Var<double>> means;
    for (const auto& l : logits) means.push_back(ops::mean(l));
    backward(ops::weighted_sum<double>(means, {1.0, 1.0}));
    CHECK(img.grad().vec().norm() > 0.0);
  }
  SUBCASE("scales are independent critics") {
    ParameterSet<double> params;
    d.collect("d", params);
    for (auto& [name, v] : params.params)
      if (name.rfind("d.scale1.", 0) == 0) v.mutable_value().vec().setZero();
    const auto changed = d(x_a, img);
    CHECK(changed[0].value().vec() == logits[0].value().vec());
    CHECK(changed[1].value().max_abs_diff(logits[1].value()) > 0.0);
  }
  SUBCASE("mismatched inputs") {
    CHECK_THROWS_AS(d(x_a, random_var({2, 3, 16, 16}, 5, false)), ShapeError);
  }
}

TEST_CASE("spectral normalization bounds every layer") {
  const ModelConfig cfg = critic_model();
  RandomState rng(6);
  PatchDiscriminator<double> d(cfg, rng);
  Var<double> x_a = random_var({1, 4, 32, 32}, 7, false);
  Var<double> img = random_var({1, 3, 32, 32}, 8, false);
  for (int i = 0; i < 50; ++i) d(x_a, img);  // each graph-building pass runs one power iteration

  ParameterSet<double> params;
  d.collect("d", params);
  int checked = 0;
  for (auto& [name, u] : params.buffers) {
    const std::string stem = name.substr(0, name.size() - 2);
    for (auto& [pname, w] : params.params) {
      if (pname != stem + ".weight") continue;
      NoGradGuard no_grad;
      const Tensor<double> normalized = ops::spectral_normalize(w, *u, false).value();
      CHECK(top_singular_value(normalized) <= 1.05);
      ++checked;
    }
  }
  CHECK(checked == 2 * 4);
}

TEST_CASE("stacks deeper than the input are rejected") {
  ModelConfig cfg = critic_model();
  cfg.disc_layers = 5;
  cfg.disc_scales = 2;
  RandomState rng(9);
  CHECK_THROWS_AS(PatchDiscriminator<double>(cfg, rng), ConfigError);
}

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_support.hpp"
#include "warpsynth/archive.hpp"
#include "warpsynth/feature_extractor.hpp"

using namespace warpsynth;
using warpsynth::testing::gradient_error;
using warpsynth::testing::project;
using warpsynth::testing::random_var;

namespace {

ModelConfig small_backbone() {
  ModelConfig m;
  m.backbone_base_channels = 4;
  return m;
}

}  // namespace

TEST_CASE("deterministic-small layout") {
  PerceptualBackbone<double> net(small_backbone());
  const auto names = net.layer_names();
  REQUIRE(names.size() == 10);
  CHECK(names.front() == "relu1_1");
  CHECK(names.back() == "relu5_2");
  CHECK(net.stride("relu4_2") == 8);
  CHECK(net.stride("relu1_2") == 1);

  Var<double> img = random_var({2, 3, 32, 32}, 1, false, 0.5);
  const FeatureSet<double> f = net.extract(img, {"relu4_2"});
  REQUIRE(f.size() == 1);
  CHECK(f.at("relu4_2").shape() == Shape{2, 32, 4, 4});

  const FeatureSet<double> all = net.extract(img, {"relu1_2", "relu2_2", "relu3_2", "relu5_2"});
  CHECK(all.at("relu1_2").shape() == Shape{2, 4, 32, 32});
  CHECK(all.at("relu2_2").shape() == Shape{2, 8, 16, 16});
  CHECK(all.at("relu3_2").shape() == Shape{2, 16, 8, 8});
  CHECK(all.at("relu5_2").shape() == Shape{2, 32, 2, 2});
}

TEST_CASE("frozen determinism") {
  PerceptualBackbone<double> a(small_backbone());
  PerceptualBackbone<double> b(small_backbone());
  Var<double> img = random_var({1, 3, 16, 16}, 2, false);
  const Tensor<double> fa = a.extract(img, {"relu3_2"}).at("relu3_2").value();
  CHECK(a.extract(img, {"relu3_2"}).at("relu3_2").value().vec() == fa.vec());
  CHECK(b.extract(img, {"relu3_2"}).at("relu3_2").value().vec() == fa.vec());
  ModelConfig other = small_backbone();
  other.backbone_seed = 99;
  PerceptualBackbone<double> c(other);
  CHECK(c.extract(img, {"relu3_2"}).at("relu3_2").value().max_abs_diff(fa) > 0.0);
}

TEST_CASE("bad requests") {
  PerceptualBackbone<double> net(small_backbone());
  Var<double> img = random_var({1, 3, 16, 16}, 3, false);
  CHECK_THROWS_AS(net.extract(img, {"relu6_1"}), std::invalid_argument);
  CHECK_THROWS_AS(net.stride("conv1"), std::invalid_argument);
  CHECK_THROWS_AS(net.extract(random_var({1, 4, 16, 16}, 3, false), {"relu1_1"}), ShapeError);
}

TEST_CASE("gradients reach the image but never the weights") {
  PerceptualBackbone<double> net(small_backbone());
  Var<double> img = random_var({1, 3, 8, 8}, 4, true, 0.5);
  auto f = [&] { return project(net.extract(img, {"relu2_2"}).at("relu2_2")); };
  CHECK(gradient_error(img, f) < 1e-6);
  for (const auto& w : net.weights()) {
    CHECK_FALSE(w.requires_grad());
    CHECK((w.grad().empty() || w.grad().vec().norm() == 0.0));
  }
}

TEST_CASE("pretrained archive mode") {
  const auto dir = testing::scratch_dir("vgg");
  ModelConfig cfg;
  cfg.backbone = BackboneMode::PretrainedVgg19;

  SUBCASE("weights are required") { CHECK_THROWS_AS(PerceptualBackbone<float>{cfg}, ConfigError); }

  // A random archive with the VGG-19 convolution shapes stands in for converted weights.
  const std::vector<Index> widths = {64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512, 512, 512, 512, 512};
  ArchiveWriter writer;
  RandomState rng(5);
  Index in = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string key = "conv" + std::to_string(i);
    writer.add(key + ".weight", rng.normal_tensor<float>(Shape{widths[i], in, 3, 3}, 0.05f));
    writer.add(key + ".bias", rng.normal_tensor<float>(Shape{1, 1, 1, widths[i]}, 0.05f));
    in = widths[i];
  }
  const auto path = dir / "vgg19.wsa";
  writer.write(path, 0);
  cfg.backbone_weights = path.string();

  SUBCASE("layout and input renormalization") {
    PerceptualBackbone<float> net(cfg);
    CHECK(net.layer_names().size() == 16);
    CHECK(net.stride("relu5_4") == 16);
    NoGradGuard no_grad;
    Var<float> img(RandomState(6).uniform_tensor<float>(Shape{1, 3, 8, 8}, -1.0f, 1.0f));
    const Tensor<float> got = net.extract(img, {"relu1_1"}).at("relu1_1").value();
    // Oracle: map [-1, 1] to [0, 1], standardize with the ImageNet statistics, convolve.
    const double mean[3] = {0.485, 0.456, 0.406};
    const double stdv[3] = {0.229, 0.224, 0.225};
    Tensor<float> renorm(img.shape());
    for (Index c = 0; c < 3; ++c)
      for (Index p = 0; p < 64; ++p)
        renorm.channels(0)(c, p) =
            static_cast<float>(((img.value().channels(0)(c, p) + 1.0) / 2.0 - mean[c]) / stdv[c]);
    ArchiveReader reader(path);
    const Tensor<float> want = ops::relu(ops::conv2d(Var<float>(renorm), Var<float>(reader.get<float>("conv0.weight")),
                                                     Var<float>(reader.get<float>("conv0.bias").reshaped(Shape{1, 64, 1, 1})),
                                                     1, 1))
                                   .value();
    CHECK(got.max_abs_diff(want) < 1e-4);
  }
  SUBCASE("checksum mismatch") {
    cfg.backbone_checksum = "0000000000000000";
    CHECK_THROWS_AS(PerceptualBackbone<float>{cfg}, ConfigError);
    cfg.backbone_checksum = hash_hex(ArchiveReader(path).file_checksum());
    CHECK_NOTHROW(PerceptualBackbone<float>{cfg});
  }
}

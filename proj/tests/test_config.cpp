// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>

#include "test_support.hpp"
#include "warpsynth/config.hpp"

using namespace warpsynth;

TEST_CASE("minimal config takes documented defaults") {
  const ExperimentConfig c = parse_config("model:\n  softmax_alpha: 100\n");
  CHECK(c.model.softmax_alpha == 100.0);
  CHECK(c.model.pn_epsilon == 1e-5);
  CHECK(c.model.corr_size == 64);
  CHECK(c.model.image_size == 256);
  CHECK(c == ExperimentConfig{});
}

TEST_CASE("default objective weights") {
  const LossConfig l;
  CHECK(l.psi_feat == 10.0);
  CHECK(l.psi_perc == 1.0);
  CHECK(l.psi_context == 1.0);
  CHECK(l.psi_adv == 1.0);
  CHECK(l.psi_domain == 10.0);
  CHECK(l.psi_reg == 1.0);
  REQUIRE(l.lambda_feat.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(l.lambda_feat[i] == doctest::Approx(1.0 / std::pow(2.0, 4 - i)));
  CHECK(l.perc_layer == "relu4_2");
}

TEST_CASE("corr_size must divide image_size") {
  CHECK_THROWS_AS(parse_config("model:\n  image_size: 256\n  corr_size: 48\n"), ConfigError);
  try {
    parse_config("model:\n  image_size: 256\n  corr_size: 48\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("corr_size") != std::string::npos);
  }
}

TEST_CASE("invalid values name their key") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("model:\n  softmax_alpha: -1\n").find("softmax_alpha") != std::string::npos);
  CHECK(message("train:\n  pseudo_prob: 1.5\n").find("pseudo_prob") != std::string::npos);
  CHECK(message("model:\n  bogus: 1\n").find("model.bogus") != std::string::npos);
  CHECK(message("extra: {}\n").find("extra") != std::string::npos);
  CHECK(message("model:\n  task: sketch\n").find("model.task") != std::string::npos);
  CHECK(message("loss:\n  perc_layer: relu9_9\n").find("perc_layer") != std::string::npos);
  CHECK(message("model: [1, 2\n").find("parse error") != std::string::npos);
}

TEST_CASE("serialize round trips") {
  SUBCASE("defaults") {
    const ExperimentConfig c;
    CHECK(parse_config(serialize(c)) == c);
  }
  SUBCASE("desk preset") {
    const ExperimentConfig c = testing::desk_config();
    CHECK(c.model.image_size == 32);
    CHECK(parse_config(serialize(c)) == c);
  }
  SUBCASE("edited values") {
    ExperimentConfig c = testing::desk_config();
    c.model.task = TaskKind::Pose;
    c.model.input_channels = 3;
    c.loss.context_bandwidth = 0.1 + 0.2;  // not exactly representable in short decimal
    c.train.seed = 0xfedcba9876543210ULL;
    c.augment.tps_jitter = 1.0 / 3.0;
    CHECK(parse_config(serialize(c)) == c);
  }
}

TEST_CASE("config hash covers model and loss only") {
  ExperimentConfig a = testing::desk_config();
  ExperimentConfig b = a;
  b.train.steps = 7;
  b.train.seed = 99;
  CHECK(config_hash(a) == config_hash(b));
  b.model.softmax_alpha = 50;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.loss.psi_reg = 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(hash_hex(0x1f).size() == 16);
}

TEST_CASE("deterministic flag from the environment") {
  ::setenv("WARPSYNTH_DETERMINISTIC", "0", 1);
  CHECK_FALSE(deterministic_from_env(true));
  ::setenv("WARPSYNTH_DETERMINISTIC", "1", 1);
  CHECK(deterministic_from_env(false));
  ::unsetenv("WARPSYNTH_DETERMINISTIC");
  CHECK(deterministic_from_env(true));
  CHECK_FALSE(deterministic_from_env(false));
}

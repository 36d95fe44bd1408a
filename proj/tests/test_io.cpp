// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include "test_support.hpp"
#include "warpsynth/archive.hpp"
#include "warpsynth/image_io.hpp"

using namespace warpsynth;

TEST_CASE("archive round trip") {
  const auto dir = testing::scratch_dir("archive");
  RandomState rng(1);
  const Tensor<float> f = rng.normal_tensor<float>(Shape{2, 3, 4, 5});
  const Tensor<double> d = rng.normal_tensor<double>(Shape{1, 1, 1, 7});
  ArchiveWriter w;
  w.add("a/float", f);
  w.add("b/double", d);
  w.add("empty", Tensor<float>(Shape{0, 0, 0, 0}));
  w.meta() = {{"iteration", 12}, {"note", "x"}};
  CHECK_THROWS_AS(w.add("a/float", f), ArchiveError);
  w.write(dir / "x.wsa", 0xabcdef);

  ArchiveReader r(dir / "x.wsa");
  CHECK(r.config_hash() == 0xabcdef);
  CHECK(r.meta().at("iteration") == 12);
  CHECK(r.contains("b/double"));
  CHECK_FALSE(r.contains("c"));
  CHECK(r.names().size() == 3);
  CHECK(r.shape("a/float") == f.shape());
  CHECK(r.get<float>("a/float").vec() == f.vec());
  CHECK(r.get<double>("b/double").vec() == d.vec());
  CHECK(r.get<double>("a/float").vec() == f.vec().cast<double>());
  CHECK(r.get<float>("b/double").vec() == d.vec().cast<float>());
  CHECK_THROWS_AS(r.get<float>("missing"), ArchiveError);
  CHECK(r.file_checksum() == ArchiveReader(dir / "x.wsa").file_checksum());

  SUBCASE("corruption is detected") {
    std::ofstream(dir / "bad.wsa") << "not an archive at all, definitely";
    CHECK_THROWS_AS(ArchiveReader(dir / "bad.wsa"), ArchiveError);
    std::ifstream in(dir / "x.wsa", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 8);
    std::ofstream(dir / "short.wsa", std::ios::binary) << bytes;
    CHECK_THROWS_AS(ArchiveReader(dir / "short.wsa"), ArchiveError);
    CHECK_THROWS_AS(ArchiveReader(dir / "absent.wsa"), ArchiveError);
  }
}

TEST_CASE("png round trips") {
  const auto dir = testing::scratch_dir("png");
  RawImage rgb{3, 4, 3, {}};
  for (int i = 0; i < 36; ++i) rgb.pixels.push_back(static_cast<std::uint8_t>(i * 7));
  write_png(dir / "rgb.png", rgb);
  const RawImage back = read_png(dir / "rgb.png");
  CHECK(back.height == 3);
  CHECK(back.width == 4);
  CHECK(back.channels == 3);
  CHECK(back.pixels == rgb.pixels);

  const std::vector<int> labels = {0, 1, 2, 3, 3, 2};
  write_labels(dir / "labels.png", labels, 2, 3);
  Index h = 0, w = 0;
  CHECK(read_labels(dir / "labels.png", &h, &w) == labels);
  CHECK(h == 2);
  CHECK(w == 3);

  Tensor<float> photo(Shape{2, 3, 5, 6});
  for (Index i = 0; i < photo.size(); ++i) photo[i] = static_cast<float>(i % 255) / 127.5f - 1.0f;
  write_photo(dir / "photo.png", photo, 1);
  const Tensor<float> loaded = read_photo(dir / "photo.png");
  CHECK(loaded.shape() == Shape{1, 3, 5, 6});
  CHECK(loaded.vec().isApprox(photo.vec().tail(90), 1e-2f));
  CHECK(loaded.max_abs_diff(Tensor<float>(Shape{1, 3, 5, 6}, photo.vec().tail(90))) <= 1.0f / 255.0f + 1e-6f);

  const Tensor<float> pair = side_by_side({photo, photo}, 0);
  CHECK(pair.shape() == Shape{1, 3, 5, 12});
  CHECK_THROWS_AS(read_png(dir / "none.png"), ImageIoError);
}

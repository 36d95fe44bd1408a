// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_support.hpp"
#include "warpsynth/cli.hpp"
#include "warpsynth/data.hpp"
#include "warpsynth/image_io.hpp"

using namespace warpsynth;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "warpsynth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// One shared short training run: data, a 2-step checkpoint, sample paths.
struct Fixture {
  fs::path dir, data, ckpt, input, exemplar, run_dir;
  Fixture() {
    dir = testing::scratch_dir("cli");
    data = dir / "data";
    const auto gen = run({"gen-toy-data", "--out", data.string(), "--count", "10", "--size", "32", "--seed", "5"});
    REQUIRE(gen.code == 0);
    const auto train = run({"train", "--config", testing::source_path("configs/desk32.yaml").string(), "--data",
                            data.string(), "--out", (dir / "runs").string(), "--steps", "2"});
    REQUIRE_MESSAGE(train.code == 0, train.err);
    run_dir = *fs::directory_iterator(dir / "runs");
    ckpt = run_dir / "checkpoints" / "last.ckpt";
    input = data / "annotations" / "0000.png";
    exemplar = data / "images" / "0001.png";
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("cli: argument errors exit with code 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"infer", "--out", "x.png"}).code == 2);
  CHECK(run({"gen-toy-data", "--out", "x", "--task", "painting"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("cli: train with a missing manifest names the path") {
  const fs::path dir = testing::scratch_dir("cli_missing");
  const auto r = run({"train", "--config", testing::source_path("configs/desk32.yaml").string(), "--data",
                      (dir / "nowhere").string(), "--out", (dir / "runs").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find((dir / "nowhere" / "manifest.json").string()) != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "runs"));
}

TEST_CASE("cli: invalid config exits with code 2") {
  const fs::path dir = testing::scratch_dir("cli_badcfg");
  std::ofstream(dir / "bad.yaml") << "model:\n  image_size: 48\n";
  const auto r = run({"train", "--config", (dir / "bad.yaml").string(), "--data", (dir / "d").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("config") != std::string::npos);
}

TEST_CASE("cli: train writes a run directory with config, log and checkpoint") {
  auto& f = fixture();
  CHECK(fs::exists(f.run_dir / "config.yaml"));
  CHECK(fs::exists(f.ckpt));
  std::ifstream log(f.run_dir / "train.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("total"));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("cli: resume continues the same run") {
  auto& f = fixture();
  const fs::path copy = f.dir / "resume_run";
  fs::remove_all(copy);
  fs::copy(f.run_dir, copy, fs::copy_options::recursive);
  const auto r = run({"train", "--config", testing::source_path("configs/desk32.yaml").string(), "--data",
                      f.data.string(), "--steps", "3", "--resume", (copy / "checkpoints" / "last.ckpt").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::ifstream log(copy / "train.jsonl");
  std::string line, last;
  while (std::getline(log, line)) last = line;
  CHECK(nlohmann::json::parse(last)["iteration"] == 3);
}

TEST_CASE("cli: infer is bit-identical across runs and has the model resolution") {
  auto& f = fixture();
  const auto a = f.dir / "a.png", b = f.dir / "b.png", sbs = f.dir / "sbs.png", w = f.dir / "w.png";
  REQUIRE(run({"infer", "--checkpoint", f.ckpt.string(), "--input", f.input.string(), "--exemplar",
               f.exemplar.string(), "--out", a.string(), "--dump-warp", w.string(), "--side-by-side", sbs.string()})
              .code == 0);
  REQUIRE(run({"infer", "--checkpoint", f.ckpt.string(), "--input", f.input.string(), "--exemplar",
               f.exemplar.string(), "--out", b.string()})
              .code == 0);
  CHECK(slurp(a) == slurp(b));
  const RawImage img = read_png(a);
  CHECK(img.height == 32);
  CHECK(img.width == 32);
  CHECK(img.channels == 3);
  CHECK(read_png(w).width == 16);
  CHECK(read_png(sbs).width == 64);
}

TEST_CASE("cli: infer rejects a checkpoint trained with another config") {
  auto& f = fixture();
  const auto r = run({"infer", "--checkpoint", f.ckpt.string(), "--config",
                      testing::source_path("configs/desk64.yaml").string(), "--input", f.input.string(),
                      "--exemplar", f.exemplar.string(), "--out", (f.dir / "c.png").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("config hash mismatch") != std::string::npos);
  CHECK_FALSE(fs::exists(f.dir / "c.png"));
}

TEST_CASE("cli: warp exports one match per query in grid coordinates") {
  auto& f = fixture();
  std::ofstream(f.dir / "q.txt") << "# row col\n0 0\n15 15\n7 3\n";
  const auto r = run({"warp", "--checkpoint", f.ckpt.string(), "--input", f.input.string(), "--exemplar",
                      f.exemplar.string(), "--out", (f.dir / "warp.png").string(), "--points",
                      (f.dir / "q.txt").string(), "--points-out", (f.dir / "m.txt").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  std::ifstream in(f.dir / "m.txt");
  const int queries[3][2] = {{0, 0}, {15, 15}, {7, 3}};
  int n = 0;
  for (int ur, uc, vr, vc; in >> ur >> uc >> vr >> vc; ++n) {
    REQUIRE(n < 3);
    CHECK(ur == queries[n][0]);
    CHECK(uc == queries[n][1]);
    CHECK((vr >= 0 && vr < 16 && vc >= 0 && vc < 16));
  }
  CHECK(n == 3);
}

TEST_CASE("cli: warp rejects points outside the grid") {
  auto& f = fixture();
  std::ofstream(f.dir / "bad.txt") << "3 16\n";
  const auto r = run({"warp", "--checkpoint", f.ckpt.string(), "--input", f.input.string(), "--exemplar",
                      f.exemplar.string(), "--out", (f.dir / "warp2.png").string(), "--points",
                      (f.dir / "bad.txt").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("outside") != std::string::npos);
}

TEST_CASE("cli: edit renders the edited mask and checks class counts") {
  auto& f = fixture();
  Index h = 0, w = 0;
  std::vector<int> labels = read_labels(f.input, &h, &w);
  for (Index i = 0; i < h * w / 2; ++i) labels[static_cast<std::size_t>(i)] = 1;
  write_labels(f.dir / "edited.png", labels, h, w);
  const auto ok = run({"edit", "--checkpoint", f.ckpt.string(), "--image", f.exemplar.string(), "--mask",
                       f.input.string(), "--edited-mask", (f.dir / "edited.png").string(), "--out",
                       (f.dir / "e.png").string()});
  REQUIRE_MESSAGE(ok.code == 0, ok.err);
  CHECK(read_png(f.dir / "e.png").width == 32);

  labels[0] = 9;  // the desk model has 4 classes
  write_labels(f.dir / "toomany.png", labels, h, w);
  const auto bad = run({"edit", "--checkpoint", f.ckpt.string(), "--image", f.exemplar.string(), "--mask",
                        f.input.string(), "--edited-mask", (f.dir / "toomany.png").string(), "--out",
                        (f.dir / "e2.png").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("class 9") != std::string::npos);
}

TEST_CASE("cli: metrics reports the three scores and identity gives full consistency") {
  auto& f = fixture();
  const auto r = run({"metrics", "--checkpoint", f.ckpt.string(), "--data", f.data.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto j = nlohmann::json::parse(r.out);
  for (const char* key : {"semantic_consistency", "style_color", "style_texture"}) {
    REQUIRE(j.contains(key));
    CHECK(j[key].get<double>() <= 1.0 + 1e-9);
  }
  const auto id = run({"metrics", "--checkpoint", f.ckpt.string(), "--data", f.data.string(), "--identity-outputs",
                       "--out", (f.dir / "m.json").string()});
  REQUIRE(id.code == 0);
  const auto jid = nlohmann::json::parse(slurp(f.dir / "m.json"));
  CHECK(jid["semantic_consistency"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));

  const auto empty = run({"metrics", "--checkpoint", f.ckpt.string(), "--data", f.data.string(), "--split", "test"});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("empty") != std::string::npos);
}

TEST_CASE("shipped configs load and validate") {
  for (const char* name : {"configs/desk32.yaml", "configs/desk64.yaml", "configs/full256.yaml"}) {
    CAPTURE(name);
    CHECK_NOTHROW(validate(load_config(testing::source_path(name))));
  }
  const auto full = load_config(testing::source_path("configs/full256.yaml"));
  CHECK(full.model.image_size == 256);
  CHECK(full.model.corr_size == 64);
}

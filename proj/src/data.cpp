// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "warpsynth/image_io.hpp"

namespace warpsynth {

Tensor<float> rasterize_mask(const std::vector<int>& labels, Index height, Index width, Index classes) {
  if (static_cast<Index>(labels.size()) != height * width)
    throw DataError("rasterize_mask: label map has " + std::to_string(labels.size()) + " entries, expected " +
                    std::to_string(height * width));
  Tensor<float> out(Shape{1, classes, height, width});
  for (Index i = 0; i < height * width; ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    if (k < 0 || k >= classes)
      throw DataError("rasterize_mask: label " + std::to_string(k) + " outside [0, " + std::to_string(classes) + ")");
    out[k * height * width + i] = 1.0f;
  }
  return out;
}

Tensor<float> rasterize_edges(const std::vector<Polyline>& lines, Index height, Index width) {
  Tensor<float> out(Shape{1, 1, height, width});
  auto plot = [&](Index r, Index c) {
    if (r >= 0 && r < height && c >= 0 && c < width) out(0, 0, r, c) = 1.0f;
  };
  for (const auto& line : lines) {
    if (line.size() == 1) plot(std::lround(line[0].row), std::lround(line[0].col));
    for (std::size_t i = 1; i < line.size(); ++i) {
      Index r0 = std::lround(line[i - 1].row), c0 = std::lround(line[i - 1].col);
      const Index r1 = std::lround(line[i].row), c1 = std::lround(line[i].col);
      const Index dr = std::abs(r1 - r0), dc = -std::abs(c1 - c0);
      const Index sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
      Index err = dr + dc;
      while (true) {
        plot(r0, c0);
        if (r0 == r1 && c0 == c1) break;
        const Index e2 = 2 * err;
        if (e2 >= dc) {
          err += dc;
          r0 += sr;
        }
        if (e2 <= dr) {
          err += dr;
          c0 += sc;
        }
      }
    }
  }
  return out;
}

Tensor<float> rasterize_pose(const std::vector<Point2>& keypoints, Index height, Index width, double sigma,
                             std::vector<std::string>* warnings) {
  const Index joints = static_cast<Index>(keypoints.size());
  Tensor<float> out(Shape{1, joints, height, width});
  for (Index j = 0; j < joints; ++j) {
    Point2 p = keypoints[static_cast<std::size_t>(j)];
    if (p.row < 0 || p.col < 0) continue;
    if (p.row > height - 1 || p.col > width - 1) {
      if (warnings)
        warnings->push_back("keypoint " + std::to_string(j) + " at (" + std::to_string(p.row) + ", " +
                            std::to_string(p.col) + ") clamped into the frame");
      p.row = std::min<double>(p.row, height - 1);
      p.col = std::min<double>(p.col, width - 1);
    }
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c) {
        const double d2 = (r - p.row) * (r - p.row) + (c - p.col) * (c - p.col);
        out(0, j, r, c) = static_cast<float>(std::exp(-d2 / (2 * sigma * sigma)));
      }
  }
  return out;
}

Tensor<float> label_boundaries(const std::vector<int>& labels, Index height, Index width) {
  Tensor<float> out(Shape{1, 1, height, width});
  auto at = [&](Index r, Index c) { return labels[static_cast<std::size_t>(r * width + c)]; };
  for (Index r = 0; r < height; ++r)
    for (Index c = 0; c < width; ++c) {
      const int v = at(r, c);
      const bool edge = (r > 0 && at(r - 1, c) != v) || (r + 1 < height && at(r + 1, c) != v) ||
                        (c > 0 && at(r, c - 1) != v) || (c + 1 < width && at(r, c + 1) != v);
      out(0, 0, r, c) = edge ? 1.0f : 0.0f;
    }
  return out;
}

Tensor<float> sobel_edges(const Tensor<float>& photo, double threshold) {
  const Shape s = photo.shape();
  Eigen::MatrixXd lum(s.h, s.w);
  for (Index r = 0; r < s.h; ++r)
    for (Index c = 0; c < s.w; ++c) {
      const double v = s.c == 3 ? 0.299 * photo(0, 0, r, c) + 0.587 * photo(0, 1, r, c) + 0.114 * photo(0, 2, r, c)
                                : photo(0, 0, r, c);
      lum(r, c) = (v + 1.0) / 2.0;
    }
  auto px = [&](Index r, Index c) { return lum(std::clamp<Index>(r, 0, s.h - 1), std::clamp<Index>(c, 0, s.w - 1)); };
  Tensor<float> out(Shape{1, 1, s.h, s.w});
  for (Index r = 0; r < s.h; ++r)
    for (Index c = 0; c < s.w; ++c) {
      const double gx = px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1) - px(r - 1, c - 1) -
                        2 * px(r, c - 1) - px(r + 1, c - 1);
      const double gy = px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1) - px(r - 1, c - 1) -
                        2 * px(r - 1, c) - px(r - 1, c + 1);
      out(0, 0, r, c) = std::hypot(gx, gy) / 4.0 > threshold ? 1.0f : 0.0f;
    }
  return out;
}

bool AugmentationRecord::is_identity() const {
  auto zero = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0; }); };
  return !flip && rotation_rad == 0 && scale == 1 && translate_row == 0 && translate_col == 0 && zero(tps_dx) &&
         zero(tps_dy);
}

AugmentationRecord draw_augmentation(const AugmentationSpec& spec, Index height, Index width) {
  RandomState rng(spec.seed);
  AugmentationRecord rec;
  rec.flip = rng.bernoulli(spec.flip_prob);
  rec.rotation_rad = rng.uniform(-spec.rotation_deg, spec.rotation_deg) * std::numbers::pi / 180.0;
  rec.scale = spec.scale_min == spec.scale_max ? spec.scale_min : rng.uniform(spec.scale_min, spec.scale_max);
  rec.translate_row = rng.uniform(-spec.translate_frac, spec.translate_frac) * static_cast<double>(height);
  rec.translate_col = rng.uniform(-spec.translate_frac, spec.translate_frac) * static_cast<double>(width);
  for (int k = 0; k < 9; ++k) {
    rec.tps_dy.push_back(rng.uniform(-spec.tps_jitter, spec.tps_jitter) * static_cast<double>(height));
    rec.tps_dx.push_back(rng.uniform(-spec.tps_jitter, spec.tps_jitter) * static_cast<double>(width));
  }
  return rec;
}

namespace {

// Thin-plate spline through displacements on a 3×3 grid over [0, 1]².
class ThinPlate {
 public:
  ThinPlate(const std::vector<double>& dy, const std::vector<double>& dx) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ctrl_.push_back({i / 2.0, j / 2.0});
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(12, 12);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(12, 2);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) system(i, j) = kernel(ctrl_[i], ctrl_[j]);
      system(i, 9) = system(9, i) = 1;
      system(i, 10) = system(10, i) = ctrl_[i].row;
      system(i, 11) = system(11, i) = ctrl_[i].col;
      rhs(i, 0) = dy[static_cast<std::size_t>(i)];
      rhs(i, 1) = dx[static_cast<std::size_t>(i)];
    }
    coef_ = system.fullPivLu().solve(rhs);
  }

  Point2 operator()(const Point2& p) const {
    Point2 out{coef_(9, 0) + coef_(10, 0) * p.row + coef_(11, 0) * p.col,
               coef_(9, 1) + coef_(10, 1) * p.row + coef_(11, 1) * p.col};
    for (int i = 0; i < 9; ++i) {
      const double u = kernel(p, ctrl_[i]);
      out.row += coef_(i, 0) * u;
      out.col += coef_(i, 1) * u;
    }
    return out;
  }

 private:
  static double kernel(const Point2& a, const Point2& b) {
    const double r2 = (a.row - b.row) * (a.row - b.row) + (a.col - b.col) * (a.col - b.col);
    return r2 > 0 ? r2 * std::log(r2) : 0.0;
  }
  std::vector<Point2> ctrl_;
  Eigen::MatrixXd coef_;
};

}  // namespace

Tensor<float> apply_augmentation(const Tensor<float>& image, const AugmentationRecord& record, Resample mode) {
  if (record.is_identity()) return image;
  const Shape s = image.shape();
  const double cr = (s.h - 1) / 2.0;
  const double cc = (s.w - 1) / 2.0;
  const double cos_t = std::cos(record.rotation_rad);
  const double sin_t = std::sin(record.rotation_rad);
  const bool has_tps = !record.tps_dx.empty();
  std::optional<ThinPlate> tps;
  if (has_tps) tps.emplace(record.tps_dy, record.tps_dx);

  // Source coordinates for every output pixel.
  std::vector<Point2> src(static_cast<std::size_t>(s.plane()));
  for (Index r = 0; r < s.h; ++r)
    for (Index c = 0; c < s.w; ++c) {
      const double col = record.flip ? (s.w - 1) - c : c;
      const double yr = (r - cr) / record.scale;
      const double yc = (col - cc) / record.scale;
      Point2 p{cr + cos_t * yr - sin_t * yc + record.translate_row, cc + sin_t * yr + cos_t * yc + record.translate_col};
      if (tps) {
        const Point2 d = (*tps)({r / std::max<double>(1, s.h - 1), c / std::max<double>(1, s.w - 1)});
        p.row += d.row;
        p.col += d.col;
      }
      src[static_cast<std::size_t>(r * s.w + c)] = p;
    }

  Tensor<float> out(s);
  for (Index n = 0; n < s.n; ++n)
    for (Index k = 0; k < s.c; ++k) {
      auto in = [&](Index r, Index c) {
        return image(n, k, std::clamp<Index>(r, 0, s.h - 1), std::clamp<Index>(c, 0, s.w - 1));
      };
      for (Index i = 0; i < s.plane(); ++i) {
        const Point2& p = src[static_cast<std::size_t>(i)];
        float v;
        if (mode == Resample::Nearest) {
          v = in(std::lround(p.row), std::lround(p.col));
        } else {
          const double r0 = std::floor(p.row), c0 = std::floor(p.col);
          const double fr = p.row - r0, fc = p.col - c0;
          const Index ri = static_cast<Index>(r0), ci = static_cast<Index>(c0);
          v = static_cast<float>((1 - fr) * ((1 - fc) * in(ri, ci) + fc * in(ri, ci + 1)) +
                                 fr * ((1 - fc) * in(ri + 1, ci) + fc * in(ri + 1, ci + 1)));
        }
        out.channels(n)(k, i) = v;
      }
    }
  return out;
}

std::pair<Tensor<float>, AugmentationRecord> make_pseudo_pair(const Tensor<float>& x_b, const AugmentationSpec& spec) {
  AugmentationRecord rec = draw_augmentation(spec, x_b.h(), x_b.w());
  return {apply_augmentation(x_b, rec, Resample::Bilinear), rec};
}

std::vector<Index> Batch::pseudo_indices() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < is_pseudo.size(); ++i)
    if (is_pseudo[i]) out.push_back(static_cast<Index>(i));
  return out;
}

std::vector<PairedSample> sample_batch(const Dataset& data, Index batch, double pseudo_prob,
                                       const AugmentationSpec& augment, RandomState& rng) {
  if (pseudo_prob < 0 || pseudo_prob > 1) throw DataError("sample_batch: pseudo_prob must lie in [0, 1]");
  const Index n = data.size();
  if (n < 1) throw DataError("sample_batch: empty dataset");
  if (n < 2 && pseudo_prob < 1) throw DataError("sample_batch: need at least 2 samples when pseudo_prob < 1");
  std::vector<PairedSample> out;
  for (Index b = 0; b < batch; ++b) {
    PairedSample s;
    s.index = rng.integer(0, n - 1);
    s.x_a = data.x_a[static_cast<std::size_t>(s.index)];
    s.x_b = data.x_b[static_cast<std::size_t>(s.index)];
    s.is_pseudo = rng.bernoulli(pseudo_prob);
    if (s.is_pseudo) {
      AugmentationSpec spec = augment;
      spec.seed = static_cast<std::uint64_t>(rng.integer(0, std::numeric_limits<std::int64_t>::max()));
      auto [exemplar, rec] = make_pseudo_pair(s.x_b, spec);
      s.exemplar = std::move(exemplar);
      s.exemplar_x_a = apply_augmentation(s.x_a, rec, Resample::Nearest);
      s.augmentation = std::move(rec);
      s.exemplar_index = s.index;
    } else {
      Index other = rng.integer(0, n - 2);
      if (other >= s.index) ++other;
      s.exemplar_index = other;
      s.exemplar = data.x_b[static_cast<std::size_t>(other)];
      s.exemplar_x_a = data.x_a[static_cast<std::size_t>(other)];
    }
    out.push_back(std::move(s));
  }
  return out;
}

Batch stack(const std::vector<PairedSample>& samples) {
  if (samples.empty()) throw DataError("stack: empty batch");
  Batch b;
  const Index n = static_cast<Index>(samples.size());
  auto stack_one = [&](auto member) {
    const Shape s = (samples[0].*member).shape();
    Tensor<float> out(Shape{n, s.c, s.h, s.w});
    for (Index i = 0; i < n; ++i) {
      const Tensor<float>& t = samples[static_cast<std::size_t>(i)].*member;
      require_shape(t.shape(), s, "stack");
      out.vec().segment(i * s.sample(), s.sample()) = t.vec();
    }
    return out;
  };
  b.x_a = stack_one(&PairedSample::x_a);
  b.x_b = stack_one(&PairedSample::x_b);
  b.exemplar = stack_one(&PairedSample::exemplar);
  b.exemplar_x_a = stack_one(&PairedSample::exemplar_x_a);
  for (const auto& s : samples) {
    b.is_pseudo.push_back(s.is_pseudo);
    b.indices.push_back(s.index);
  }
  return b;
}

ToyScene render_toy_scene(Index size, RandomState& rng) {
  ToyScene scene;
  scene.photo = Tensor<float>(Shape{1, 3, size, size});
  scene.labels.assign(static_cast<std::size_t>(size * size), 0);
  scene.owner.assign(static_cast<std::size_t>(size * size), -1);
  scene.centers.assign(kToyMaxShapes, Point2{-1, -1});
  float bg[3];
  for (float& v : bg) v = static_cast<float>(rng.uniform(-0.8, 0.2));
  for (Index k = 0; k < 3; ++k) scene.photo.channels(0).row(k).setConstant(bg[k]);

  const Index count = rng.integer(1, kToyMaxShapes);
  const double s = static_cast<double>(size);
  for (Index slot = 0; slot < count; ++slot) {
    const int cls = static_cast<int>(rng.integer(1, 3));
    float color[3];
    for (float& v : color) v = static_cast<float>(rng.uniform(-0.2, 1.0));
    const double cr = rng.uniform(0.25 * s, 0.75 * s);
    const double cc = rng.uniform(0.25 * s, 0.75 * s);
    const double hr = rng.uniform(0.12 * s, 0.28 * s);
    const double hc = rng.uniform(0.12 * s, 0.28 * s);
    scene.centers[static_cast<std::size_t>(slot)] = {cr, cc};
    auto inside = [&](double r, double c) {
      switch (cls) {
        case 1:
          return std::abs(r - cr) <= hr && std::abs(c - cc) <= hc;
        case 2:
          return (r - cr) * (r - cr) / (hr * hr) + (c - cc) * (c - cc) / (hc * hc) <= 1.0;
        default: {
          // Apex at the top, base at the bottom.
          if (r < cr - hr || r > cr + hr) return false;
          const double half = hc * (r - (cr - hr)) / (2 * hr);
          return std::abs(c - cc) <= half;
        }
      }
    };
    for (Index r = 0; r < size; ++r)
      for (Index c = 0; c < size; ++c) {
        if (!inside(static_cast<double>(r), static_cast<double>(c))) continue;
        const auto i = static_cast<std::size_t>(r * size + c);
        scene.labels[i] = cls;
        scene.owner[i] = static_cast<int>(slot);
        for (Index k = 0; k < 3; ++k) scene.photo(0, k, r, c) = color[k];
      }
  }
  return scene;
}

Dataset make_toy_dataset(Index count, Index size, TaskKind task, std::uint64_t seed) {
  Dataset data;
  data.task = task;
  data.image_size = size;
  data.classes = task == TaskKind::Mask ? kToyClasses : task == TaskKind::Edge ? 1 : kToyMaxShapes;
  RandomState master(seed);
  for (Index i = 0; i < count; ++i) {
    RandomState rng = master.derive({static_cast<std::uint64_t>(i)});
    ToyScene scene = render_toy_scene(size, rng);
    switch (task) {
      case TaskKind::Mask:
        data.x_a.push_back(rasterize_mask(scene.labels, size, size, kToyClasses));
        break;
      case TaskKind::Edge:
        data.x_a.push_back(label_boundaries(scene.labels, size, size));
        break;
      case TaskKind::Pose:
        data.x_a.push_back(rasterize_pose(scene.centers, size, size, pose_sigma(size)));
        data.keypoints.push_back(scene.centers);
        break;
    }
    data.labels.push_back(std::move(scene.labels));
    data.x_b.push_back(std::move(scene.photo));
  }
  return data;
}

namespace {

std::string pad4(Index i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

void write_dataset(const Dataset& data, const std::filesystem::path& root) {
  nlohmann::json manifest = {{"task", to_string(data.task)},
                             {"classes", data.classes},
                             {"image_size", data.image_size},
                             {"pairs", nlohmann::json::array()}};
  for (Index i = 0; i < data.size(); ++i) {
    const std::string image = "images/" + pad4(i) + ".png";
    std::string annotation = "annotations/" + pad4(i) + (data.task == TaskKind::Pose ? ".json" : ".png");
    write_photo(root / image, data.x_b[static_cast<std::size_t>(i)]);
    const auto& xa = data.x_a[static_cast<std::size_t>(i)];
    switch (data.task) {
      case TaskKind::Mask:
        write_labels(root / annotation, data.labels[static_cast<std::size_t>(i)], data.image_size, data.image_size);
        break;
      case TaskKind::Edge: {
        std::vector<int> px;
        for (Index k = 0; k < xa.size(); ++k) px.push_back(xa[k] > 0.5f ? 255 : 0);
        write_labels(root / annotation, px, data.image_size, data.image_size);
        break;
      }
      case TaskKind::Pose: {
        nlohmann::json kp = nlohmann::json::array();
        for (const auto& p : data.keypoints[static_cast<std::size_t>(i)]) kp.push_back({p.row, p.col});
        std::filesystem::create_directories((root / annotation).parent_path());
        std::ofstream(root / annotation) << nlohmann::json{{"keypoints", kp}}.dump() << "\n";
        break;
      }
    }
    manifest["pairs"].push_back({{"image", image}, {"annotation", annotation}, {"split", i % 5 == 4 ? "val" : "train"}});
  }
  std::filesystem::create_directories(root);
  std::ofstream(root / "manifest.json") << manifest.dump(2) << "\n";
}

Tensor<float> resize_image(const Tensor<float>& image, Index height, Index width, Resample mode) {
  const Shape s = image.shape();
  if (s.h == height && s.w == width) return image;
  Tensor<float> out(Shape{s.n, s.c, height, width});
  const double sr = static_cast<double>(s.h) / height;
  const double sc = static_cast<double>(s.w) / width;
  for (Index n = 0; n < s.n; ++n)
    for (Index k = 0; k < s.c; ++k)
      for (Index r = 0; r < height; ++r)
        for (Index c = 0; c < width; ++c) {
          const double fr = std::max(0.0, (r + 0.5) * sr - 0.5);
          const double fc = std::max(0.0, (c + 0.5) * sc - 0.5);
          if (mode == Resample::Nearest) {
            out(n, k, r, c) = image(n, k, std::min<Index>(s.h - 1, static_cast<Index>((r + 0.5) * sr)),
                                    std::min<Index>(s.w - 1, static_cast<Index>((c + 0.5) * sc)));
            continue;
          }
          const Index r0 = std::min<Index>(static_cast<Index>(fr), s.h - 1);
          const Index c0 = std::min<Index>(static_cast<Index>(fc), s.w - 1);
          const Index r1 = std::min<Index>(r0 + 1, s.h - 1);
          const Index c1 = std::min<Index>(c0 + 1, s.w - 1);
          const double wr = fr - r0, wc = fc - c0;
          out(n, k, r, c) = static_cast<float>((1 - wr) * ((1 - wc) * image(n, k, r0, c0) + wc * image(n, k, r0, c1)) +
                                               wr * ((1 - wc) * image(n, k, r1, c0) + wc * image(n, k, r1, c1)));
        }
  return out;
}

Tensor<float> load_annotation(const std::filesystem::path& path, TaskKind task, Index classes, Index size,
                              std::vector<int>* labels) {
  if (!std::filesystem::exists(path)) throw DataError("annotation not found: " + path.string());
  switch (task) {
    case TaskKind::Mask: {
      Index h = 0, w = 0;
      std::vector<int> raw = read_labels(path, &h, &w);
      Tensor<float> mask = resize_image(rasterize_mask(raw, h, w, classes), size, size, Resample::Nearest);
      if (labels) {
        labels->assign(static_cast<std::size_t>(size * size), 0);
        for (Index i = 0; i < size * size; ++i)
          for (Index k = 0; k < classes; ++k)
            if (mask[k * size * size + i] > 0.5f) (*labels)[static_cast<std::size_t>(i)] = static_cast<int>(k);
      }
      return mask;
    }
    case TaskKind::Edge: {
      const RawImage raw = read_png(path);
      Tensor<float> edges(Shape{1, 1, raw.height, raw.width});
      for (Index i = 0; i < raw.height * raw.width; ++i)
        edges[i] = raw.pixels[static_cast<std::size_t>(i * raw.channels)] > 127 ? 1.0f : 0.0f;
      return resize_image(edges, size, size, Resample::Nearest);
    }
    case TaskKind::Pose: {
      std::ifstream in(path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
      }
      std::vector<Point2> kp;
      for (const auto& p : j.at("keypoints")) kp.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      if (static_cast<Index>(kp.size()) != classes)
        throw DataError(path.string() + ": expected " + std::to_string(classes) + " keypoints, got " +
                        std::to_string(kp.size()));
      return rasterize_pose(kp, size, size, pose_sigma(size));
    }
  }
  throw DataError("unknown task");
}

Dataset load_dataset(const std::filesystem::path& root, const std::string& split) {
  const auto manifest_path = root / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw DataError("manifest not found: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  Dataset data;
  try {
    data.task = parse_task_kind(manifest.at("task").get<std::string>());
    data.classes = manifest.at("classes").get<Index>();
    data.image_size = manifest.at("image_size").get<Index>();
    for (const auto& pair : manifest.at("pairs")) {
      if (!split.empty() && pair.value("split", "train") != split) continue;
      const auto image = root / pair.at("image").get<std::string>();
      const auto annotation = root / pair.at("annotation").get<std::string>();
      if (!std::filesystem::exists(image)) throw DataError("image not found: " + image.string());
      std::vector<int> labels;
      data.x_a.push_back(load_annotation(annotation, data.task, data.classes, data.image_size, &labels));
      data.x_b.push_back(resize_image(read_photo(image), data.image_size, data.image_size, Resample::Bilinear));
      if (data.task == TaskKind::Mask) data.labels.push_back(std::move(labels));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  return data;
}

}  // namespace warpsynth

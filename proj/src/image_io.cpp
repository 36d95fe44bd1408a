// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace warpsynth {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RawImage read_png(const std::filesystem::path& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ImageIoError("cannot open image " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ImageIoError(path.string() + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("libpng initialization failed");
  }
  RawImage out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.height = png_get_image_height(png, info);
  out.width = png_get_image_width(png, info);
  out.channels = png_get_channels(png, info);
  if (out.channels != 1 && out.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(path.string() + ": unsupported channel layout");
  }
  out.pixels.resize(static_cast<std::size_t>(out.height * out.width * out.channels));
  for (Index r = 0; r < out.height; ++r) rows.push_back(out.pixels.data() + r * out.width * out.channels);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::filesystem::path& path, const RawImage& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw ImageIoError("cannot write image " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index r = 0; r < image.height; ++r)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + r * image.width * image.channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor<float> read_photo(const std::filesystem::path& path) {
  const RawImage raw = read_png(path);
  Tensor<float> out(Shape{1, 3, raw.height, raw.width});
  for (Index r = 0; r < raw.height; ++r)
    for (Index c = 0; c < raw.width; ++c)
      for (Index k = 0; k < 3; ++k) {
        const Index src = (r * raw.width + c) * raw.channels + (raw.channels == 3 ? k : 0);
        out(0, k, r, c) = static_cast<float>(raw.pixels[static_cast<std::size_t>(src)]) / 127.5f - 1.0f;
      }
  return out;
}

void write_photo(const std::filesystem::path& path, const Tensor<float>& image, Index n) {
  const Shape s = image.shape();
  if (s.c != 3 && s.c != 1) throw ImageIoError("write_photo: expected 1 or 3 channels, got " + s.str());
  RawImage raw{s.h, s.w, s.c, {}};
  raw.pixels.resize(static_cast<std::size_t>(s.h * s.w * s.c));
  for (Index r = 0; r < s.h; ++r)
    for (Index c = 0; c < s.w; ++c)
      for (Index k = 0; k < s.c; ++k) {
        const float v = std::clamp(image(n, k, r, c), -1.0f, 1.0f);
        raw.pixels[static_cast<std::size_t>((r * s.w + c) * s.c + k)] =
            static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
      }
  write_png(path, raw);
}

std::vector<int> read_labels(const std::filesystem::path& path, Index* height, Index* width) {
  const RawImage raw = read_png(path);
  if (raw.channels != 1) throw ImageIoError(path.string() + ": label maps must be single-channel");
  *height = raw.height;
  *width = raw.width;
  return std::vector<int>(raw.pixels.begin(), raw.pixels.end());
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels, Index height, Index width) {
  RawImage raw{height, width, 1, {}};
  for (int v : labels) {
    if (v < 0 || v > 255) throw ImageIoError("write_labels: label " + std::to_string(v) + " does not fit 8 bits");
    raw.pixels.push_back(static_cast<std::uint8_t>(v));
  }
  write_png(path, raw);
}

Tensor<float> side_by_side(const std::vector<Tensor<float>>& images, Index n) {
  Index height = 0;
  Index width = 0;
  for (const auto& im : images) {
    height = std::max(height, im.h());
    width += im.w();
  }
  Tensor<float> out(Shape{1, 3, height, width}, -1.0f);
  Index col = 0;
  for (const auto& im : images) {
    for (Index k = 0; k < 3; ++k)
      for (Index r = 0; r < im.h(); ++r)
        for (Index c = 0; c < im.w(); ++c) out(0, k, r, col + c) = im(n, im.c() == 3 ? k : 0, r, c);
    col += im.w();
  }
  return out;
}

}  // namespace warpsynth

// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// 8-bit PNG input and output.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "warpsynth/tensor.hpp"

namespace warpsynth {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RawImage {
  Index height = 0;
  Index width = 0;
  Index channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;  // interleaved, row-major
};

RawImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& image);

/// [1, 3, H, W] in [-1, 1]; grayscale files are replicated to three channels.
Tensor<float> read_photo(const std::filesystem::path& path);
/// Writes sample `n` of a [N, 3 or 1, H, W] tensor in [-1, 1], clamping.
void write_photo(const std::filesystem::path& path, const Tensor<float>& image, Index n = 0);

/// Raw 8-bit values of a single-channel PNG (label maps).
std::vector<int> read_labels(const std::filesystem::path& path, Index* height, Index* width);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels, Index height, Index width);

/// Places sample n of each [N, 3, H, W] image next to each other.
Tensor<float> side_by_side(const std::vector<Tensor<float>>& images, Index n = 0);

}  // namespace warpsynth

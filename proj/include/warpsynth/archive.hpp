// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Named-tensor archive used for checkpoints and backbone weights.
//
// Layout: 8-byte magic "WSCKPT01", u64 config hash, u64 header length, a JSON
// header {"tensors": [{name, shape, dtype, offset, bytes}], "meta": {...}},
// then the raw little-endian payload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "warpsynth/tensor.hpp"

namespace warpsynth {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArchiveWriter {
 public:
  template <typename T>
  void add(const std::string& name, const Tensor<T>& tensor);
  nlohmann::json& meta() { return meta_; }

  /// Writes to a temporary sibling and renames it into place.
  void write(const std::filesystem::path& path, std::uint64_t config_hash) const;

 private:
  struct Entry {
    std::string name;
    Shape shape;
    std::string dtype;
    std::string bytes;
  };
  std::vector<Entry> entries_;
  nlohmann::json meta_ = nlohmann::json::object();
};

class ArchiveReader {
 public:
  explicit ArchiveReader(const std::filesystem::path& path);

  std::uint64_t config_hash() const { return hash_; }
  const nlohmann::json& meta() const { return meta_; }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::vector<std::string> names() const;
  Shape shape(const std::string& name) const;
  /// Converts from the stored dtype if needed.
  template <typename T>
  Tensor<T> get(const std::string& name) const;
  /// FNV-1a over the complete file contents.
  std::uint64_t file_checksum() const { return checksum_; }

 private:
  struct Entry {
    Shape shape;
    std::string dtype;
    std::uint64_t offset = 0;
    std::uint64_t bytes = 0;
  };
  std::filesystem::path path_;
  std::uint64_t hash_ = 0;
  std::uint64_t checksum_ = 0;
  nlohmann::json meta_;
  std::map<std::string, Entry> index_;
  std::string payload_;
};

/// Atomic text write (temporary file, then rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace warpsynth

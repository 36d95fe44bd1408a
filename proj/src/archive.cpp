// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/archive.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "warpsynth/random.hpp"

namespace warpsynth {
namespace {

constexpr char kMagic[8] = {'W', 'S', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "f32"; }
template <>
const char* dtype_name<double>() { return "f64"; }

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ArchiveError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void ArchiveWriter::add(const std::string& name, const Tensor<T>& tensor) {
  for (const auto& e : entries_)
    if (e.name == name) throw ArchiveError("duplicate archive entry " + name);
  Entry e{name, tensor.shape(), dtype_name<T>(), std::string()};
  e.bytes.resize(static_cast<std::size_t>(tensor.size()) * sizeof(T));
  if (tensor.size() > 0) std::memcpy(e.bytes.data(), tensor.data(), e.bytes.size());
  entries_.push_back(std::move(e));
}

void ArchiveWriter::write(const std::filesystem::path& path, std::uint64_t config_hash) const {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries_) {
    header["tensors"].push_back({{"name", e.name},
                                 {"shape", {e.shape.n, e.shape.c, e.shape.h, e.shape.w}},
                                 {"dtype", e.dtype},
                                 {"offset", offset},
                                 {"bytes", e.bytes.size()}});
    offset += e.bytes.size();
  }
  header["meta"] = meta_;
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, config_hash);
  put_u64(out, text.size());
  out += text;
  for (const auto& e : entries_) out += e.bytes;
  write_file_atomic(path, out);
}

ArchiveReader::ArchiveReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open archive " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string data = buffer.str();
  checksum_ = fnv1a(data.data(), data.size());
  if (data.size() < 24 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw ArchiveError(path.string() + " is not a warpsynth archive");
  hash_ = get_u64(data, 8);
  const std::uint64_t header_len = get_u64(data, 16);
  if (24 + header_len > data.size()) throw ArchiveError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data.substr(24, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(path.string() + ": corrupt header: " + e.what());
  }
  meta_ = header.value("meta", nlohmann::json::object());
  payload_ = data.substr(24 + header_len);
  for (const auto& t : header.at("tensors")) {
    const auto s = t.at("shape").get<std::vector<Index>>();
    if (s.size() != 4) throw ArchiveError(path.string() + ": bad shape for " + t.at("name").get<std::string>());
    Entry e{Shape{s[0], s[1], s[2], s[3]}, t.at("dtype").get<std::string>(), t.at("offset").get<std::uint64_t>(),
            t.at("bytes").get<std::uint64_t>()};
    const std::size_t width = e.dtype == "f32" ? 4 : e.dtype == "f64" ? 8 : 0;
    if (width == 0) throw ArchiveError(path.string() + ": unknown dtype " + e.dtype);
    if (e.bytes != static_cast<std::uint64_t>(e.shape.size()) * width || e.offset + e.bytes > payload_.size())
      throw ArchiveError(path.string() + ": truncated tensor " + t.at("name").get<std::string>());
    index_[t.at("name").get<std::string>()] = e;
  }
}

std::vector<std::string> ArchiveReader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : index_) out.push_back(name);
  return out;
}

Shape ArchiveReader::shape(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArchiveError(path_.string() + ": missing tensor " + name);
  return it->second.shape;
}

template <typename T>
Tensor<T> ArchiveReader::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArchiveError(path_.string() + ": missing tensor " + name);
  const Entry& e = it->second;
  Tensor<T> out(e.shape);
  const char* src = payload_.data() + e.offset;
  if (e.dtype == dtype_name<T>()) {
    if (out.size() > 0) std::memcpy(out.data(), src, e.bytes);
  } else if (e.dtype == "f32") {
    for (Index i = 0; i < out.size(); ++i) {
      float v;
      std::memcpy(&v, src + i * 4, 4);
      out[i] = static_cast<T>(v);
    }
  } else {
    for (Index i = 0; i < out.size(); ++i) {
      double v;
      std::memcpy(&v, src + i * 8, 8);
      out[i] = static_cast<T>(v);
    }
  }
  return out;
}

template void ArchiveWriter::add(const std::string&, const Tensor<float>&);
template void ArchiveWriter::add(const std::string&, const Tensor<double>&);
template Tensor<float> ArchiveReader::get(const std::string&) const;
template Tensor<double> ArchiveReader::get(const std::string&) const;

}  // namespace warpsynth

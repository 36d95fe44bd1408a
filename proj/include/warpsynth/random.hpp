// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>

#include "warpsynth/tensor.hpp"

namespace warpsynth {

/// Seeded random stream. Independent sub-streams are derived by hashing the
/// seed with stream identifiers, so any batch or noise draw can be reproduced
/// from (seed, ids) alone without replaying earlier draws.
class RandomState {
 public:
  explicit RandomState(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  RandomState derive(std::initializer_list<std::uint64_t> ids) const {
    std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
    for (auto id : ids) h = mix(h ^ (id + 0x9e3779b97f4a7c15ULL));
    return RandomState(h);
  }

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  Tensor<T> normal_tensor(const Shape& shape, double stddev = 1.0) {
    Tensor<T> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(normal(0.0, stddev));
    return t;
  }
  template <typename T>
  Tensor<T> uniform_tensor(const Shape& shape, double lo, double hi) {
    Tensor<T> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
    return t;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << engine_;
    return os.str();
  }
  static RandomState deserialize(const std::string& text) {
    std::istringstream is(text);
    RandomState r;
    is >> r.seed_ >> r.engine_;
    return r;
  }

  friend bool operator==(const RandomState& a, const RandomState& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_;
  }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a, used for config hashes and archive checksums.
inline std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}
inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

}  // namespace warpsynth

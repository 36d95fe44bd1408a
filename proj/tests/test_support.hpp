// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "warpsynth/autograd.hpp"
#include "warpsynth/config.hpp"
#include "warpsynth/nn.hpp"
#include "warpsynth/ops.hpp"
#include "warpsynth/random.hpp"

namespace warpsynth::testing {

/// Norm-wise relative error between the analytic gradient of `f` at `input`
/// and its central finite-difference estimate. When `entries` is positive only
/// that many evenly spaced coordinates are probed.
inline double gradient_error(Var<double>& input, const std::function<Var<double>()>& f, double h = 1e-6,
                             Index entries = -1) {
  input.zero_grad();
  Var<double> y = f();
  backward(y);
  const Tensor<double> analytic = input.grad();
  const Index n = input.value().size();
  const Index probes = entries > 0 ? std::min(entries, n) : n;
  Eigen::VectorXd a(probes), numeric(probes);
  for (Index p = 0; p < probes; ++p) {
    const Index i = probes == n ? p : (p * n) / probes;
    double& x = input.mutable_value()[i];
    const double saved = x;
    double fp, fm;
    {
      NoGradGuard no_grad;
      x = saved + h;
      fp = f().item();
      x = saved - h;
      fm = f().item();
    }
    x = saved;
    numeric[p] = (fp - fm) / (2 * h);
    a[p] = analytic.empty() ? 0.0 : analytic[i];
  }
  const double scale = std::max({a.norm(), numeric.norm(), 1e-12});
  return (a - numeric).norm() / scale;
}

/// Σ w ⊙ x as a scalar, w drawn from a fixed seed: a generic projection that
/// turns a tensor-valued op into a loss for gradient checks.
inline Var<double> project(const Var<double>& x, std::uint64_t seed = 17) {
  RandomState rng(seed);
  Var<double> w(rng.normal_tensor<double>(x.shape()));
  return ops::scale(ops::mean(ops::mul(x, w)), static_cast<double>(x.value().size()));
}

inline Var<double> random_var(const Shape& s, std::uint64_t seed, bool grad = true, double stddev = 1.0) {
  RandomState rng(seed);
  return Var<double>(rng.normal_tensor<double>(s, stddev), grad);
}

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(WARPSYNTH_SOURCE_DIR) / relative;
}

/// The 32×32 desk preset shipped in configs/.
inline ExperimentConfig desk_config() { return load_config(source_path("configs/desk32.yaml")); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("warpsynth_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace warpsynth::testing

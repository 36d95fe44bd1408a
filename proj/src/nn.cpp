// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include "warpsynth/nn.hpp"

namespace warpsynth {
namespace {
thread_local bool g_spectral_updates = true;
}  // namespace

bool spectral_updates_enabled() { return g_spectral_updates && grad_enabled(); }

FrozenSpectralGuard::FrozenSpectralGuard() : previous_(g_spectral_updates) { g_spectral_updates = false; }
FrozenSpectralGuard::~FrozenSpectralGuard() { g_spectral_updates = previous_; }

}  // namespace warpsynth

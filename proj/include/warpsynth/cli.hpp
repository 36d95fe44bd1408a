// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train, infer, warp, edit, metrics, gen-toy-data.
//
// Exit codes: 0 success, 1 runtime failure (divergence, I/O), 2 invalid
// arguments, config, data or checkpoint.

#pragma once

#include <iosfwd>

namespace warpsynth {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace warpsynth

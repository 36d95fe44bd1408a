// Copyright 2026 The warpsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "warpsynth/cli.hpp"

int main(int argc, char** argv) { return warpsynth::run_cli(argc, argv, std::cout, std::cerr); }

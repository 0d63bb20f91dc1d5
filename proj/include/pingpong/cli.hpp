// SPDX-License-Identifier: Apache-2.0
//
// pingpong: active sensing simulation for reciprocal MIMO channels
// Copyright (C) 2026 The pingpong Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pingpong {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitGradCheck = 4;

struct GradCheckEntry {
    std::string component;
    double max_rel_error = 0.0;
    std::size_t coords = 0;
};

/// Finite-difference checks of every differentiable building block and of the full
/// unrolled digital and hybrid losses at tiny dimensions.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed = 7);

inline constexpr double kGradCheckTolerance = 1e-4;

/// Entry point behind the `pingpong` executable; returns the process exit code.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace pingpong

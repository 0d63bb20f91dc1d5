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

// JSON run configuration shared by the command-line subcommands. Every key has a
// default; files and `key.path=value` overrides may only set known keys, with
// values of the default's type.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pingpong/eval.hpp"
#include "pingpong/training.hpp"

namespace pingpong {

nlohmann::json default_config();

/// Recursively overlays `patch` on `base`; throws ConfigError naming the first unknown
/// or mistyped key.
void merge_checked(nlohmann::json &base, const nlohmann::json &patch, const std::string &prefix = "");

/// Applies one `dotted.key=value` override. The value is read as JSON when it parses,
/// otherwise as a plain string.
void apply_override(nlohmann::json &cfg, const std::string &assignment);

/// Defaults, then the file (if any), then overrides, then PINGPONG_SEED when set.
nlohmann::json resolve_config(const std::optional<std::string> &path, const std::vector<std::string> &overrides,
                              const char *env_seed);

ModelDims model_dims_from(const nlohmann::json &cfg);
TrainConfig train_config_from(const nlohmann::json &cfg);
BenchmarkConfig bench_config_from(const nlohmann::json &cfg);

} // namespace pingpong

// Copyright 2026 The spoofdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint layout (little-endian):
//   "SDCK" u32 version
//   u32 len + config INI echo
//   u32 n_tensors, then per tensor: u32 len + name, u32 rows, u32 cols,
//   rows*cols float32 row-major

#pragma once

#include <filesystem>
#include <string>

#include "spoofdiar/attractor_model.hpp"

namespace spoofdiar {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_ini;
  ModelParams params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::string& config_ini);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every value to the nearest float32, i.e. to exactly what a
/// checkpoint stores.
void round_to_float(ModelParams& params);

/// Throws ConfigError if params do not have exactly the tensors and shapes
/// init_model(config) would create.
void check_compatible(const ModelParams& params, const ModelConfig& config);

}  // namespace spoofdiar

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

// INI experiment configs and ablation grids.
//
//   [corpus] [model] [inference] [train] [experiment]
//
// Unknown sections or keys are errors. Grids add a [grid] section and one
// [cell:<name>] section per row whose keys are "<section>.<key>" overrides.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spoofdiar/attractor_model.hpp"
#include "spoofdiar/inference.hpp"
#include "spoofdiar/metrics.hpp"
#include "spoofdiar/synthetic_corpus.hpp"
#include "spoofdiar/trainer.hpp"

namespace spoofdiar {

struct ExperimentConfig {
  std::string name = "experiment";
  CorpusSpec corpus;
  ModelConfig model;
  InferenceConfig inference;
  UttPooling utt_pooling = UttPooling::min;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "runs";
  /// Existing corpus directory; empty means generate from [corpus].
  std::string corpus_dir;

  /// Copies d_feat and the seen class count from the corpus into the model.
  void sync_model();
  void validate() const;
};

struct Setting {
  std::string section;
  std::string key;
  std::string value;
};

/// Applies one key; throws ConfigError naming section.key on failure.
void apply_setting(ExperimentConfig& config, const Setting& setting);
void apply_setting(CorpusSpec& spec, std::string_view key, std::string_view value);

/// Parses INI text. Missing keys keep their defaults; sync_model() is applied
/// and the result validated.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical INI with every key, parseable by parse_experiment_config.
std::string to_ini(const ExperimentConfig& config);

/// [corpus] section only (also accepts a file with just that section).
CorpusSpec parse_corpus_spec(std::string_view text);
std::string corpus_spec_to_ini(const CorpusSpec& spec);

struct GridCell {
  std::string name;
  std::vector<Setting> overrides;
};

struct AblationGrid {
  std::string name = "grid";
  ExperimentConfig base;
  std::vector<GridCell> cells;  // never empty; a grid without cells is one "baseline" row
};

/// [grid] keys: name, base (path relative to the grid file), seeds.
AblationGrid parse_grid(std::string_view text, const std::filesystem::path& base_dir);
AblationGrid load_grid(const std::filesystem::path& path);
ExperimentConfig cell_config(const AblationGrid& grid, const GridCell& cell);

// Enum spellings shared with the CLI.
std::string to_string(Architecture a);
std::string to_string(LabelScheme s);
std::string to_string(TokenTargets t);
std::string to_string(Linkage l);
std::string to_string(ClusterScope s);
std::string to_string(UttPooling p);
std::string to_string(Selection s);

}  // namespace spoofdiar

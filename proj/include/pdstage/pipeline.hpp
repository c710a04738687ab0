// Copyright 2026 The pdstage Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdstage/grid.hpp"
#include "pdstage/ingest.hpp"
#include "pdstage/synth.hpp"
#include "pdstage/tasks.hpp"
#include "pdstage/tsne.hpp"

namespace pdstage {

inline constexpr const char* kToolVersion = "0.1.0";

struct ExplainSettings {
  std::size_t top_k = 15;
  std::size_t waterfall_top_n = 10;
  std::size_t waterfall_per_class = 1;
  std::vector<std::string> samples;  // "subject/visit" ids
  std::string partition = "test";    // test | train | all
};

struct EmbedSettings {
  TsneConfig tsne;
  std::size_t max_points = 1500;
  std::string input = "features";  // features | margin
};

struct RunConfig {
  std::filesystem::path schema;
  std::filesystem::path data_dir;
  std::filesystem::path stage_file;
  std::filesystem::path features;
  std::filesystem::path out = "run";
  std::uint64_t seed = 42;
  int workers = 1;
  std::vector<Task> tasks = all_tasks();
  std::vector<ModelKind> models = {ModelKind::kGbt, ModelKind::kLogistic, ModelKind::kKnn, ModelKind::kForest};
  std::map<ModelKind, GridSpec> grids;
  int folds = 5;
  double holdout_fraction = 0.2;
  bool grouped_split = false;
  StageColumns stage_columns;
  ExplainSettings explain;
  EmbedSettings embed;
  std::optional<CohortSpec> synth;

  /// Shipped defaults for every field, including the four grids.
  static RunConfig defaults();
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

struct Overrides {
  std::optional<std::string> task;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> workers;
  std::optional<bool> grouped_split;
};

/// Flag values win over file values. `task` and `model` accept a
/// comma-separated list or "all".
void apply_overrides(RunConfig& c, const Overrides& o);

/// Writes <out>/resolved_config.json (with the tool version).
void write_resolved_config(const RunConfig& c);

struct IngestOutcome {
  IngestResult result;
  std::filesystem::path matrix_path;
};

IngestOutcome cmd_ingest(const RunConfig& c);

/// Per task and model: holdout split, stratified k-fold grid search,
/// refit on the training partition and a single holdout evaluation.
/// Returns the metrics document also written to <out>/evaluate/metrics.json.
nlohmann::json cmd_evaluate(const RunConfig& c);

/// Attributions of each task's boosted model on the configured partition.
nlohmann::json cmd_explain(const RunConfig& c);

nlohmann::json cmd_embed(const RunConfig& c);

CohortManifest cmd_synth(const CohortSpec& spec, const RunConfig& c);

/// Markdown summary assembled from the artifacts of the other commands.
std::filesystem::path cmd_report(const RunConfig& c);

/// Feature matrix for evaluate/explain/embed: the configured file, an
/// earlier ingest output, or a fresh ingest.
FeatureMatrix load_features(const RunConfig& c);

SchemaSet load_run_schema(const RunConfig& c);

/// FNV-1a digest of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace pdstage

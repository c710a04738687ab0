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
#include <string>
#include <vector>

#include "json.hpp"
#include "pdstage/ingest.hpp"
#include "pdstage/schema.hpp"

namespace pdstage {

/// A feature whose latent mean shifts across one severity boundary.
/// healthy_vs_mild shifts Mild and ModSevere by `shift`;
/// mild_vs_modsevere shifts ModSevere only;
/// healthy_vs_modsevere shifts ModSevere by `shift` and Mild by half.
struct PlantedFeature {
  std::string feature;
  std::string boundary;
  double shift = 3.0;
};

struct CohortSpec {
  std::uint64_t seed = 1;
  std::size_t healthy = 769;
  /// Visits per raw stage code (1..5 and the unclear code 101).
  std::map<int, std::size_t> stages = {{1, 180}, {2, 556}, {3, 45}, {4, 8}, {5, 2}, {kUnclearStage, 2}};
  /// PD-arm visits with a blank stage cell.
  std::size_t unstaged = 0;
  std::size_t visits_per_subject = 4;
  double missingness = 0.0;
  /// Extra visits written to each instrument file only.
  std::size_t orphan_visits = 3;
  double noise = 1.0;
  std::vector<PlantedFeature> planted;

  /// Spec used when no file is given: the cohort described above with
  /// three planted motor features per boundary.
  static CohortSpec defaults();
};

CohortSpec cohort_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CohortSpec& s);

struct CohortManifest {
  std::size_t visits = 0;              // visits present in every instrument
  std::size_t complete_visits = 0;     // of those, visits with no blank cell
  std::map<Severity, std::size_t> expected_classes;  // after drop + labelling
  std::size_t expected_excluded_unclear = 0;
  std::size_t expected_excluded_other = 0;
  std::map<std::string, std::size_t> instrument_rows;
  std::map<std::string, std::vector<std::string>> planted;  // boundary -> features
};

nlohmann::json to_json(const CohortManifest& m);

/// Writes <file> per instrument, stages.csv, truth.csv and manifest.json
/// into `out_dir`. Throws ConfigError when a planted feature is not in
/// the schema or a boundary name is unknown.
CohortManifest generate_cohort(const CohortSpec& spec, const SchemaSet& schema, const std::filesystem::path& out_dir);

inline constexpr const char* kStageFile = "stages.csv";

}  // namespace pdstage

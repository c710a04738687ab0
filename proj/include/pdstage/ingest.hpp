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

#include <compare>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pdstage/core.hpp"
#include "pdstage/csv.hpp"
#include "pdstage/schema.hpp"

namespace pdstage {

struct VisitKey {
  std::string subject;
  std::string visit;

  auto operator<=>(const VisitKey&) const = default;
  std::string str() const { return subject + "/" + visit; }
};

/// Item values of one instrument, one row per (subject, visit) occurrence.
/// Missing or unparseable cells hold NaN.
struct RawItemTable {
  std::string instrument;
  std::vector<VisitKey> keys;
  std::vector<std::string> columns;
  Matrix values;
  std::size_t filtered_rows = 0;

  Index column(const std::string& name) const;
};

struct FeatureBlock {
  std::string instrument;
  std::vector<VisitKey> keys;
  std::vector<std::string> feature_names;
  Matrix values;
};

enum class Severity { kHealthy = 0, kMild = 1, kModSevere = 2, kExcluded = 3 };

inline constexpr int kNoStage = -1;
inline constexpr int kUnclearStage = 101;

struct SeverityLabel {
  int raw_stage = kNoStage;
  bool healthy_arm = false;
  Severity consolidated = Severity::kExcluded;
};

/// Healthy arm wins unless the code is 101; H&Y 1-2 are Mild, 3-5
/// Moderate-to-Severe; every other code is excluded.
Severity consolidate(int raw_stage, bool healthy_arm);
std::string to_string(Severity s);
Severity severity_from_string(const std::string& s);

struct FeatureMatrix {
  std::vector<VisitKey> keys;
  std::vector<std::string> feature_order;
  Matrix values;
  std::vector<SeverityLabel> labels;  // empty until labelled

  Index rows() const { return values.rows(); }
  bool has_missing() const;
  FeatureMatrix subset(const std::vector<Index>& rows) const;
};

RawItemTable load_instrument_table(const std::filesystem::path& path, const InstrumentSchema& schema,
                                   const std::string& subject_column = "PATNO",
                                   const std::string& visit_column = "EVENT_ID");
RawItemTable parse_instrument_table(const csv::Table& table, const InstrumentSchema& schema,
                                    const std::string& subject_column,
                                    const std::string& visit_column);

FeatureBlock derive_instrument_features(const RawItemTable& table, const InstrumentSchema& schema);

/// Inner join on (subject, visit). Rows come out in key order; columns are
/// the blocks' features concatenated in the order given.
FeatureMatrix join_common_visits(const std::vector<FeatureBlock>& blocks);

struct DropResult {
  FeatureMatrix matrix;
  std::size_t removed = 0;
};
DropResult drop_incomplete(const FeatureMatrix& matrix);

struct StageEntry {
  int raw_stage = kNoStage;
  bool healthy_arm = false;
};
using StageTable = std::map<VisitKey, StageEntry>;

struct StageColumns {
  std::string subject = "PATNO";
  std::string visit = "EVENT_ID";
  std::string stage = "NHY";
  std::string cohort = "COHORT";
  std::vector<std::string> healthy_values = {"HC", "Healthy", "Healthy Control"};
};
StageTable load_stage_table(const std::filesystem::path& path, const StageColumns& cols = {});

struct LabelResult {
  FeatureMatrix matrix;
  std::size_t excluded_unclear = 0;  // code 101
  std::size_t excluded_other = 0;    // PD arm without a usable H&Y stage
  std::map<int, std::size_t> stage_counts;
};
LabelResult assign_severity(const FeatureMatrix& matrix, const StageTable& stages);

std::map<Severity, std::size_t> class_counts(const FeatureMatrix& m);

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

struct IngestReport {
  std::map<std::string, std::size_t> instrument_rows;
  std::size_t joined_rows = 0;
  std::size_t dropped_incomplete = 0;
  std::size_t excluded_unclear = 0;
  std::size_t excluded_other = 0;
  std::map<int, std::size_t> stage_counts;
  std::map<Severity, std::size_t> class_counts;
  std::size_t final_rows = 0;
};

struct IngestResult {
  FeatureMatrix matrix;
  IngestReport report;
};

/// Full ingest: every schema instrument is read from `data_dir`/<file>.
IngestResult ingest_directory(const std::filesystem::path& data_dir, const SchemaSet& schema,
                              const std::filesystem::path& stage_path,
                              const StageColumns& stage_cols = {});

}  // namespace pdstage

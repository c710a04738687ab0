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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pdstage {

enum class DerivationKind { kPassthrough, kSum, kExternalScore };

struct DerivedFeature {
  std::string name;
  DerivationKind kind = DerivationKind::kPassthrough;
  // Item identifiers (passthrough: one; sum: many) or, for external
  // scores, the single score column read from the file.
  std::vector<std::string> inputs;
};

struct FeatureTag {
  std::string domain;
  std::string function;  // neurocognitive function label, e.g. "Motor"
};

struct RowFilter {
  std::string column;
  std::string value;
};

struct InstrumentSchema {
  std::string name;
  std::string assessment;  // "subjective" | "objective"
  std::string file;
  std::vector<std::string> items;
  std::vector<std::string> excluded;
  std::vector<DerivedFeature> derived;
  std::map<std::string, std::pair<double, double>> item_range;
  std::optional<RowFilter> row_filter;
  std::map<std::string, FeatureTag> tags;

  /// Columns the instrument CSV must carry besides subject/visit.
  std::vector<std::string> required_columns() const;
  std::vector<std::string> feature_names() const;
  bool is_excluded(const std::string& item) const;
  std::pair<double, double> range_of(const std::string& item) const;
};

struct SchemaSet {
  int version = 1;
  std::string subject_column = "PATNO";
  std::string visit_column = "EVENT_ID";
  std::vector<InstrumentSchema> instruments;

  std::size_t item_count() const;
  std::vector<std::string> feature_order() const;
  const InstrumentSchema* find(const std::string& name) const;
  /// Instrument owning a derived feature, or nullptr.
  const InstrumentSchema* owner_of_feature(const std::string& feature) const;
  std::optional<FeatureTag> tag_of(const std::string& feature) const;

  /// Throws ConfigError on duplicate names, rules referencing unknown or
  /// excluded items, and similar structural defects.
  void validate() const;
};

SchemaSet parse_schema(const std::string& text);
SchemaSet load_schema(const std::filesystem::path& path);

/// Path of the instrument schema shipped in data/schema.
std::filesystem::path default_schema_path();

/// Reference per-instrument item/feature counts of the 15-instrument
/// battery, in canonical column order.
struct InstrumentCount {
  std::string name;
  std::size_t items;
  std::size_t features;
};
const std::vector<InstrumentCount>& reference_instrument_counts();

}  // namespace pdstage

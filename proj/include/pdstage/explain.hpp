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

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pdstage/core.hpp"
#include "pdstage/schema.hpp"
#include "pdstage/shap.hpp"

namespace pdstage {

/// Per-feature, per-cohort attribution magnitudes for one task.
struct GlobalSummary {
  std::string task;
  std::vector<std::string> cohorts;
  std::vector<std::size_t> cohort_sizes;
  std::vector<std::string> features;
  Matrix within_abs;     // cohort x feature, mean |phi| inside the cohort
  Matrix stacked_abs;    // cohort x feature, sum over cohort of |phi| / N
  Matrix within_signed;  // cohort x feature, mean phi inside the cohort
  Matrix stacked_signed;
  Vector total;          // mean |phi| over all samples
  std::vector<std::size_t> ranking;  // top-k feature indices, best first

  std::vector<std::string> top_features() const;
};

/// `phi` is samples x features; `labels` index into `cohorts`.
/// Features with zero total are never ranked; ties sort by name.
GlobalSummary global_class_summary(const Matrix& phi, const Labels& labels, const std::vector<std::string>& cohorts,
                                   const std::vector<std::string>& features, std::size_t k = 15,
                                   std::string task = {});

/// For multiclass batches: row i takes the phi of class labels[i].
Matrix true_class_phi(const std::vector<AttributionBatch>& batches, const Labels& labels);

struct HeatmapRow {
  std::string feature;
  std::vector<std::optional<double>> value;
  std::vector<std::optional<double>> shade;  // per-column min-max scaled
};

struct HeatmapTable {
  std::vector<std::string> tasks;
  std::vector<HeatmapRow> rows;
};

/// Rows are the union of each summary's top-k, ordered by their largest
/// cell (descending) then name.
HeatmapTable cross_task_heatmap(const std::vector<GlobalSummary>& summaries, std::size_t k = 15);

struct WaterfallEntry {
  std::string feature;  // "remaining" for the collapsed tail
  double phi = 0.0;
  double cumulative = 0.0;
};

struct Waterfall {
  double base_value = 0.0;
  std::vector<WaterfallEntry> entries;
  double margin() const { return entries.empty() ? base_value : entries.back().cumulative; }
};

inline constexpr const char* kRemaining = "remaining";

/// The top_n largest |phi| (non-zero) in order, then one "remaining" entry
/// carrying the exact residual.
Waterfall local_waterfall(const AttributionVector& attr, const std::vector<std::string>& features,
                          std::size_t top_n = 10);

/// Long format: sample,output,feature,phi,base,margin,residual.
void write_attributions_csv(std::ostream& out, const std::vector<std::string>& sample_ids,
                            const std::vector<std::string>& features, const std::vector<AttributionBatch>& batches);
void write_summary_tsv(std::ostream& out, const GlobalSummary& s, const SchemaSet* schema = nullptr);
void write_heatmap_tsv(std::ostream& out, const HeatmapTable& h, const SchemaSet* schema = nullptr);
void write_waterfall_csv(std::ostream& out, const std::string& sample_id, const Waterfall& w);

}  // namespace pdstage

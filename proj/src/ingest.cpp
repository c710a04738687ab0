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

#include "pdstage/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace pdstage {

Index RawItemTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<Index>(i);
  return -1;
}

Severity consolidate(int raw_stage, bool healthy_arm) {
  if (raw_stage == kUnclearStage) return Severity::kExcluded;
  if (healthy_arm) return Severity::kHealthy;
  if (raw_stage == 1 || raw_stage == 2) return Severity::kMild;
  if (raw_stage >= 3 && raw_stage <= 5) return Severity::kModSevere;
  return Severity::kExcluded;
}

std::string to_string(Severity s) {
  switch (s) {
    case Severity::kHealthy: return "Healthy";
    case Severity::kMild: return "Mild";
    case Severity::kModSevere: return "ModSevere";
    case Severity::kExcluded: return "Excluded";
  }
  return "Excluded";
}

Severity severity_from_string(const std::string& s) {
  if (s == "Healthy") return Severity::kHealthy;
  if (s == "Mild") return Severity::kMild;
  if (s == "ModSevere") return Severity::kModSevere;
  if (s == "Excluded") return Severity::kExcluded;
  throw DataError("unknown severity label '" + s + "'");
}

bool FeatureMatrix::has_missing() const { return values.array().isNaN().any(); }

FeatureMatrix FeatureMatrix::subset(const std::vector<Index>& rows) const {
  FeatureMatrix out;
  out.keys = take(keys, rows);
  out.feature_order = feature_order;
  out.values = take_rows(values, rows);
  if (!labels.empty()) out.labels = take(labels, rows);
  return out;
}

RawItemTable parse_instrument_table(const csv::Table& table, const InstrumentSchema& schema,
                                    const std::string& subject_column,
                                    const std::string& visit_column) {
  auto need = [&](const std::string& col) {
    auto idx = table.column(col);
    if (!idx) throw DataError("instrument " + schema.name + ": missing required column " + col);
    return *idx;
  };
  const std::size_t subj = need(subject_column);
  const std::size_t vis = need(visit_column);
  RawItemTable out;
  out.instrument = schema.name;
  out.columns = schema.required_columns();
  std::vector<std::size_t> pos;
  for (const auto& c : out.columns) pos.push_back(need(c));

  std::size_t filter_pos = 0;
  if (schema.row_filter) filter_pos = need(schema.row_filter->column);

  std::vector<const std::vector<std::string>*> kept;
  for (const auto& r : table.rows) {
    if (schema.row_filter && r[filter_pos] != schema.row_filter->value) {
      ++out.filtered_rows;
      continue;
    }
    kept.push_back(&r);
  }
  out.values.resize(static_cast<Index>(kept.size()), static_cast<Index>(pos.size()));
  out.keys.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& r = *kept[i];
    out.keys.push_back({r[subj], r[vis]});
    for (std::size_t j = 0; j < pos.size(); ++j)
      out.values(static_cast<Index>(i), static_cast<Index>(j)) =
          csv::parse_number(r[pos[j]]).value_or(kMissing);
  }
  return out;
}

RawItemTable load_instrument_table(const std::filesystem::path& path, const InstrumentSchema& schema,
                                   const std::string& subject_column,
                                   const std::string& visit_column) {
  auto table = csv::read(path);
  try {
    return parse_instrument_table(table, schema, subject_column, visit_column);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

FeatureBlock derive_instrument_features(const RawItemTable& table, const InstrumentSchema& schema) {
  FeatureBlock out;
  out.instrument = schema.name;
  out.keys = table.keys;
  out.feature_names = schema.feature_names();
  const Index n = static_cast<Index>(table.keys.size());
  out.values.resize(n, static_cast<Index>(schema.derived.size()));

  std::vector<std::vector<Index>> sources;
  for (const auto& d : schema.derived) {
    std::vector<Index> idx;
    for (const auto& in : d.inputs) {
      Index c = table.column(in);
      if (c < 0)
        throw DataError("instrument " + schema.name + ": table lacks column " + in + " needed by " +
                        d.name);
      idx.push_back(c);
    }
    sources.push_back(std::move(idx));
  }
  for (Index r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < sources.size(); ++f) {
      double v = 0.0;
      // NaN propagates through the sum, so one missing item marks the
      // whole feature missing.
      for (Index c : sources[f]) v += table.values(r, c);
      out.values(r, static_cast<Index>(f)) = v;
    }
  }
  return out;
}

FeatureMatrix join_common_visits(const std::vector<FeatureBlock>& blocks) {
  if (blocks.empty()) throw DataError("join: no feature blocks supplied");
  std::vector<std::unordered_map<std::string, Index>> lookup(blocks.size());
  auto flat = [](const VisitKey& k) { return k.subject + '\x1f' + k.visit; };
  std::set<std::string> names;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (const auto& f : blocks[b].feature_names)
      if (!names.insert(f).second) throw DataError("join: feature " + f + " appears in two blocks");
    for (std::size_t i = 0; i < blocks[b].keys.size(); ++i) {
      if (!lookup[b].emplace(flat(blocks[b].keys[i]), static_cast<Index>(i)).second)
        throw DataError("join: instrument " + blocks[b].instrument + " has duplicate visit " +
                        blocks[b].keys[i].str() + " (consider a row_filter)");
    }
  }
  std::vector<VisitKey> common;
  for (const auto& k : blocks.front().keys) {
    bool everywhere = true;
    for (std::size_t b = 1; b < blocks.size() && everywhere; ++b)
      everywhere = lookup[b].count(flat(k)) > 0;
    if (everywhere) common.push_back(k);
  }
  if (common.empty()) throw DataError("join: no (subject, visit) pair is present in every instrument");
  std::sort(common.begin(), common.end());

  FeatureMatrix out;
  out.keys = common;
  for (const auto& b : blocks)
    out.feature_order.insert(out.feature_order.end(), b.feature_names.begin(), b.feature_names.end());
  out.values.resize(static_cast<Index>(common.size()), static_cast<Index>(out.feature_order.size()));
  Index col = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Index w = blocks[b].values.cols();
    for (std::size_t r = 0; r < common.size(); ++r)
      out.values.block(static_cast<Index>(r), col, 1, w) =
          blocks[b].values.row(lookup[b].at(flat(common[r])));
    col += w;
  }
  return out;
}

DropResult drop_incomplete(const FeatureMatrix& matrix) {
  std::vector<Index> keep;
  for (Index r = 0; r < matrix.rows(); ++r)
    if (!matrix.values.row(r).array().isNaN().any()) keep.push_back(r);
  DropResult out;
  out.removed = static_cast<std::size_t>(matrix.rows()) - keep.size();
  out.matrix = matrix.subset(keep);
  return out;
}

StageTable load_stage_table(const std::filesystem::path& path, const StageColumns& cols) {
  auto t = csv::read(path);
  auto need = [&](const std::string& c) {
    auto idx = t.column(c);
    if (!idx) throw DataError(path.string() + ": stage table lacks column " + c);
    return *idx;
  };
  const auto subj = need(cols.subject);
  const auto vis = need(cols.visit);
  const auto stage = need(cols.stage);
  const auto cohort = need(cols.cohort);
  StageTable out;
  for (const auto& r : t.rows) {
    StageEntry e;
    if (auto v = csv::parse_number(r[stage]); v && *v == std::round(*v)) e.raw_stage = static_cast<int>(*v);
    e.healthy_arm = std::find(cols.healthy_values.begin(), cols.healthy_values.end(), r[cohort]) !=
                    cols.healthy_values.end();
    VisitKey k{r[subj], r[vis]};
    if (!out.emplace(k, e).second)
      throw DataError(path.string() + ": duplicate stage entry for " + k.str());
  }
  return out;
}

LabelResult assign_severity(const FeatureMatrix& matrix, const StageTable& stages) {
  std::vector<std::string> unlabelled;
  std::vector<SeverityLabel> labels;
  labels.reserve(matrix.keys.size());
  for (const auto& k : matrix.keys) {
    auto it = stages.find(k);
    if (it == stages.end()) {
      unlabelled.push_back(k.str());
      continue;
    }
    labels.push_back({it->second.raw_stage, it->second.healthy_arm,
                      consolidate(it->second.raw_stage, it->second.healthy_arm)});
  }
  if (!unlabelled.empty()) {
    std::string msg = "labeling: " + std::to_string(unlabelled.size()) + " visit(s) without a stage entry:";
    for (std::size_t i = 0; i < unlabelled.size() && i < 10; ++i) msg += " " + unlabelled[i];
    if (unlabelled.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  LabelResult out;
  std::vector<Index> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    // Healthy-arm rows are tallied by class, not by H&Y code.
    if (!l.healthy_arm || l.raw_stage == kUnclearStage) ++out.stage_counts[l.raw_stage];
    if (l.consolidated == Severity::kExcluded) {
      if (l.raw_stage == kUnclearStage) {
        ++out.excluded_unclear;
      } else {
        ++out.excluded_other;
      }
      continue;
    }
    keep.push_back(static_cast<Index>(i));
  }
  FeatureMatrix labelled = matrix;
  labelled.labels = labels;
  out.matrix = labelled.subset(keep);
  return out;
}

std::map<Severity, std::size_t> class_counts(const FeatureMatrix& m) {
  std::map<Severity, std::size_t> out;
  for (const auto& l : m.labels) ++out[l.consolidated];
  return out;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
  csv::Table t;
  t.header = {"subject", "visit", "raw_stage", "label"};
  t.header.insert(t.header.end(), m.feature_order.begin(), m.feature_order.end());
  t.rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    const auto& k = m.keys[static_cast<std::size_t>(r)];
    row.push_back(k.subject);
    row.push_back(k.visit);
    if (m.labels.empty()) {
      row.emplace_back();
      row.emplace_back();
    } else {
      const auto& l = m.labels[static_cast<std::size_t>(r)];
      row.push_back(l.raw_stage == kNoStage ? std::string() : std::to_string(l.raw_stage));
      row.push_back(to_string(l.consolidated));
    }
    for (Index c = 0; c < m.values.cols(); ++c) row.push_back(csv::format_number(m.values(r, c)));
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  auto t = csv::read(path);
  if (t.header.size() < 4 || t.header[0] != "subject" || t.header[1] != "visit" ||
      t.header[2] != "raw_stage" || t.header[3] != "label")
    throw DataError(path.string() + ": not a feature matrix file (expected subject,visit,raw_stage,label,...)");
  FeatureMatrix m;
  m.feature_order.assign(t.header.begin() + 4, t.header.end());
  m.values.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(m.feature_order.size()));
  bool labelled = !t.rows.empty() && !t.rows.front()[3].empty();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    m.keys.push_back({row[0], row[1]});
    if (labelled) {
      SeverityLabel l;
      auto stage = csv::parse_number(row[2]);
      l.raw_stage = stage ? static_cast<int>(*stage) : kNoStage;
      l.consolidated = severity_from_string(row[3]);
      l.healthy_arm = l.consolidated == Severity::kHealthy;
      m.labels.push_back(l);
    }
    for (std::size_t c = 4; c < row.size(); ++c)
      m.values(static_cast<Index>(r), static_cast<Index>(c - 4)) = csv::parse_number(row[c]).value_or(kMissing);
  }
  return m;
}

IngestResult ingest_directory(const std::filesystem::path& data_dir, const SchemaSet& schema,
                              const std::filesystem::path& stage_path, const StageColumns& stage_cols) {
  if (!std::filesystem::is_directory(data_dir))
    throw DataError("input directory " + data_dir.string() + " does not exist");
  IngestResult out;
  std::vector<FeatureBlock> blocks;
  for (const auto& inst : schema.instruments) {
    auto path = data_dir / inst.file;
    if (!std::filesystem::exists(path))
      throw DataError("instrument " + inst.name + ": file " + path.string() + " not found");
    auto raw = load_instrument_table(path, inst, schema.subject_column, schema.visit_column);
    out.report.instrument_rows[inst.name] = raw.keys.size();
    blocks.push_back(derive_instrument_features(raw, inst));
  }
  auto joined = join_common_visits(blocks);
  out.report.joined_rows = static_cast<std::size_t>(joined.rows());
  auto cleaned = drop_incomplete(joined);
  out.report.dropped_incomplete = cleaned.removed;
  StageColumns cols = stage_cols;
  cols.subject = schema.subject_column;
  cols.visit = schema.visit_column;
  auto labelled = assign_severity(cleaned.matrix, load_stage_table(stage_path, cols));
  out.report.excluded_unclear = labelled.excluded_unclear;
  out.report.excluded_other = labelled.excluded_other;
  out.report.stage_counts = labelled.stage_counts;
  out.matrix = std::move(labelled.matrix);
  out.report.class_counts = class_counts(out.matrix);
  out.report.final_rows = static_cast<std::size_t>(out.matrix.rows());
  return out;
}

}  // namespace pdstage

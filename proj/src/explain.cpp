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

#include "pdstage/explain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "pdstage/csv.hpp"

namespace pdstage {

std::vector<std::string> GlobalSummary::top_features() const {
  std::vector<std::string> out;
  for (auto j : ranking) out.push_back(features[j]);
  return out;
}

GlobalSummary global_class_summary(const Matrix& phi, const Labels& labels, const std::vector<std::string>& cohorts,
                                   const std::vector<std::string>& features, std::size_t k, std::string task) {
  if (static_cast<std::size_t>(phi.rows()) != labels.size())
    throw DataError("global summary: attribution rows and labels differ in length");
  if (static_cast<std::size_t>(phi.cols()) != features.size())
    throw DataError("global summary: attribution columns and feature names differ in length");
  const auto c = static_cast<Index>(cohorts.size());
  GlobalSummary s;
  s.task = std::move(task);
  s.cohorts = cohorts;
  s.features = features;
  s.cohort_sizes.assign(cohorts.size(), 0);
  s.within_abs = Matrix::Zero(c, phi.cols());
  s.within_signed = Matrix::Zero(c, phi.cols());
  for (Index i = 0; i < phi.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l < 0 || l >= c) throw DataError("global summary: label " + std::to_string(l) + " has no cohort");
    ++s.cohort_sizes[static_cast<std::size_t>(l)];
    s.within_abs.row(l) += phi.row(i).cwiseAbs();
    s.within_signed.row(l) += phi.row(i);
  }
  const double n = static_cast<double>(phi.rows());
  s.stacked_abs = s.within_abs / n;
  s.stacked_signed = s.within_signed / n;
  for (Index l = 0; l < c; ++l) {
    const auto size = s.cohort_sizes[static_cast<std::size_t>(l)];
    if (size == 0) throw DataError("global summary: cohort '" + cohorts[static_cast<std::size_t>(l)] + "' is empty");
    s.within_abs.row(l) /= static_cast<double>(size);
    s.within_signed.row(l) /= static_cast<double>(size);
  }
  s.total = s.stacked_abs.colwise().sum().transpose();

  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < features.size(); ++j)
    if (s.total(static_cast<Index>(j)) > 0.0) order.push_back(j);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ta = s.total(static_cast<Index>(a));
    const double tb = s.total(static_cast<Index>(b));
    if (ta != tb) return ta > tb;
    return features[a] < features[b];
  });
  if (order.size() > k) order.resize(k);
  s.ranking = std::move(order);
  return s;
}

Matrix true_class_phi(const std::vector<AttributionBatch>& batches, const Labels& labels) {
  if (batches.empty()) throw DataError("no attribution batches");
  if (batches.size() == 1) return batches.front().phi;
  const Matrix& first = batches.front().phi;
  if (static_cast<std::size_t>(first.rows()) != labels.size()) throw DataError("attribution rows and labels differ");
  Matrix out(first.rows(), first.cols());
  for (Index i = 0; i < first.rows(); ++i)
    out.row(i) = batches.at(static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])).phi.row(i);
  return out;
}

HeatmapTable cross_task_heatmap(const std::vector<GlobalSummary>& summaries, std::size_t k) {
  if (summaries.size() < 3) throw ConfigError("heatmap needs three task summaries, got " + std::to_string(summaries.size()));
  HeatmapTable h;
  const std::size_t cols = summaries.size();
  std::map<std::string, HeatmapRow> rows;
  for (std::size_t t = 0; t < cols; ++t) {
    const auto& s = summaries[t];
    h.tasks.push_back(s.task);
    for (std::size_t r = 0; r < std::min(k, s.ranking.size()); ++r) {
      const std::size_t j = s.ranking[r];
      auto& row = rows[s.features[j]];
      row.feature = s.features[j];
      row.value.resize(cols);
      row.value[t] = s.total(static_cast<Index>(j));
    }
  }
  for (std::size_t t = 0; t < cols; ++t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [name, row] : rows)
      if (row.value[t]) {
        lo = std::min(lo, *row.value[t]);
        hi = std::max(hi, *row.value[t]);
      }
    for (auto& [name, row] : rows) {
      row.shade.resize(cols);
      if (row.value[t]) row.shade[t] = hi > lo ? (*row.value[t] - lo) / (hi - lo) : 1.0;
    }
  }
  for (auto& [name, row] : rows) h.rows.push_back(std::move(row));
  auto peak = [](const HeatmapRow& r) {
    double m = 0.0;
    for (const auto& v : r.value)
      if (v) m = std::max(m, *v);
    return m;
  };
  std::stable_sort(h.rows.begin(), h.rows.end(), [&](const HeatmapRow& a, const HeatmapRow& b) {
    const double pa = peak(a);
    const double pb = peak(b);
    if (pa != pb) return pa > pb;
    return a.feature < b.feature;
  });
  return h;
}

Waterfall local_waterfall(const AttributionVector& attr, const std::vector<std::string>& features, std::size_t top_n) {
  if (attr.phi.size() != features.size()) throw DataError("waterfall: attribution and feature names differ in length");
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < attr.phi.size(); ++j)
    if (attr.phi[j] != 0.0) order.push_back(j);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = std::abs(attr.phi[a]);
    const double pb = std::abs(attr.phi[b]);
    if (pa != pb) return pa > pb;
    return features[a] < features[b];
  });
  Waterfall w;
  w.base_value = attr.base_value;
  double running = attr.base_value;
  const std::size_t shown = std::min(top_n, order.size());
  for (std::size_t r = 0; r < shown; ++r) {
    running += attr.phi[order[r]];
    w.entries.push_back({features[order[r]], attr.phi[order[r]], running});
  }
  // residual taken against the full sum so the last cumulative is the margin
  const double full = attr.total();
  const double rest = full - running;
  w.entries.push_back({kRemaining, rest, full});
  if (shown == order.size()) w.entries.back().phi = 0.0;
  return w;
}

void write_attributions_csv(std::ostream& out, const std::vector<std::string>& sample_ids,
                            const std::vector<std::string>& features, const std::vector<AttributionBatch>& batches) {
  csv::write_row(out, {"sample", "output", "feature", "phi", "base", "margin", "residual"});
  for (const auto& b : batches) {
    if (static_cast<std::size_t>(b.phi.rows()) != sample_ids.size() || static_cast<std::size_t>(b.phi.cols()) != features.size())
      throw DataError("attribution export: batch shape does not match sample ids and features");
    for (Index i = 0; i < b.phi.rows(); ++i) {
      const double residual = b.base_value + b.phi.row(i).sum() - b.margin(i);
      const auto& id = sample_ids[static_cast<std::size_t>(i)];
      for (Index j = 0; j < b.phi.cols(); ++j)
        csv::write_row(out, {id, std::to_string(b.output), features[static_cast<std::size_t>(j)],
                             csv::format_number(b.phi(i, j)), csv::format_number(b.base_value),
                             csv::format_number(b.margin(i)), csv::format_number(residual)});
    }
  }
}

namespace {

std::vector<std::string> meta_fields(const std::string& feature, const SchemaSet* schema) {
  if (!schema) return {"", "", ""};
  const auto* owner = schema->owner_of_feature(feature);
  const auto tag = schema->tag_of(feature);
  return {owner ? owner->name : "", tag ? tag->domain : "", tag ? tag->function : ""};
}

std::string opt_number(const std::optional<double>& v) { return v ? csv::format_number(*v) : ""; }

}  // namespace

void write_summary_tsv(std::ostream& out, const GlobalSummary& s, const SchemaSet* schema) {
  std::vector<std::string> header{"rank", "feature", "instrument", "domain", "function", "total", "shade"};
  for (const auto& c : s.cohorts) header.push_back("stacked_abs:" + c);
  for (const auto& c : s.cohorts) header.push_back("within_abs:" + c);
  for (const auto& c : s.cohorts) header.push_back("stacked_signed:" + c);
  for (const auto& c : s.cohorts) header.push_back("within_signed:" + c);
  csv::write_row(out, header, '\t');
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (auto j : s.ranking) {
    hi = std::max(hi, s.total(static_cast<Index>(j)));
    lo = std::min(lo, s.total(static_cast<Index>(j)));
  }
  for (std::size_t r = 0; r < s.ranking.size(); ++r) {
    const auto j = static_cast<Index>(s.ranking[r]);
    const auto& name = s.features[s.ranking[r]];
    std::vector<std::string> row{std::to_string(r + 1), name};
    for (auto& m : meta_fields(name, schema)) row.push_back(std::move(m));
    row.push_back(csv::format_number(s.total(j)));
    row.push_back(csv::format_number(hi > lo ? (s.total(j) - lo) / (hi - lo) : 1.0));
    for (const Matrix* m : {&s.stacked_abs, &s.within_abs, &s.stacked_signed, &s.within_signed})
      for (Index c = 0; c < m->rows(); ++c) row.push_back(csv::format_number((*m)(c, j)));
    csv::write_row(out, row, '\t');
  }
}

void write_heatmap_tsv(std::ostream& out, const HeatmapTable& h, const SchemaSet* schema) {
  std::vector<std::string> header{"feature", "instrument", "domain", "function"};
  for (const auto& t : h.tasks) header.push_back(t);
  for (const auto& t : h.tasks) header.push_back("shade:" + t);
  csv::write_row(out, header, '\t');
  for (const auto& r : h.rows) {
    std::vector<std::string> row{r.feature};
    for (auto& m : meta_fields(r.feature, schema)) row.push_back(std::move(m));
    for (const auto& v : r.value) row.push_back(opt_number(v));
    for (const auto& v : r.shade) row.push_back(opt_number(v));
    csv::write_row(out, row, '\t');
  }
}

void write_waterfall_csv(std::ostream& out, const std::string& sample_id, const Waterfall& w) {
  csv::write_row(out, {"sample", "step", "feature", "phi", "cumulative"});
  csv::write_row(out, {sample_id, "0", "base", "", csv::format_number(w.base_value)});
  for (std::size_t i = 0; i < w.entries.size(); ++i)
    csv::write_row(out, {sample_id, std::to_string(i + 1), w.entries[i].feature, csv::format_number(w.entries[i].phi),
                         csv::format_number(w.entries[i].cumulative)});
}

}  // namespace pdstage

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

#include "pdstage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace pdstage {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

Labels argmax_labels(const Matrix& proba) {
  Labels out(static_cast<std::size_t>(proba.rows()));
  for (Index r = 0; r < proba.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < proba.cols(); ++c)
      if (proba(r, c) > proba(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double roc_auc(std::span<const int> pos, std::span<const double> score) {
  const std::size_t n = pos.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  double rank_sum = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (pos[order[t]]) {
        rank_sum += mid_rank;
        n_pos += 1.0;
      }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  return safe_div(rank_sum - n_pos * (n_pos + 1.0) / 2.0, n_pos * n_neg);
}

double average_precision(std::span<const int> pos, std::span<const double> score) {
  const std::size_t n = pos.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const double total_pos = static_cast<double>(std::count_if(pos.begin(), pos.end(), [](int v) { return v != 0; }));
  if (total_pos == 0.0) return 0.0;
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && score[order[j]] == score[order[i]]) {
      (pos[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

Eigen::MatrixXd confusion_counts(const Labels& y_true, const Labels& y_pred, int k) {
  if (y_true.size() != y_pred.size()) throw DataError("confusion: label vectors differ in length");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < y_true.size(); ++i) m(y_true[i], y_pred[i]) += 1.0;
  return m;
}

Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& counts) {
  Eigen::MatrixXd out = counts;
  for (Index r = 0; r < out.rows(); ++r) {
    const double s = out.row(r).sum();
    if (s > 0) out.row(r) /= s;
  }
  return out;
}

Eigen::MatrixXd oof_confusion(const Labels& y_true, const Labels& oof_pred, int k) {
  if (y_true.size() != oof_pred.size()) throw DataError("oof confusion: label vectors differ in length");
  for (std::size_t i = 0; i < oof_pred.size(); ++i)
    if (oof_pred[i] < 0) throw DataError("oof confusion: row " + std::to_string(i) + " has no out-of-fold prediction");
  return row_normalize(confusion_counts(y_true, oof_pred, k));
}

Metrics compute_metrics(const Labels& y_true, const Labels& y_pred, const Matrix& score, int k) {
  const std::size_t n = y_true.size();
  if (y_pred.size() != n || static_cast<std::size_t>(score.rows()) != n)
    throw DataError("metrics: prediction vectors differ in length");
  if (score.cols() != k) throw DataError("metrics: score matrix must have one column per class");
  Metrics m;
  const Eigen::MatrixXd cm = confusion_counts(y_true, y_pred, k);
  const double total = static_cast<double>(n);
  m.accuracy = safe_div(cm.trace(), total);

  auto per_class_f1 = [&](int c) {
    const double tp = cm(c, c);
    const double fp = cm.col(c).sum() - tp;
    const double fn = cm.row(c).sum() - tp;
    return safe_div(2.0 * tp, 2.0 * tp + fp + fn);
  };
  std::vector<int> is_c(n);
  std::vector<double> col(n);
  auto one_vs_rest = [&](int c) {
    for (std::size_t i = 0; i < n; ++i) {
      is_c[i] = y_true[i] == c ? 1 : 0;
      col[i] = score(static_cast<Index>(i), c);
    }
  };

  if (k == 2) {
    m.f1 = per_class_f1(1);
    one_vs_rest(1);
    m.roc_auc = roc_auc(is_c, col);
    m.pr_auc = average_precision(is_c, col);
    const double tp = cm(1, 1), tn = cm(0, 0), fp = cm(0, 1), fn = cm(1, 0);
    m.mcc = safe_div(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
  } else {
    for (int c = 0; c < k; ++c) {
      m.f1 += per_class_f1(c);
      one_vs_rest(c);
      m.roc_auc += roc_auc(is_c, col);
      m.pr_auc += average_precision(is_c, col);
    }
    m.f1 /= k;
    m.roc_auc /= k;
    m.pr_auc /= k;
    const Eigen::VectorXd t = cm.rowwise().sum();
    const Eigen::VectorXd p = cm.colwise().sum().transpose();
    const double c = cm.trace();
    m.mcc = safe_div(c * total - t.dot(p), std::sqrt((total * total - p.squaredNorm()) * (total * total - t.squaredNorm())));
  }
  return m;
}

namespace {

MetricSummary summarize_one(std::vector<double> v) {
  MetricSummary s;
  s.folds = std::move(v);
  if (s.folds.empty()) return s;
  const double n = static_cast<double>(s.folds.size());
  s.mean = std::accumulate(s.folds.begin(), s.folds.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : s.folds) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / n);
  return s;
}

nlohmann::json to_json(const MetricSummary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"folds", s.folds}};
}

}  // namespace

MetricReport summarize(const std::vector<Metrics>& folds) {
  std::vector<double> a, f, r, p, m;
  for (const auto& x : folds) {
    a.push_back(x.accuracy);
    f.push_back(x.f1);
    r.push_back(x.roc_auc);
    p.push_back(x.pr_auc);
    m.push_back(x.mcc);
  }
  return {summarize_one(a), summarize_one(f), summarize_one(r), summarize_one(p), summarize_one(m)};
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"roc_auc", m.roc_auc}, {"pr_auc", m.pr_auc}, {"mcc", m.mcc}};
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"accuracy", to_json(r.accuracy)},
          {"f1", to_json(r.f1)},
          {"roc_auc", to_json(r.roc_auc)},
          {"pr_auc", to_json(r.pr_auc)},
          {"mcc", to_json(r.mcc)}};
}

std::string format_mean_sd(const MetricSummary& s, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, s.mean, digits, s.sd);
  return buf;
}

}  // namespace pdstage

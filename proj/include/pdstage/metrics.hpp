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

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdstage/core.hpp"

namespace pdstage {

/// Binary tasks: F1 of the positive class (1), rank ROC-AUC and average
/// precision of column 1 of the score matrix. K > 2: macro-F1, macro
/// one-vs-rest ROC-AUC and AP, and the multiclass MCC. Any 0/0 gives 0.
struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  double mcc = 0.0;
};

/// Argmax per row; ties go to the lowest class index.
Labels argmax_labels(const Matrix& proba);

Metrics compute_metrics(const Labels& y_true, const Labels& y_pred, const Matrix& score, int num_class);

/// Mann-Whitney rank statistic with mid-ranks for tied scores.
double roc_auc(std::span<const int> is_positive, std::span<const double> score);
/// Step-wise average precision: sum over thresholds of (R_n - R_{n-1}) P_n.
double average_precision(std::span<const int> is_positive, std::span<const double> score);

Eigen::MatrixXd confusion_counts(const Labels& y_true, const Labels& y_pred, int num_class);
/// Divides each row by its total; rows without samples stay zero.
Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& counts);

/// Row-normalized confusion of out-of-fold predictions. Entries of
/// `oof_pred` equal to -1 mark rows no fold predicted, which is an error.
Eigen::MatrixXd oof_confusion(const Labels& y_true, const Labels& oof_pred, int num_class);

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation over folds
  std::vector<double> folds;
};

struct MetricReport {
  MetricSummary accuracy, f1, roc_auc, pr_auc, mcc;
};

MetricReport summarize(const std::vector<Metrics>& folds);
nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const MetricReport& r);

/// "0.9548 ± 0.0063"
std::string format_mean_sd(const MetricSummary& s, int digits = 4);

}  // namespace pdstage

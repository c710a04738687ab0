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

#include "json.hpp"
#include "pdstage/balance.hpp"
#include "pdstage/core.hpp"

namespace pdstage {

struct LogisticConfig {
  double l2 = 1.0;
  int max_iter = 500;
  double tol = 1e-6;   // on the inf-norm of the per-unit-weight gradient
  int history = 10;    // L-BFGS memory
};

/// Binary models carry one weight row (score of the positive class);
/// multiclass models carry one row per class and use softmax.
struct LinearModel {
  int num_class = 2;
  Matrix weights;  // outputs x features
  Vector bias;
  double l2 = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;

  int num_outputs() const { return num_class == 2 ? 1 : num_class; }
  Matrix decision_function(const Matrix& x) const;
  Matrix predict_proba(const Matrix& x) const;
};

/// Packs (weights row-major, then bias) into one parameter vector.
Vector pack_parameters(const LinearModel& m);
void unpack_parameters(const Vector& theta, LinearModel& m);

/// J(theta) = [sum_i w_i * nll_i + (l2/2) * ||W||^2] / sum_i w_i.
/// Bias terms are not penalized. Writes dJ/dtheta into `grad`.
double logistic_objective(const Vector& theta, const Matrix& x, const Labels& y, const Vector& w,
                          int num_class, double l2, Vector& grad);

/// Fits by L-BFGS from weights = 0 and bias = weighted log prior.
/// max_iter = 0 returns that initialization. Throws NumericalError
/// (carrying the final gradient norm) when the budget runs out.
LinearModel train_logistic(const Matrix& x, const Labels& y, int num_class, const Vector& sample_weight,
                           const LogisticConfig& cfg);
LinearModel train_logistic(const Matrix& x, const Labels& y, const ClassBalanceInfo& balance,
                           const LogisticConfig& cfg);

nlohmann::json to_json(const LinearModel& m);
LinearModel linear_from_json(const nlohmann::json& j);

}  // namespace pdstage

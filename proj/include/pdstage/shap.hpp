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

#include <vector>

#include "pdstage/core.hpp"
#include "pdstage/tree.hpp"

namespace pdstage {

using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

/// Shapley values for one sample and one model output, in margin space.
/// base_value + sum(phi) equals the output's margin.
struct AttributionVector {
  std::vector<double> phi;
  double base_value = 0.0;
  int output = 0;
  Index sample = -1;

  double total() const;
};

/// Cover-weighted expected leaf value of a single tree.
double expected_value(const RegressionTree& tree);

/// Path-dependent TreeSHAP for one tree, leaf units (not scaled by the
/// ensemble learning rate). Adds into `phi`.
void tree_shap_single(const RegressionTree& tree, const RowRef& x, std::vector<double>& phi);

/// One AttributionVector per model output (one for binary models).
/// Throws DataError when any node lacks a positive, consistent cover.
std::vector<AttributionVector> tree_shap(const TreeEnsemble& ensemble, const RowRef& x);

/// Exhaustive Shapley values of the cover-conditional expectation game for
/// one output. Only features used by that output's trees are enumerated;
/// more than `max_features` of them is a ConfigError.
AttributionVector brute_force_shapley(const TreeEnsemble& ensemble, const RowRef& x, int output = 0,
                                      int max_features = 12);

/// Attributions for every row of `x`.
struct AttributionBatch {
  int output = 0;
  double base_value = 0.0;
  Matrix phi;     // rows x features
  Vector margin;  // model margin per row
};

std::vector<AttributionBatch> explain_rows(const TreeEnsemble& ensemble, const Matrix& x, int workers = 1);

/// Throws DataError if a node's cover is missing, negative, or the parent
/// cover does not equal the sum of its children (relative 1e-9).
void check_covers(const RegressionTree& tree);

}  // namespace pdstage

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
#include <vector>

#include "pdstage/tree.hpp"

namespace pdstage {

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 8;
  int min_leaf = 1;
  int features_per_split = 0;  // 0 selects round(sqrt(d))
  bool bootstrap = true;       // draw n rows with replacement per tree
  std::uint64_t seed = 0;

  void validate() const;
};

/// Classification tree: the shared node layout plus a weighted class
/// distribution per node (meaningful at leaves).
struct ClassificationTree {
  std::vector<TreeNode> nodes;
  std::vector<std::vector<double>> distribution;

  template <typename Row>
  const std::vector<double>& predict(const Row& x) const {
    int n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = x(node.feature) < node.threshold ? node.left : node.right;
    }
    return distribution[static_cast<std::size_t>(n)];
  }
};

struct RandomForest {
  int num_class = 2;
  int num_features = 0;
  ForestConfig config;
  std::vector<ClassificationTree> trees;

  /// Mean of the leaf class distributions.
  Matrix predict_proba(const Matrix& x) const;
};

/// Weighted Gini impurity 1 - sum_c (w_c / W)^2.
double gini_impurity(const std::vector<double>& class_weight);

/// CART forest on sample weights (e.g. balanced class weights). Each tree
/// sees a bootstrap sample and a fresh feature subset at every split;
/// the result is a pure function of (data, weights, config).
RandomForest train_random_forest(const Matrix& x, const Labels& y, int num_class, const Vector& sample_weight,
                                 const ForestConfig& cfg);

nlohmann::json to_json(const RandomForest& f);
RandomForest forest_from_json(const nlohmann::json& j);

}  // namespace pdstage

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
#include <string>
#include <vector>

#include "json.hpp"
#include "pdstage/core.hpp"

namespace pdstage {

/// One node of a binary decision tree. Samples with x[feature] < threshold
/// go left. `cover` is the summed hessian (boosting) or sample weight
/// (forest) that reached the node during training.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // root is nodes[0]

  template <typename Row>
  int leaf_index(const Row& x) const {
    int n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = x(node.feature) < node.threshold ? node.left : node.right;
    }
    return n;
  }

  template <typename Row>
  double predict(const Row& x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].value;
  }

  int depth() const;
  std::size_t leaf_count() const;
};

enum class Objective { kBinaryLogistic, kSoftmax };

/// Additive tree model:
///   margin_k(x) = base_score_k + learning_rate * sum over trees of class k.
/// Binary models have a single output; probability is its sigmoid.
struct TreeEnsemble {
  Objective objective = Objective::kBinaryLogistic;
  int num_class = 2;
  int num_features = 0;
  double learning_rate = 0.1;
  std::vector<double> base_score;
  std::vector<RegressionTree> trees;
  std::vector<int> tree_output;  // output index of each tree

  int num_outputs() const { return objective == Objective::kBinaryLogistic ? 1 : num_class; }
  /// Rounds completed; a round is one tree per output.
  std::size_t rounds() const { return trees.size() / static_cast<std::size_t>(num_outputs()); }

  /// N x num_outputs() raw scores.
  Matrix margin(const Matrix& x) const;
  /// N x num_class class probabilities.
  Matrix predict_proba(const Matrix& x) const;
  TreeEnsemble truncated(std::size_t rounds) const;
};

/// Maps margins to class probabilities (sigmoid or row softmax).
Matrix margin_to_proba(const Matrix& margin, Objective objective);

/// Weighted mean negative log-likelihood of class probabilities.
double weighted_log_loss(const Matrix& proba, const Labels& y, const Vector& w);

/// Sorted unique values per feature and every sample's rank among them.
/// Split search over these ranks is exact greedy search over midpoints of
/// consecutive distinct values.
struct FeatureBins {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint32_t>> rank;  // [feature][row]

  static FeatureBins build(const Matrix& x);
  std::size_t features() const { return values.size(); }
};

nlohmann::json to_json(const RegressionTree& t);
RegressionTree tree_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TreeEnsemble& e);
TreeEnsemble ensemble_from_json(const nlohmann::json& j);
std::string to_string(Objective o);

}  // namespace pdstage

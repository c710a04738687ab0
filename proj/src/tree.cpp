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

#include "pdstage/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdstage {

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

Matrix TreeEnsemble::margin(const Matrix& x) const {
  if (x.cols() != num_features)
    throw DataError("tree ensemble: input has " + std::to_string(x.cols()) + " features, model expects " +
                    std::to_string(num_features));
  const int k = num_outputs();
  Matrix m(x.rows(), k);
  for (Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (int c = 0; c < k; ++c) m(r, c) = base_score[static_cast<std::size_t>(c)];
    for (std::size_t t = 0; t < trees.size(); ++t) m(r, tree_output[t]) += learning_rate * trees[t].predict(row);
  }
  return m;
}

Matrix margin_to_proba(const Matrix& margin, Objective objective) {
  if (objective == Objective::kBinaryLogistic) {
    Matrix p(margin.rows(), 2);
    for (Index r = 0; r < margin.rows(); ++r) {
      const double pos = 1.0 / (1.0 + std::exp(-margin(r, 0)));
      p(r, 1) = pos;
      p(r, 0) = 1.0 - pos;
    }
    return p;
  }
  Matrix p(margin.rows(), margin.cols());
  for (Index r = 0; r < margin.rows(); ++r) {
    const double mx = margin.row(r).maxCoeff();
    p.row(r) = (margin.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Matrix TreeEnsemble::predict_proba(const Matrix& x) const { return margin_to_proba(margin(x), objective); }

TreeEnsemble TreeEnsemble::truncated(std::size_t r) const {
  TreeEnsemble out = *this;
  const std::size_t n = std::min(trees.size(), r * static_cast<std::size_t>(num_outputs()));
  out.trees.resize(n);
  out.tree_output.resize(n);
  return out;
}

double weighted_log_loss(const Matrix& proba, const Labels& y, const Vector& w) {
  double loss = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::max(proba(static_cast<Index>(i), y[i]), 1e-300);
    loss -= w(static_cast<Index>(i)) * std::log(p);
    total += w(static_cast<Index>(i));
  }
  return total > 0 ? loss / total : 0.0;
}

FeatureBins FeatureBins::build(const Matrix& x) {
  FeatureBins b;
  const auto d = static_cast<std::size_t>(x.cols());
  b.values.resize(d);
  b.rank.resize(d);
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (std::size_t j = 0; j < d; ++j) {
    for (Index r = 0; r < x.rows(); ++r) col[static_cast<std::size_t>(r)] = x(r, static_cast<Index>(j));
    std::vector<double> uniq = col;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto& rk = b.rank[j];
    rk.resize(col.size());
    for (std::size_t r = 0; r < col.size(); ++r)
      rk[r] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), col[r]) - uniq.begin());
    b.values[j] = std::move(uniq);
  }
  return b;
}

std::string to_string(Objective o) { return o == Objective::kBinaryLogistic ? "binary_logistic" : "softmax"; }

nlohmann::json to_json(const RegressionTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes)
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"value", n.value},
                     {"cover", n.cover}});
  return nodes;
}

RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree t;
  for (const auto& n : j) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.value = n.at("value").get<double>();
    node.cover = n.at("cover").get<double>();
    t.nodes.push_back(node);
  }
  const int size = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))
      throw DataError("tree: child index out of range");
  return t;
}

nlohmann::json to_json(const TreeEnsemble& e) {
  nlohmann::json trees = nlohmann::json::array();
  for (std::size_t t = 0; t < e.trees.size(); ++t)
    trees.push_back({{"output", e.tree_output[t]}, {"nodes", to_json(e.trees[t])}});
  return {{"objective", to_string(e.objective)}, {"num_class", e.num_class},
          {"num_features", e.num_features},     {"learning_rate", e.learning_rate},
          {"base_score", e.base_score},         {"trees", trees}};
}

TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
  TreeEnsemble e;
  const auto obj = j.at("objective").get<std::string>();
  if (obj == "binary_logistic") {
    e.objective = Objective::kBinaryLogistic;
  } else if (obj == "softmax") {
    e.objective = Objective::kSoftmax;
  } else {
    throw DataError("tree ensemble: unknown objective " + obj);
  }
  e.num_class = j.at("num_class").get<int>();
  e.num_features = j.at("num_features").get<int>();
  e.learning_rate = j.at("learning_rate").get<double>();
  e.base_score = j.at("base_score").get<std::vector<double>>();
  for (const auto& t : j.at("trees")) {
    e.tree_output.push_back(t.at("output").get<int>());
    e.trees.push_back(tree_from_json(t.at("nodes")));
  }
  return e;
}

}  // namespace pdstage

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

#include "pdstage/gbt.hpp"

#include <cmath>
#include <limits>

namespace pdstage {

void GbtConfig::validate() const {
  if (n_rounds < 0) throw ConfigError("gbt: n_rounds must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("gbt: learning_rate must be > 0");
  if (max_depth < 1) throw ConfigError("gbt: max_depth must be >= 1");
  if (min_child_weight < 0.0) throw ConfigError("gbt: min_child_weight must be >= 0");
  if (lambda < 0.0) throw ConfigError("gbt: lambda must be >= 0");
  if (gamma < 0.0) throw ConfigError("gbt: gamma must be >= 0");
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  std::uint32_t rank = 0;  // rows with rank <= this go left
  double gain = 0.0;
};

class GradientTreeBuilder {
 public:
  GradientTreeBuilder(const FeatureBins& bins, const Vector& g, const Vector& h, const GbtConfig& cfg)
      : bins_(bins), g_(g), h_(h), cfg_(cfg) {}

  RegressionTree build(std::vector<Index> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<Index> rows, int depth) {
    double gsum = 0.0;
    double hsum = 0.0;
    for (Index r : rows) {
      gsum += g_(r);
      hsum += h_(r);
    }
    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.value = leaf_weight(gsum, hsum, cfg_.lambda);
    node.cover = hsum;
    tree_.nodes.push_back(node);
    if (depth >= cfg_.max_depth || rows.size() < 2) return id;

    Split best = find_split(rows, gsum, hsum);
    if (best.feature < 0 || !(best.gain > 0.0)) return id;

    std::vector<Index> left, right;
    const auto& rank = bins_.rank[static_cast<std::size_t>(best.feature)];
    for (Index r : rows) (rank[static_cast<std::size_t>(r)] <= best.rank ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& n = tree_.nodes[static_cast<std::size_t>(id)];
    n.feature = best.feature;
    n.threshold = best.threshold;
    n.left = l;
    n.right = r;
    n.cover = tree_.nodes[static_cast<std::size_t>(l)].cover + tree_.nodes[static_cast<std::size_t>(r)].cover;
    return id;
  }

  Split find_split(const std::vector<Index>& rows, double gsum, double hsum) {
    Split best;
    for (std::size_t f = 0; f < bins_.features(); ++f) {
      const auto& vals = bins_.values[f];
      if (vals.size() < 2) continue;
      const auto& rank = bins_.rank[f];
      hg_.assign(vals.size(), 0.0);
      hh_.assign(vals.size(), 0.0);
      hc_.assign(vals.size(), 0);
      for (Index r : rows) {
        const auto b = rank[static_cast<std::size_t>(r)];
        hg_[b] += g_(r);
        hh_[b] += h_(r);
        ++hc_[b];
      }
      double gl = 0.0;
      double hl = 0.0;
      std::size_t prev = vals.size();
      for (std::size_t b = 0; b < vals.size(); ++b) {
        if (hc_[b] == 0) continue;
        if (prev < vals.size()) {
          // Candidate split between the previous occupied value and this one.
          const double gr = gsum - gl;
          const double hr = hsum - hl;
          if (hl >= cfg_.min_child_weight && hr >= cfg_.min_child_weight) {
            const double gain = split_gain(gl, hl, gr, hr, cfg_.lambda, cfg_.gamma);
            if (gain > best.gain) {
              best.gain = gain;
              best.feature = static_cast<int>(f);
              best.rank = static_cast<std::uint32_t>(prev);
              best.threshold = 0.5 * (vals[prev] + vals[b]);
            }
          }
        }
        gl += hg_[b];
        hl += hh_[b];
        prev = b;
      }
    }
    return best;
  }

  const FeatureBins& bins_;
  const Vector& g_;
  const Vector& h_;
  const GbtConfig& cfg_;
  RegressionTree tree_;
  std::vector<double> hg_, hh_;
  std::vector<int> hc_;
};

}  // namespace

RegressionTree fit_gradient_tree(const FeatureBins& bins, const Vector& grad, const Vector& hess,
                                 const std::vector<Index>& rows, const GbtConfig& cfg) {
  cfg.validate();
  return GradientTreeBuilder(bins, grad, hess, cfg).build(rows);
}

TreeEnsemble train_gbt(const Matrix& x, const Labels& y, int num_class, const Vector& w,
                       const GbtConfig& cfg) {
  cfg.validate();
  if (num_class < 2) throw ConfigError("gbt: at least two classes are required");
  if (static_cast<Index>(y.size()) != x.rows() || w.size() != x.rows())
    throw DataError("gbt: features, labels and weights differ in length");
  if (x.rows() == 0) throw DataError("gbt: empty training set");
  for (int c : y)
    if (c < 0 || c >= num_class) throw DataError("gbt: label outside [0, num_class)");

  TreeEnsemble e;
  e.objective = num_class == 2 ? Objective::kBinaryLogistic : Objective::kSoftmax;
  e.num_class = num_class;
  e.num_features = static_cast<int>(x.cols());
  e.learning_rate = cfg.learning_rate;
  const int k = e.num_outputs();
  const Index n = x.rows();

  std::vector<double> class_weight(static_cast<std::size_t>(num_class), 0.0);
  for (Index i = 0; i < n; ++i) class_weight[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += w(i);
  const double total = w.sum();
  auto safe_log = [](double v) { return std::log(std::max(v, 1e-300)); };
  if (k == 1) {
    e.base_score = {safe_log(class_weight[1]) - safe_log(class_weight[0])};
  } else {
    for (int c = 0; c < k; ++c) e.base_score.push_back(safe_log(class_weight[static_cast<std::size_t>(c)] / total));
  }

  const FeatureBins bins = FeatureBins::build(x);
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;

  Matrix margin(n, k);
  for (int c = 0; c < k; ++c) margin.col(c).setConstant(e.base_score[static_cast<std::size_t>(c)]);
  Vector g(n), h(n);
  GradientTreeBuilder builder(bins, g, h, cfg);

  for (int round = 0; round < cfg.n_rounds; ++round) {
    const Matrix p = margin_to_proba(margin, e.objective);
    std::vector<RegressionTree> round_trees;
    for (int c = 0; c < k; ++c) {
      const int cls = k == 1 ? 1 : c;
      for (Index i = 0; i < n; ++i) {
        const double pi = p(i, cls);
        const double yi = y[static_cast<std::size_t>(i)] == cls ? 1.0 : 0.0;
        g(i) = w(i) * (pi - yi);
        h(i) = w(i) * pi * (1.0 - pi);
      }
      round_trees.push_back(builder.build(all));
    }
    // Softmax gradients for every class use the same pre-round margins.
    for (int c = 0; c < k; ++c) {
      const auto& t = round_trees[static_cast<std::size_t>(c)];
      for (Index i = 0; i < n; ++i) margin(i, c) += cfg.learning_rate * t.predict(x.row(i));
      e.trees.push_back(std::move(round_trees[static_cast<std::size_t>(c)]));
      e.tree_output.push_back(c);
    }
  }
  return e;
}

TreeEnsemble train_gbt(const Matrix& x, const Labels& y, const ClassBalanceInfo& balance,
                       const GbtConfig& cfg) {
  return train_gbt(x, y, static_cast<int>(balance.class_counts.size()), boosting_sample_weights(balance, y), cfg);
}

}  // namespace pdstage

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

#include "pdstage/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pdstage {

void ForestConfig::validate() const {
  if (n_trees <= 0) throw ConfigError("random forest: n_trees must be >= 1");
  if (max_depth <= 0) throw ConfigError("random forest: max_depth must be >= 1");
  if (min_leaf < 1) throw ConfigError("random forest: min_leaf must be >= 1");
  if (features_per_split < 0) throw ConfigError("random forest: features_per_split must be >= 0");
}

double gini_impurity(const std::vector<double>& cw) {
  const double total = std::accumulate(cw.begin(), cw.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double v : cw) s += (v / total) * (v / total);
  return 1.0 - s;
}

namespace {

class ClassTreeBuilder {
 public:
  ClassTreeBuilder(const FeatureBins& bins, const Labels& y, int k, const Vector& w, const ForestConfig& cfg,
                   int mtry, std::mt19937_64& rng)
      : bins_(bins), y_(y), k_(k), w_(w), cfg_(cfg), mtry_(mtry), rng_(rng) {
    features_.resize(bins.features());
    std::iota(features_.begin(), features_.end(), 0);
  }

  ClassificationTree build(std::vector<Index> rows, const std::vector<double>& multiplicity) {
    mult_ = &multiplicity;
    tree_ = {};
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  double weight(Index r) const { return w_(r) * (*mult_)[static_cast<std::size_t>(r)]; }
  double count(Index r) const { return (*mult_)[static_cast<std::size_t>(r)]; }

  int grow(std::vector<Index> rows, int depth) {
    std::vector<double> cw(static_cast<std::size_t>(k_), 0.0);
    double n = 0.0;
    for (Index r : rows) {
      cw[static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])] += weight(r);
      n += count(r);
    }
    const double total = std::accumulate(cw.begin(), cw.end(), 0.0);
    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.cover = total;
    std::vector<double> dist(cw);
    if (total > 0.0)
      for (auto& v : dist) v /= total;
    const double impurity = gini_impurity(cw);
    tree_.nodes.push_back(node);
    tree_.distribution.push_back(std::move(dist));

    if (depth >= cfg_.max_depth || impurity <= 0.0 || n < 2.0 * cfg_.min_leaf) return id;

    int best_f = -1;
    std::uint32_t best_rank = 0;
    double best_thr = 0.0;
    double best_score = total * impurity * 1e-12;  // demand a real decrease

    const std::size_t d = features_.size();
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(mtry_), d);
    // Partial Fisher-Yates draws the candidate features for this node.
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    std::vector<std::size_t> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(candidates.begin(), candidates.end());

    for (std::size_t f : candidates) {
      const auto& vals = bins_.values[f];
      if (vals.size() < 2) continue;
      const auto& rank = bins_.rank[f];
      hist_.assign(vals.size() * static_cast<std::size_t>(k_), 0.0);
      cnt_.assign(vals.size(), 0.0);
      for (Index r : rows) {
        const auto b = rank[static_cast<std::size_t>(r)];
        hist_[b * static_cast<std::size_t>(k_) + static_cast<std::size_t>(y_[static_cast<std::size_t>(r)])] += weight(r);
        cnt_[b] += count(r);
      }
      std::vector<double> left(static_cast<std::size_t>(k_), 0.0);
      std::vector<double> right(static_cast<std::size_t>(k_));
      double nl = 0.0;
      std::size_t prev = vals.size();
      for (std::size_t b = 0; b < vals.size(); ++b) {
        if (cnt_[b] == 0.0) continue;
        if (prev < vals.size() && nl >= cfg_.min_leaf && n - nl >= cfg_.min_leaf) {
          double wl = 0.0;
          for (int c = 0; c < k_; ++c) {
            right[static_cast<std::size_t>(c)] = cw[static_cast<std::size_t>(c)] - left[static_cast<std::size_t>(c)];
            wl += left[static_cast<std::size_t>(c)];
          }
          const double score = total * impurity - wl * gini_impurity(left) - (total - wl) * gini_impurity(right);
          if (score > best_score) {
            best_score = score;
            best_f = static_cast<int>(f);
            best_rank = static_cast<std::uint32_t>(prev);
            best_thr = 0.5 * (vals[prev] + vals[b]);
          }
        }
        for (int c = 0; c < k_; ++c) left[static_cast<std::size_t>(c)] += hist_[b * static_cast<std::size_t>(k_) + static_cast<std::size_t>(c)];
        nl += cnt_[b];
        prev = b;
      }
    }
    if (best_f < 0) return id;

    std::vector<Index> lrows, rrows;
    const auto& rank = bins_.rank[static_cast<std::size_t>(best_f)];
    for (Index r : rows) (rank[static_cast<std::size_t>(r)] <= best_rank ? lrows : rrows).push_back(r);
    rows = {};
    const int l = grow(std::move(lrows), depth + 1);
    const int r = grow(std::move(rrows), depth + 1);
    auto& nd = tree_.nodes[static_cast<std::size_t>(id)];
    nd.feature = best_f;
    nd.threshold = best_thr;
    nd.left = l;
    nd.right = r;
    nd.cover = tree_.nodes[static_cast<std::size_t>(l)].cover + tree_.nodes[static_cast<std::size_t>(r)].cover;
    return id;
  }

  const FeatureBins& bins_;
  const Labels& y_;
  int k_;
  const Vector& w_;
  const ForestConfig& cfg_;
  int mtry_;
  std::mt19937_64& rng_;
  const std::vector<double>* mult_ = nullptr;
  std::vector<std::size_t> features_;
  std::vector<double> hist_;
  std::vector<double> cnt_;
  ClassificationTree tree_;
};

}  // namespace

Matrix RandomForest::predict_proba(const Matrix& x) const {
  if (x.cols() != num_features)
    throw DataError("random forest: input has " + std::to_string(x.cols()) + " features, model expects " +
                    std::to_string(num_features));
  Matrix p = Matrix::Zero(x.rows(), num_class);
  for (Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (const auto& t : trees) {
      const auto& dist = t.predict(row);
      for (int c = 0; c < num_class; ++c) p(r, c) += dist[static_cast<std::size_t>(c)];
    }
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

RandomForest train_random_forest(const Matrix& x, const Labels& y, int num_class, const Vector& w,
                                 const ForestConfig& cfg) {
  cfg.validate();
  if (static_cast<Index>(y.size()) != x.rows() || w.size() != x.rows())
    throw DataError("random forest: features, labels and weights differ in length");
  if (x.rows() == 0) throw DataError("random forest: empty training set");
  RandomForest f;
  f.num_class = num_class;
  f.num_features = static_cast<int>(x.cols());
  f.config = cfg;
  const int mtry = cfg.features_per_split > 0
                       ? cfg.features_per_split
                       : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(x.cols())))));
  const FeatureBins bins = FeatureBins::build(x);
  const auto n = static_cast<std::size_t>(x.rows());
  for (int t = 0; t < cfg.n_trees; ++t) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    std::vector<double> mult(n, cfg.bootstrap ? 0.0 : 1.0);
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) mult[draw(rng)] += 1.0;
    }
    std::vector<Index> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (mult[i] > 0.0) rows.push_back(static_cast<Index>(i));
    ClassTreeBuilder builder(bins, y, num_class, w, cfg, mtry, rng);
    f.trees.push_back(builder.build(std::move(rows), mult));
  }
  return f;
}

nlohmann::json to_json(const RandomForest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees) {
    RegressionTree shape{t.nodes};
    trees.push_back({{"nodes", to_json(shape)}, {"distribution", t.distribution}});
  }
  return {{"num_class", f.num_class},
          {"num_features", f.num_features},
          {"config",
           {{"n_trees", f.config.n_trees},
            {"max_depth", f.config.max_depth},
            {"min_leaf", f.config.min_leaf},
            {"features_per_split", f.config.features_per_split},
            {"bootstrap", f.config.bootstrap},
            {"seed", f.config.seed}}},
          {"trees", trees}};
}

RandomForest forest_from_json(const nlohmann::json& j) {
  RandomForest f;
  f.num_class = j.at("num_class").get<int>();
  f.num_features = j.at("num_features").get<int>();
  const auto& c = j.at("config");
  f.config.n_trees = c.at("n_trees").get<int>();
  f.config.max_depth = c.at("max_depth").get<int>();
  f.config.min_leaf = c.at("min_leaf").get<int>();
  f.config.features_per_split = c.at("features_per_split").get<int>();
  f.config.bootstrap = c.at("bootstrap").get<bool>();
  f.config.seed = c.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) {
    ClassificationTree ct;
    ct.nodes = tree_from_json(t.at("nodes")).nodes;
    ct.distribution = t.at("distribution").get<std::vector<std::vector<double>>>();
    f.trees.push_back(std::move(ct));
  }
  return f;
}

}  // namespace pdstage

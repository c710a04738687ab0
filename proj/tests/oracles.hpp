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

// Reference computations written independently of the library, used as
// test oracles. Nothing here calls into pdstage numerics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pdstage/core.hpp"
#include "pdstage/tree.hpp"

namespace pdstage::oracle {

inline std::vector<std::vector<double>> confusion(const Labels& t, const Labels& p, int k) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < t.size(); ++i) c[static_cast<std::size_t>(t[i])][static_cast<std::size_t>(p[i])] += 1;
  return c;
}

inline double accuracy(const Labels& t, const Labels& p) {
  double hit = 0;
  for (std::size_t i = 0; i < t.size(); ++i) hit += t[i] == p[i];
  return hit / static_cast<double>(t.size());
}

inline double f1_for(const Labels& t, const Labels& p, int cls) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tp += t[i] == cls && p[i] == cls;
    fp += t[i] != cls && p[i] == cls;
    fn += t[i] == cls && p[i] != cls;
  }
  return 2 * tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

inline double macro_f1(const Labels& t, const Labels& p, int k) {
  double s = 0;
  for (int c = 0; c < k; ++c) s += f1_for(t, p, c);
  return s / k;
}

/// MCC as the Pearson correlation of one-hot indicator matrices.
inline double mcc(const Labels& t, const Labels& p, int k) {
  const double n = static_cast<double>(t.size());
  auto cov = [&](const Labels& a, const Labels& b) {
    double s = 0;
    for (int c = 0; c < k; ++c) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        ma += a[i] == c;
        mb += b[i] == c;
      }
      ma /= n;
      mb /= n;
      for (std::size_t i = 0; i < t.size(); ++i) s += ((a[i] == c) - ma) * ((b[i] == c) - mb);
    }
    return s;
  };
  const double d = std::sqrt(cov(t, t) * cov(p, p));
  return d == 0 ? 0.0 : cov(t, p) / d;
}

/// Exhaustive pair counting; ties count one half.
inline double roc_auc(const std::vector<int>& pos, const std::vector<double>& s) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        pairs += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return pairs == 0 ? 0.0 : num / pairs;
}

/// Step-wise average precision over every distinct threshold.
inline double average_precision(const std::vector<int>& pos, const std::vector<double>& s) {
  std::vector<double> thr(s);
  std::sort(thr.begin(), thr.end(), std::greater<>());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  double npos = 0;
  for (int v : pos) npos += v;
  if (npos == 0) return 0.0;
  double ap = 0, prev_recall = 0;
  for (double t : thr) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (pos[i] ? tp : fp) += 1;
    const double recall = tp / npos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

/// Random tree over `d` features with consistent covers.
inline RegressionTree random_tree(int d, int max_depth, std::mt19937_64& rng, double split_prob = 0.8) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> c(0.5, 5.0);
  std::uniform_int_distribution<int> f(0, d - 1);
  std::bernoulli_distribution split(split_prob);
  RegressionTree t;
  std::function<int(int)> grow = [&](int depth) -> int {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (depth < max_depth && (depth == 0 || split(rng))) {
      const int feature = f(rng);
      const double thr = u(rng);
      const int l = grow(depth + 1);
      const int r = grow(depth + 1);
      auto& n = t.nodes[static_cast<std::size_t>(id)];
      n.feature = feature;
      n.threshold = thr;
      n.left = l;
      n.right = r;
      n.cover = t.nodes[static_cast<std::size_t>(l)].cover + t.nodes[static_cast<std::size_t>(r)].cover;
    } else {
      auto& n = t.nodes[static_cast<std::size_t>(id)];
      n.value = u(rng);
      n.cover = c(rng);
    }
    return id;
  };
  grow(0);
  return t;
}

inline TreeEnsemble random_ensemble(int d, int trees, int max_depth, std::mt19937_64& rng, int outputs = 1) {
  TreeEnsemble e;
  e.objective = outputs == 1 ? Objective::kBinaryLogistic : Objective::kSoftmax;
  e.num_class = outputs == 1 ? 2 : outputs;
  e.num_features = d;
  e.learning_rate = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
  for (int k = 0; k < outputs; ++k) e.base_score.push_back(std::uniform_real_distribution<double>(-1, 1)(rng));
  for (int t = 0; t < trees; ++t)
    for (int k = 0; k < outputs; ++k) {
      e.trees.push_back(random_tree(d, max_depth, rng));
      e.tree_output.push_back(k);
    }
  return e;
}

/// Cover-conditional expectation of one tree with the features in `known` fixed to x.
inline double conditional_value(const RegressionTree& t, int node, const std::vector<double>& x, unsigned known) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.feature < 0) return n.value;
  if (known >> n.feature & 1u) return conditional_value(t, x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right, x, known);
  const auto& l = t.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = t.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * conditional_value(t, n.left, x, known) + r.cover * conditional_value(t, n.right, x, known)) /
         (l.cover + r.cover);
}

/// Shapley values by subset enumeration over all d features, scaled by the learning rate.
inline std::vector<double> enumerate_shapley(const TreeEnsemble& e, const std::vector<double>& x, int output = 0) {
  const int d = e.num_features;
  auto v = [&](unsigned s) {
    double total = 0;
    for (std::size_t i = 0; i < e.trees.size(); ++i)
      if (e.tree_output.empty() || e.tree_output[i] == output) total += conditional_value(e.trees[i], 0, x, s);
    return e.learning_rate * total;
  };
  std::vector<double> fact(static_cast<std::size_t>(d) + 1, 1.0);
  for (int i = 1; i <= d; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i) - 1] * i;
  std::vector<double> phi(static_cast<std::size_t>(d), 0.0);
  for (unsigned s = 0; s < (1u << d); ++s) {
    const int size = __builtin_popcount(s);
    const double vs = v(s);
    for (int j = 0; j < d; ++j)
      if (!(s >> j & 1u)) {
        const double w = fact[static_cast<std::size_t>(size)] * fact[static_cast<std::size_t>(d - size - 1)] / fact[static_cast<std::size_t>(d)];
        phi[static_cast<std::size_t>(j)] += w * (v(s | 1u << j) - vs);
      }
  }
  return phi;
}

/// Central finite differences of a scalar function.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-6) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + h;
    const double fp = f(x);
    x(i) = orig - h;
    const double fm = f(x);
    x(i) = orig;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

/// ||a - b|| / ||b||
inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace pdstage::oracle

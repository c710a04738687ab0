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

#include "pdstage/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "pdstage/grid.hpp"

namespace pdstage {

double AttributionVector::total() const { return base_value + std::accumulate(phi.begin(), phi.end(), 0.0); }

void check_covers(const RegressionTree& tree) {
  if (tree.nodes.empty()) throw DataError("tree has no nodes");
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (!std::isfinite(n.cover) || n.cover < 0.0)
      throw DataError("node " + std::to_string(i) + " has no usable cover statistic");
    if (n.is_leaf()) continue;
    if (n.cover <= 0.0) throw DataError("internal node " + std::to_string(i) + " has zero cover");
    const double sum = tree.nodes.at(static_cast<std::size_t>(n.left)).cover +
                       tree.nodes.at(static_cast<std::size_t>(n.right)).cover;
    if (std::abs(sum - n.cover) > 1e-9 * std::max(1.0, n.cover))
      throw DataError("node " + std::to_string(i) + " cover differs from the sum of its children");
  }
}

namespace {

double expectation(const RegressionTree& tree, int node) {
  const auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return n.value;
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * expectation(tree, n.left) + r.cover * expectation(tree, n.right)) / n.cover;
}

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend(std::vector<PathElement>& path, int depth, double zero, double one, int feature) {
  path[static_cast<std::size_t>(depth)] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    path[static_cast<std::size_t>(i + 1)].pweight += one * cur.pweight * (i + 1) / (depth + 1);
    cur.pweight = zero * cur.pweight * (depth - i) / (depth + 1);
  }
}

void unwind(std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next = path[static_cast<std::size_t>(depth)].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = cur.pweight;
      cur.pweight = next * (depth + 1) / ((i + 1) * one);
      next = tmp - cur.pweight * zero * (depth - i) / (depth + 1);
    } else {
      cur.pweight = cur.pweight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    const auto& nxt = path[static_cast<std::size_t>(i + 1)];
    cur.feature = nxt.feature;
    cur.zero_fraction = nxt.zero_fraction;
    cur.one_fraction = nxt.one_fraction;
  }
}

double unwound_sum(const std::vector<PathElement>& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next = path[static_cast<std::size_t>(depth)].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next = path[static_cast<std::size_t>(i)].pweight - tmp * zero * (depth - i) / (depth + 1);
    } else if (zero != 0.0) {
      total += path[static_cast<std::size_t>(i)].pweight / zero * (depth + 1) / (depth - i);
    }
  }
  return total;
}

void recurse(const RegressionTree& tree, const RowRef& x, std::vector<double>& phi, int node,
             std::vector<PathElement> path, int depth, double zero, double one, int feature) {
  path.resize(static_cast<std::size_t>(depth + 1));
  extend(path, depth, zero, one, feature);
  const auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) {
    for (int i = 1; i <= depth; ++i) {
      const auto& el = path[static_cast<std::size_t>(i)];
      phi[static_cast<std::size_t>(el.feature)] +=
          unwound_sum(path, depth, i) * (el.one_fraction - el.zero_fraction) * n.value;
    }
    return;
  }
  const bool goes_left = x(n.feature) < n.threshold;
  const int hot = goes_left ? n.left : n.right;
  const int cold = goes_left ? n.right : n.left;
  const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / n.cover;
  const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / n.cover;

  double in_zero = 1.0;
  double in_one = 1.0;
  for (int k = 1; k <= depth; ++k) {
    if (path[static_cast<std::size_t>(k)].feature == n.feature) {
      in_zero = path[static_cast<std::size_t>(k)].zero_fraction;
      in_one = path[static_cast<std::size_t>(k)].one_fraction;
      unwind(path, depth, k);
      --depth;
      break;
    }
  }
  recurse(tree, x, phi, hot, path, depth + 1, hot_zero * in_zero, in_one, n.feature);
  if (cold_zero * in_zero > 0.0) recurse(tree, x, phi, cold, path, depth + 1, cold_zero * in_zero, 0.0, n.feature);
}

// Conditional expectation with features in `known` fixed to x.
double conditional(const RegressionTree& tree, const RowRef& x, const std::vector<char>& known, int node) {
  const auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.is_leaf()) return n.value;
  if (known[static_cast<std::size_t>(n.feature)])
    return conditional(tree, x, known, x(n.feature) < n.threshold ? n.left : n.right);
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * conditional(tree, x, known, n.left) + r.cover * conditional(tree, x, known, n.right)) / n.cover;
}

void check_row(const TreeEnsemble& e, const RowRef& x) {
  if (x.size() != e.num_features)
    throw DataError("attribution: sample has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(e.num_features));
}

}  // namespace

double expected_value(const RegressionTree& tree) {
  check_covers(tree);
  return expectation(tree, 0);
}

void tree_shap_single(const RegressionTree& tree, const RowRef& x, std::vector<double>& phi) {
  check_covers(tree);
  if (tree.nodes.front().is_leaf()) return;
  std::vector<PathElement> path;
  path.reserve(32);
  recurse(tree, x, phi, 0, path, 0, 1.0, 1.0, -1);
}

std::vector<AttributionVector> tree_shap(const TreeEnsemble& ensemble, const RowRef& x) {
  check_row(ensemble, x);
  const int outputs = ensemble.num_outputs();
  std::vector<AttributionVector> out(static_cast<std::size_t>(outputs));
  std::vector<std::vector<double>> raw(static_cast<std::size_t>(outputs),
                                       std::vector<double>(static_cast<std::size_t>(ensemble.num_features), 0.0));
  for (int k = 0; k < outputs; ++k) {
    out[static_cast<std::size_t>(k)].output = k;
    out[static_cast<std::size_t>(k)].base_value = ensemble.base_score.at(static_cast<std::size_t>(k));
  }
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) {
    const auto k = static_cast<std::size_t>(ensemble.tree_output[t]);
    tree_shap_single(ensemble.trees[t], x, raw[k]);
    out[k].base_value += ensemble.learning_rate * expectation(ensemble.trees[t], 0);
  }
  for (int k = 0; k < outputs; ++k) {
    auto& a = out[static_cast<std::size_t>(k)];
    a.phi = raw[static_cast<std::size_t>(k)];
    for (double& v : a.phi) v *= ensemble.learning_rate;
  }
  return out;
}

AttributionVector brute_force_shapley(const TreeEnsemble& ensemble, const RowRef& x, int output,
                                      int max_features) {
  check_row(ensemble, x);
  if (output < 0 || output >= ensemble.num_outputs()) throw ConfigError("brute_force_shapley: output out of range");
  std::vector<const RegressionTree*> trees;
  std::set<int> used;
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) {
    if (ensemble.tree_output[t] != output) continue;
    check_covers(ensemble.trees[t]);
    trees.push_back(&ensemble.trees[t]);
    for (const auto& n : ensemble.trees[t].nodes)
      if (!n.is_leaf()) used.insert(n.feature);
  }
  const std::vector<int> active(used.begin(), used.end());
  const int d = static_cast<int>(active.size());
  if (d > max_features)
    throw ConfigError("brute_force_shapley: " + std::to_string(d) + " active features exceed the cap of " +
                      std::to_string(max_features));

  std::vector<char> known(static_cast<std::size_t>(ensemble.num_features), 0);
  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets);
  for (std::size_t s = 0; s < subsets; ++s) {
    for (int j = 0; j < d; ++j) known[static_cast<std::size_t>(active[static_cast<std::size_t>(j)])] = (s >> j) & 1U;
    double v = 0.0;
    for (const auto* t : trees) v += conditional(*t, x, known, 0);
    value[s] = ensemble.base_score.at(static_cast<std::size_t>(output)) + ensemble.learning_rate * v;
  }

  // Shapley kernel weight |S|!(d-|S|-1)!/d!
  std::vector<double> weight(static_cast<std::size_t>(std::max(d, 1)));
  for (int s = 0; s < d; ++s)
    weight[static_cast<std::size_t>(s)] = std::exp(std::lgamma(s + 1.0) + std::lgamma(d - s) - std::lgamma(d + 1.0));

  AttributionVector a;
  a.output = output;
  a.base_value = value[0];
  a.phi.assign(static_cast<std::size_t>(ensemble.num_features), 0.0);
  for (int j = 0; j < d; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
    a.phi[static_cast<std::size_t>(active[static_cast<std::size_t>(j)])] = phi;
  }
  return a;
}

std::vector<AttributionBatch> explain_rows(const TreeEnsemble& ensemble, const Matrix& x, int workers) {
  if (x.cols() != ensemble.num_features)
    throw DataError("attribution: matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                    std::to_string(ensemble.num_features));
  for (const auto& t : ensemble.trees) check_covers(t);
  const int outputs = ensemble.num_outputs();
  const Matrix margin = ensemble.margin(x);
  std::vector<AttributionBatch> out(static_cast<std::size_t>(outputs));
  for (int k = 0; k < outputs; ++k) {
    auto& b = out[static_cast<std::size_t>(k)];
    b.output = k;
    b.phi = Matrix::Zero(x.rows(), x.cols());
    b.margin = margin.col(k);
  }
  parallel_for(static_cast<std::size_t>(x.rows()), workers, [&](std::size_t i) {
    const auto r = static_cast<Index>(i);
    const auto attr = tree_shap(ensemble, x.row(r));
    for (int k = 0; k < outputs; ++k) {
      auto& b = out[static_cast<std::size_t>(k)];
      for (Index j = 0; j < x.cols(); ++j) b.phi(r, j) = attr[static_cast<std::size_t>(k)].phi[static_cast<std::size_t>(j)];
    }
  });
  for (int k = 0; k < outputs; ++k) out[static_cast<std::size_t>(k)].base_value = ensemble.base_score.at(static_cast<std::size_t>(k));
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t)
    out[static_cast<std::size_t>(ensemble.tree_output[t])].base_value +=
        ensemble.learning_rate * expectation(ensemble.trees[t], 0);
  return out;
}

}  // namespace pdstage

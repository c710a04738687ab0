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

#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "pdstage/explain.hpp"
#include "pdstage/gbt.hpp"
#include "pdstage/shap.hpp"
#include "support.hpp"

using namespace pdstage;

namespace {

Eigen::RowVectorXd random_row(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  Eigen::RowVectorXd x(d);
  for (int j = 0; j < d; ++j) x(j) = u(rng);
  return x;
}

std::vector<double> as_vector(const Eigen::RowVectorXd& x) { return {x.data(), x.data() + x.size()}; }

TreeEnsemble single(RegressionTree t, int d, double lr = 1.0, double base = 0.0) {
  TreeEnsemble e;
  e.num_features = d;
  e.learning_rate = lr;
  e.base_score = {base};
  e.trees = {std::move(t)};
  e.tree_output = {0};
  return e;
}

std::vector<std::string> names(int d, const std::string& prefix = "f") {
  std::vector<std::string> out;
  for (int j = 0; j < d; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

}  // namespace

TEST_CASE("single-leaf tree has zero attributions") {
  RegressionTree t;
  t.nodes.push_back({-1, 0.0, -1, -1, 0.7, 3.0});
  const auto e = single(t, 3, 0.5, 0.2);
  const auto a = tree_shap(e, Eigen::RowVectorXd::Ones(3)).at(0);
  for (double p : a.phi) CHECK(p == 0.0);
  CHECK(a.base_value == doctest::Approx(0.2 + 0.5 * 0.7));
}

TEST_CASE("depth-1 tree closed form") {
  RegressionTree t;
  t.nodes.push_back({1, 0.0, 1, 2, 0.0, 4.0});
  t.nodes.push_back({-1, 0.0, -1, -1, 2.0, 1.0});
  t.nodes.push_back({-1, 0.0, -1, -1, -1.0, 3.0});
  const auto e = single(t, 2);
  const double mean = (1.0 * 2.0 + 3.0 * -1.0) / 4.0;
  CHECK(expected_value(t) == doctest::Approx(mean));
  Eigen::RowVectorXd x(2);
  x << 5.0, -1.0;
  const auto a = tree_shap(e, x).at(0);
  CHECK(a.phi[0] == 0.0);
  CHECK(a.phi[1] == doctest::Approx(2.0 - mean));
  x << 5.0, 1.0;
  CHECK(tree_shap(e, x).at(0).phi[1] == doctest::Approx(-1.0 - mean));
}

TEST_CASE("tree shap matches subset enumeration on random ensembles") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 2 + trial % 7;
    const auto e = oracle::random_ensemble(d, 1 + trial % 6, 1 + trial % 4, rng);
    const auto x = random_row(d, rng);
    const auto fast = tree_shap(e, x).at(0);
    const auto slow = oracle::enumerate_shapley(e, as_vector(x));
    const auto lib = brute_force_shapley(e, x);
    for (int j = 0; j < d; ++j) {
      CHECK(std::abs(fast.phi[static_cast<std::size_t>(j)] - slow[static_cast<std::size_t>(j)]) < 1e-10);
      CHECK(std::abs(lib.phi[static_cast<std::size_t>(j)] - slow[static_cast<std::size_t>(j)]) < 1e-10);
    }
  }
}

TEST_CASE("efficiency: base plus attributions is the margin") {
  std::mt19937_64 rng(32);
  for (int outputs : {1, 3}) {
    const auto e = oracle::random_ensemble(6, 12, 4, rng, outputs);
    for (int s = 0; s < 20; ++s) {
      const Eigen::RowVectorXd x = random_row(6, rng);
      const Matrix m = e.margin(Matrix(x));
      const auto attrs = tree_shap(e, x);
      REQUIRE(static_cast<int>(attrs.size()) == outputs);
      for (int k = 0; k < outputs; ++k) CHECK(std::abs(attrs[static_cast<std::size_t>(k)].total() - m(0, k)) < 1e-10);
    }
  }
}

TEST_CASE("efficiency on a trained multiclass booster") {
  std::mt19937_64 rng(33);
  const Matrix x = test::random_matrix(90, 5, rng);
  Labels y(90);
  for (Index i = 0; i < 90; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * x(i, 3) > 0.5 ? 2 : x(i, 0) > -0.3 ? 1 : 0;
  GbtConfig cfg;
  cfg.n_rounds = 15;
  cfg.max_depth = 4;
  const auto e = train_gbt(x, y, 3, Vector::Ones(90), cfg);
  const auto batches = explain_rows(e, x, 2);
  REQUIRE(batches.size() == 3);
  const Matrix m = e.margin(x);
  for (const auto& b : batches)
    for (Index i = 0; i < x.rows(); ++i) {
      CHECK(std::abs(b.base_value + b.phi.row(i).sum() - m(i, b.output)) < 1e-10);
      CHECK(b.margin(i) == doctest::Approx(m(i, b.output)).epsilon(1e-14));
    }
}

TEST_CASE("symmetry and dummy axioms") {
  RegressionTree t;
  // f(x0, x1) = [x0 >= 0] + [x1 >= 0] with equal covers
  t.nodes.push_back({0, 0.0, 1, 2, 0.0, 4.0});
  t.nodes.push_back({1, 0.0, 3, 4, 0.0, 2.0});
  t.nodes.push_back({1, 0.0, 5, 6, 0.0, 2.0});
  t.nodes.push_back({-1, 0.0, -1, -1, 0.0, 1.0});
  t.nodes.push_back({-1, 0.0, -1, -1, 1.0, 1.0});
  t.nodes.push_back({-1, 0.0, -1, -1, 1.0, 1.0});
  t.nodes.push_back({-1, 0.0, -1, -1, 2.0, 1.0});
  const auto e = single(t, 4);
  Eigen::RowVectorXd x(4);
  x << 1.0, 1.0, 9.0, -9.0;
  const auto a = tree_shap(e, x).at(0);
  CHECK(a.phi[0] == doctest::Approx(a.phi[1]));
  CHECK(a.phi[0] == doctest::Approx(0.5));
  CHECK(a.phi[2] == 0.0);
  CHECK(a.phi[3] == 0.0);

  std::mt19937_64 rng(34);
  auto r = oracle::random_ensemble(4, 5, 3, rng);
  r.num_features = 7;
  const auto b = tree_shap(r, random_row(7, rng)).at(0);
  for (int j = 4; j < 7; ++j) CHECK(b.phi[static_cast<std::size_t>(j)] == 0.0);
}

TEST_CASE("attributions add across trees") {
  std::mt19937_64 rng(35);
  auto a = oracle::random_ensemble(5, 4, 3, rng);
  auto b = oracle::random_ensemble(5, 3, 3, rng);
  b.learning_rate = a.learning_rate;
  auto both = a;
  both.trees.insert(both.trees.end(), b.trees.begin(), b.trees.end());
  both.tree_output.insert(both.tree_output.end(), b.tree_output.begin(), b.tree_output.end());
  const auto x = random_row(5, rng);
  const auto pa = tree_shap(a, x).at(0), pb = tree_shap(b, x).at(0), pab = tree_shap(both, x).at(0);
  for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(pab.phi[j] - pa.phi[j] - pb.phi[j]) < 1e-12);
}

TEST_CASE("cover validation and feature cap") {
  std::mt19937_64 rng(36);
  auto e = oracle::random_ensemble(4, 2, 3, rng);
  const auto x = random_row(4, rng);
  auto broken = e;
  broken.trees[0].nodes[0].cover += 1.0;
  CHECK_THROWS_AS(tree_shap(broken, x), DataError);
  broken = e;
  broken.trees[1].nodes.back().cover = -1.0;
  CHECK_THROWS_AS(tree_shap(broken, x), DataError);

  auto wide = oracle::random_ensemble(14, 60, 4, rng);
  CHECK_THROWS_AS(brute_force_shapley(wide, random_row(14, rng)), ConfigError);
}

TEST_CASE("global summary hand example") {
  Matrix phi(3, 2);
  phi << 1, 0, -3, 0, 2, 0;
  const auto s = global_class_summary(phi, {0, 0, 1}, {"A", "B"}, {"x", "y"}, 15, "t");
  CHECK(s.within_abs(0, 0) == 2.0);
  CHECK(s.within_abs(1, 0) == 2.0);
  CHECK(s.stacked_abs(0, 0) == doctest::Approx(4.0 / 3.0));
  CHECK(s.stacked_abs(1, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(s.within_signed(0, 0) == -1.0);
  CHECK(s.total(0) == 2.0);
  CHECK(s.stacked_abs.col(0).sum() == doctest::Approx(s.total(0)));
  CHECK(s.top_features() == std::vector<std::string>{"x"});
  CHECK(global_class_summary(Matrix::Zero(3, 2), {0, 0, 1}, {"A", "B"}, {"x", "y"}).ranking.empty());
  CHECK_THROWS_AS(global_class_summary(phi, {0, 0, 0}, {"A", "B"}, {"x", "y"}), DataError);
}

TEST_CASE("global summary ranks by mean magnitude, ties by name") {
  Matrix phi(2, 4);
  phi << 1, -1, 0.5, 3, -1, 1, 0.5, -3;
  const auto s = global_class_summary(phi, {0, 1}, {"A", "B"}, {"d", "b", "c", "a"}, 2);
  CHECK(s.top_features() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("heatmap row set is the union of the per-task top lists") {
  const auto feats = names(45);
  const Labels lab{0, 1};
  auto summary = [&](int block, const std::string& task) {
    Matrix phi = Matrix::Zero(2, 45);
    for (int j = 0; j < 15; ++j) phi.col(block * 15 + j).setConstant(1.0 + j);
    return global_class_summary(phi, lab, {"A", "B"}, feats, 15, task);
  };
  const auto same = cross_task_heatmap({summary(0, "a"), summary(0, "b"), summary(0, "c")});
  CHECK(same.rows.size() == 15);
  const auto disjoint = cross_task_heatmap({summary(0, "a"), summary(1, "b"), summary(2, "c")});
  CHECK(disjoint.rows.size() == 45);
  std::set<std::string> rows;
  for (const auto& r : disjoint.rows) {
    rows.insert(r.feature);
    int present = 0;
    for (std::size_t c = 0; c < 3; ++c)
      if (r.value[c]) {
        ++present;
        CHECK(*r.shade[c] >= 0.0);
        CHECK(*r.shade[c] <= 1.0);
      }
    CHECK(present == 1);
  }
  CHECK(rows == std::set<std::string>(feats.begin(), feats.end()));
  CHECK(disjoint.rows.front().value[0].has_value() + disjoint.rows.front().value[1].has_value() +
            disjoint.rows.front().value[2].has_value() ==
        1);
  CHECK_THROWS_AS(cross_task_heatmap({summary(0, "a"), summary(1, "b")}), ConfigError);
}

TEST_CASE("waterfall ordering and residual") {
  AttributionVector a;
  a.phi = {0.5, -2.0, 0.0, 1.0};
  a.base_value = 1.0;
  const auto w = local_waterfall(a, {"p", "q", "r", "s"}, 2);
  REQUIRE(w.entries.size() == 3);
  CHECK(w.entries[0].feature == "q");
  CHECK(w.entries[1].feature == "s");
  CHECK(w.entries[2].feature == kRemaining);
  CHECK(w.entries[2].phi == doctest::Approx(0.5));
  CHECK(w.entries[0].cumulative == doctest::Approx(-1.0));
  CHECK(w.margin() == doctest::Approx(a.total()));

  const auto full = local_waterfall(a, {"p", "q", "r", "s"}, 10);
  CHECK(full.entries.size() == 4);
  CHECK(full.entries.back().phi == 0.0);
  CHECK(full.margin() == doctest::Approx(0.5));
}

TEST_CASE("attribution csv carries one row per sample and feature") {
  std::mt19937_64 rng(37);
  const auto e = oracle::random_ensemble(3, 4, 3, rng);
  const Matrix x = test::random_matrix(4, 3, rng);
  std::ostringstream out;
  write_attributions_csv(out, {"a", "b", "c", "d"}, names(3), explain_rows(e, x));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "sample,output,feature,phi,base,margin,residual");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 12);
}

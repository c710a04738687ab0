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

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "pdstage/grid.hpp"
#include "pdstage/metrics.hpp"
#include "pdstage/split.hpp"
#include "support.hpp"

using namespace pdstage;

namespace {

Labels with_counts(std::vector<std::size_t> counts) {
  Labels y;
  for (std::size_t c = 0; c < counts.size(); ++c) y.insert(y.end(), counts[c], static_cast<int>(c));
  return y;
}

std::size_t count_class(const Labels& y, const std::vector<Index>& rows, int c) {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](Index r) { return y[static_cast<std::size_t>(r)] == c; }));
}

std::vector<int> indicator(const Labels& y, int c) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] == c;
  return out;
}

std::vector<double> column(const Matrix& m, int c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, c);
  return out;
}

// Class-separated blobs; class c is shifted by c * gap along every feature.
void blobs(const std::vector<std::size_t>& counts, Index d, double gap, std::uint64_t seed, Matrix& x, Labels& y) {
  std::mt19937_64 rng(seed);
  y = with_counts(counts);
  x = test::random_matrix(static_cast<Index>(y.size()), d, rng);
  for (std::size_t i = 0; i < y.size(); ++i) x.row(static_cast<Index>(i)).array() += gap * y[i];
}

}  // namespace

TEST_CASE("holdout arithmetic") {
  const auto s = stratified_holdout(with_counts({80, 20}), 2, 0.2, 1);
  const Labels y = with_counts({80, 20});
  CHECK(count_class(y, s.test, 0) == 16);
  CHECK(count_class(y, s.test, 1) == 4);
  CHECK(s.train.size() + s.test.size() == 100);
  std::set<Index> both(s.train.begin(), s.train.end());
  for (Index r : s.test) CHECK(both.insert(r).second);

  const Labels b = with_counts({10, 10});
  const auto t = stratified_holdout(b, 2, 0.2, 5);
  CHECK(count_class(b, t.test, 0) == 2);
  CHECK(count_class(b, t.test, 1) == 2);
  CHECK(stratified_holdout(b, 2, 0.2, 5).test == t.test);
}

TEST_CASE("holdout: class below the minimum is named") {
  try {
    stratified_holdout(with_counts({20, 4}), 2, 0.2, 1, {"Healthy", "Mild"});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("Mild") != std::string::npos);
  }
  CHECK_THROWS_AS(stratified_holdout(with_counts({20, 20}), 2, 1.0, 1), ConfigError);
}

TEST_CASE("kfold: exact divisibility and partition property") {
  const Labels y = with_counts({5, 5});
  const auto folds = stratified_kfold(y, 2, 5, 3);
  REQUIRE(folds.size() == 5);
  std::vector<int> seen(10, 0);
  for (const auto& f : folds) {
    CHECK(count_class(y, f.validate, 0) == 1);
    CHECK(count_class(y, f.validate, 1) == 1);
    CHECK(f.fit.size() + f.validate.size() == 10);
    for (Index r : f.validate) ++seen[static_cast<std::size_t>(r)];
    for (Index r : f.fit) CHECK(std::find(f.validate.begin(), f.validate.end(), r) == f.validate.end());
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("kfold: sparse minority class") {
  const Labels y = with_counts({7, 3});
  CHECK_THROWS_AS(stratified_kfold(y, 2, 5, 3), DataError);
  const auto folds = stratified_kfold(y, 2, 5, 3, {}, true);
  std::size_t total = 0;
  for (const auto& f : folds) {
    const auto c = count_class(y, f.validate, 1);
    CHECK(c <= 1);
    total += c;
  }
  CHECK(total == 3);
  CHECK_THROWS_AS(stratified_kfold(y, 2, 1, 3), ConfigError);
}

TEST_CASE("kfold: stratification bound over 100 seeds") {
  std::mt19937_64 rng(77);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::uniform_int_distribution<std::size_t> n(5, 60);
    const std::vector<std::size_t> counts{n(rng), n(rng), n(rng)};
    const Labels y = with_counts(counts);
    const auto folds = stratified_kfold(y, 3, 5, seed);
    for (const auto& f : folds)
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(static_cast<double>(count_class(y, f.validate, c)) - static_cast<double>(counts[static_cast<std::size_t>(c)]) / 5.0) <= 1.0);
  }
}

TEST_CASE("grouped splits keep subjects together") {
  Labels y;
  std::vector<std::string> groups;
  for (int s = 0; s < 40; ++s)
    for (int v = 0; v < 3; ++v) {
      y.push_back(s < 28 ? 0 : 1);
      groups.push_back("S" + std::to_string(s));
    }
  const auto h = grouped_holdout(y, groups, 2, 0.2, 4);
  std::set<std::string> test_groups;
  for (Index r : h.test) test_groups.insert(groups[static_cast<std::size_t>(r)]);
  for (Index r : h.train) CHECK(test_groups.count(groups[static_cast<std::size_t>(r)]) == 0);
  const auto folds = grouped_kfold(y, groups, 2, 5, 4);
  for (const auto& f : folds) {
    std::set<std::string> v;
    for (Index r : f.validate) v.insert(groups[static_cast<std::size_t>(r)]);
    for (Index r : f.fit) CHECK(v.count(groups[static_cast<std::size_t>(r)]) == 0);
  }
}

TEST_CASE("metrics: hand-evaluated binary example") {
  Labels t, p;
  auto add = [&](int truth, int pred, int n) {
    for (int i = 0; i < n; ++i) {
      t.push_back(truth);
      p.push_back(pred);
    }
  };
  add(1, 1, 50);
  add(0, 1, 10);
  add(1, 0, 10);
  add(0, 0, 30);
  Matrix score(100, 2);
  for (Index i = 0; i < 100; ++i) score.row(i) << 1.0 - p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i)];
  const auto m = compute_metrics(t, p, score, 2);
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.f1 == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(m.mcc == doctest::Approx(0.5833).epsilon(1e-4));
  CHECK(m.mcc == doctest::Approx(1400.0 / 2400.0));
}

TEST_CASE("metrics: perfect predictions and degenerate conventions") {
  const Labels y{1, 1, 0, 0};
  Matrix s(4, 2);
  s << 0.1, 0.9, 0.2, 0.8, 0.7, 0.3, 0.9, 0.1;
  const auto m = compute_metrics(y, y, s, 2);
  CHECK(m.accuracy == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.roc_auc == 1.0);
  CHECK(m.pr_auc == 1.0);
  CHECK(m.mcc == 1.0);
  const auto none = compute_metrics(y, Labels(4, 0), s, 2);
  CHECK(none.f1 == 0.0);
  CHECK(none.mcc == 0.0);
  CHECK_THROWS_AS(compute_metrics(y, Labels(3, 0), s, 2), DataError);
  CHECK_THROWS_AS(compute_metrics(y, y, Matrix::Zero(4, 3), 2), DataError);
}

TEST_CASE("metrics match brute-force recomputation on random prediction sets") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = trial % 2 == 0 ? 2 : 3;
    const std::size_t n = 20 + static_cast<std::size_t>(trial) * 3;
    const Labels t = test::random_labels(n, k, rng);
    Matrix s = test::random_matrix(static_cast<Index>(n), k, rng).array().exp();
    // coarse scores make ties common
    s = (s * 4.0).array().round() + 1.0;
    for (Index i = 0; i < s.rows(); ++i) s.row(i) /= s.row(i).sum();
    const Labels p = argmax_labels(s);
    const auto m = compute_metrics(t, p, s, k);
    CHECK(std::abs(m.accuracy - oracle::accuracy(t, p)) < 1e-10);
    CHECK(std::abs(m.mcc - oracle::mcc(t, p, k)) < 1e-10);
    if (k == 2) {
      CHECK(std::abs(m.f1 - oracle::f1_for(t, p, 1)) < 1e-10);
      CHECK(std::abs(m.roc_auc - oracle::roc_auc(indicator(t, 1), column(s, 1))) < 1e-10);
      CHECK(std::abs(m.pr_auc - oracle::average_precision(indicator(t, 1), column(s, 1))) < 1e-10);
    } else {
      double roc = 0, pr = 0;
      for (int c = 0; c < k; ++c) {
        roc += oracle::roc_auc(indicator(t, c), column(s, c)) / k;
        pr += oracle::average_precision(indicator(t, c), column(s, c)) / k;
      }
      CHECK(std::abs(m.f1 - oracle::macro_f1(t, p, k)) < 1e-10);
      CHECK(std::abs(m.roc_auc - roc) < 1e-10);
      CHECK(std::abs(m.pr_auc - pr) < 1e-10);
    }
  }
}

TEST_CASE("roc auc equals normalized Mann-Whitney U") {
  std::mt19937_64 rng(5);
  const Labels y = test::random_labels(300, 2, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s(300);
  for (std::size_t i = 0; i < 300; ++i) s[i] = std::round(4 * (g(rng) + 0.7 * y[i])) / 4;
  double u = 0, np = 0, nn = 0;
  for (std::size_t i = 0; i < 300; ++i) (y[i] ? np : nn) += 1;
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t j = 0; j < 300; ++j)
      if (y[i] == 1 && y[j] == 0) u += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
  CHECK(std::abs(roc_auc(indicator(y, 1), s) - u / (np * nn)) < 1e-12);
}

TEST_CASE("label permutation drives roc auc toward one half") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  double mean = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Labels y = with_counts({150, 150});
    std::vector<double> s(300);
    for (std::size_t i = 0; i < 300; ++i) s[i] = g(rng) + 1.5 * y[i];
    std::shuffle(y.begin(), y.end(), rng);
    mean += roc_auc(indicator(y, 1), s) / 20;
  }
  CHECK(std::abs(mean - 0.5) <= 0.05);
}

TEST_CASE("oof confusion") {
  const Labels y{0, 1, 2, 0, 1, 2};
  const auto id = oof_confusion(y, y, 3);
  CHECK(id.isApprox(Eigen::MatrixXd::Identity(3, 3)));
  const auto zero = oof_confusion(y, Labels(6, 0), 3);
  CHECK((zero.col(0).array() == 1.0).all());
  CHECK(zero.rightCols(2).sum() == 0.0);
  CHECK_THROWS_AS(oof_confusion(y, Labels{0, 1, 2, -1, 1, 2}, 3), DataError);
}

TEST_CASE("oof confusion concentrates where classes overlap") {
  Matrix x;
  Labels y;
  blobs({60, 60, 60}, 3, 0.0, 8, x, y);
  // class 0 far away, classes 1 and 2 nearly on top of each other
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0) x.row(static_cast<Index>(i)).array() -= 6.0;
    if (y[i] == 2) x.row(static_cast<Index>(i)).array() += 0.3;
  }
  const auto folds = stratified_kfold(y, 3, 5, 1);
  const auto cv = cross_validate(ModelKind::kKnn, {{"k", 5}}, x, y, 3, folds, 1);
  const auto cm = oof_confusion(y, cv.oof_pred, 3);
  for (Index r = 0; r < 3; ++r) CHECK(cm.row(r).sum() == doctest::Approx(1.0));
  CHECK(cm(0, 0) == 1.0);
  CHECK(cm(1, 2) + cm(2, 1) > 0.2);
  CHECK(cm(1, 0) + cm(2, 0) + cm(0, 1) + cm(0, 2) == 0.0);
}

TEST_CASE("grid search selection rules") {
  Matrix x;
  Labels y;
  blobs({40, 40}, 4, 8.0, 9, x, y);
  const auto folds = stratified_kfold(y, 2, 5, 2);

  GridSpec single{ModelKind::kKnn, {{"k", {7}}}};
  auto r = grid_search(x, y, 2, single, folds, 1);
  CHECK(r.configs.size() == 1);
  CHECK(r.best_index == 0);

  // zero rounds predicts the base rate only; balanced classes tie at 0.5 so class 0 wins
  GridSpec two{ModelKind::kGbt, {{"n_rounds", {0, 20}}}};
  r = grid_search(x, y, 2, two, folds, 1);
  CHECK(r.configs[0].mean_score == 0.0);
  CHECK(r.configs[1].mean_score == 1.0);
  CHECK(r.best_index == 1);

  GridSpec tie{ModelKind::kKnn, {{"k", {3, 3}}}};
  r = grid_search(x, y, 2, tie, folds, 1);
  CHECK(r.configs[0].mean_score == r.configs[1].mean_score);
  CHECK(r.best_index == 0);

  GridSpec expand{ModelKind::kGbt, {{"max_depth", {2, 3}}, {"learning_rate", {0.1, 0.2, 0.3}}}};
  const auto pts = expand.expand();
  REQUIRE(pts.size() == 6);
  CHECK(pts[1].at("max_depth") == 2);
  CHECK(pts[1].at("learning_rate") == 0.2);
}

TEST_CASE("grid search reports failed configurations") {
  Matrix x;
  Labels y;
  blobs({40, 40}, 4, 0.5, 10, x, y);
  const auto folds = stratified_kfold(y, 2, 5, 2);
  GridSpec ok{ModelKind::kLogistic, {{"max_iter", {1, 500}}}};
  auto r = grid_search(x, y, 2, ok, folds, 1);
  CHECK(r.configs[0].failed);
  CHECK_FALSE(r.configs[0].error.empty());
  CHECK_FALSE(r.configs[1].failed);
  CHECK(r.best_index == 1);
  GridSpec bad{ModelKind::kLogistic, {{"max_iter", {1}}}};
  CHECK_THROWS_AS(grid_search(x, y, 2, bad, folds, 1), NumericalError);
}

TEST_CASE("grid search is independent of worker count") {
  Matrix x;
  Labels y;
  blobs({30, 30}, 3, 1.0, 11, x, y);
  const auto folds = stratified_kfold(y, 2, 5, 2);
  const auto g = default_grid(ModelKind::kKnn);
  const auto a = grid_search(x, y, 2, g, folds, 3, 1);
  const auto b = grid_search(x, y, 2, g, folds, 3, 3);
  REQUIRE(a.configs.size() == b.configs.size());
  for (std::size_t i = 0; i < a.configs.size(); ++i) CHECK(a.configs[i].fold_scores == b.configs[i].fold_scores);
  CHECK(a.best_index == b.best_index);
}

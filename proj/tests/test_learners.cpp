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

#include "oracles.hpp"
#include "pdstage/balance.hpp"
#include "pdstage/forest.hpp"
#include "pdstage/gbt.hpp"
#include "pdstage/knn.hpp"
#include "pdstage/logistic.hpp"
#include "pdstage/metrics.hpp"
#include "pdstage/model.hpp"
#include "support.hpp"

using namespace pdstage;

namespace {

Labels counts_to_labels(std::initializer_list<std::size_t> counts) {
  Labels y;
  int c = 0;
  for (auto n : counts) {
    y.insert(y.end(), n, c);
    ++c;
  }
  return y;
}

// Two noisy Gaussian blobs along the first feature.
void blobs(Index n, Index d, double gap, std::uint64_t seed, Matrix& x, Labels& y, double minority = 0.3) {
  std::mt19937_64 rng(seed);
  x = test::random_matrix(n, d, rng);
  y.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i)
    if (static_cast<double>(i) < minority * static_cast<double>(n)) {
      y[static_cast<std::size_t>(i)] = 1;
      x(i, 0) += gap;
    }
}

}  // namespace

TEST_CASE("scale_pos_weight examples") {
  CHECK(compute_scale_pos_weight(counts_to_labels({10, 10})) == 1.0);
  CHECK(compute_scale_pos_weight(counts_to_labels({100, 4})) == 25.0);
  CHECK(compute_scale_pos_weight(counts_to_labels({7689, 553})) == doctest::Approx(7689.0 / 553.0).epsilon(1e-15));
  CHECK(compute_scale_pos_weight(counts_to_labels({7689, 553})) == doctest::Approx(13.9042).epsilon(1e-5));
  CHECK_THROWS_AS(compute_scale_pos_weight(Labels(5, 1)), DataError);
}

TEST_CASE("balanced weights examples") {
  auto b = compute_balanced_weights(counts_to_labels({5, 5}));
  CHECK(b.per_class_weight == std::vector<double>{1.0, 1.0});
  b = compute_balanced_weights(counts_to_labels({9, 1}));
  CHECK(b.per_class_weight[0] == doctest::Approx(10.0 / 18.0));
  CHECK(b.per_class_weight[0] == doctest::Approx(0.5556).epsilon(1e-4));
  CHECK(b.per_class_weight[1] == 5.0);
  CHECK(b.n_major == 9);
  CHECK(b.n_minor == 1);
  b = compute_balanced_weights(counts_to_labels({4, 4, 4}));
  for (double w : b.per_class_weight) CHECK(w == 1.0);
  b = compute_balanced_weights(counts_to_labels({7, 2, 30}));
  double total = 0;
  for (std::size_t c = 0; c < 3; ++c) total += static_cast<double>(b.class_counts[c]) * b.per_class_weight[c];
  CHECK(total == doctest::Approx(39.0));
  CHECK_THROWS_AS(compute_balanced_weights(counts_to_labels({3, 3}), 3), DataError);
  CHECK_THROWS_AS(compute_balanced_weights(Labels(4, 0)), DataError);
}

TEST_CASE("boosting sample weights put scale_pos_weight on the minority") {
  const Labels y = counts_to_labels({6, 2});
  const auto w = boosting_sample_weights(compute_balanced_weights(y), y);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(w(static_cast<Index>(i)) == (y[i] == 1 ? 3.0 : 1.0));
}

TEST_CASE("logistic: separable toy set is fit exactly") {
  Matrix x(8, 2);
  x << -2, -1, -1, -2, -1.5, -1.5, -3, -0.5, 2, 1, 1, 2, 1.5, 1.5, 0.5, 3;
  const Labels y{0, 0, 0, 0, 1, 1, 1, 1};
  LogisticConfig cfg;
  cfg.l2 = 0.01;
  const auto m = train_logistic(x, y, 2, Vector::Ones(8), cfg);
  CHECK(argmax_labels(m.predict_proba(x)) == y);
  CHECK(m.weights.allFinite());
}

TEST_CASE("logistic: zero iterations predicts the weighted base rate") {
  std::mt19937_64 rng(2);
  const Matrix x = test::random_matrix(20, 3, rng);
  Labels y = test::random_labels(20, 2, rng);
  y[0] = 0;
  y[1] = 1;
  Vector w = Vector::Ones(20);
  w(1) = 4.0;
  double pos = 0;
  for (std::size_t i = 0; i < 20; ++i) pos += y[i] * w(static_cast<Index>(i));
  LogisticConfig cfg;
  cfg.max_iter = 0;
  const auto m = train_logistic(x, y, 2, w, cfg);
  const auto p = m.predict_proba(x);
  for (Index i = 0; i < 20; ++i) CHECK(p(i, 1) == doctest::Approx(pos / w.sum()).epsilon(1e-12));
}

TEST_CASE("logistic: analytic gradient matches central differences") {
  std::mt19937_64 rng(11);
  for (int k : {2, 3}) {
    const Matrix x = test::random_matrix(5, 4, rng);
    Labels y = test::random_labels(5, k, rng);
    Vector w = (Vector::Random(5).array() + 1.5).matrix();
    const int outputs = k == 2 ? 1 : k;
    const Vector theta = Vector::Random(outputs * 4 + outputs);
    Vector grad;
    logistic_objective(theta, x, y, w, k, 0.3, grad);
    const auto f = [&](const Vector& t) {
      Vector g;
      return logistic_objective(t, x, y, w, k, 0.3, g);
    };
    CHECK(oracle::relative_error(grad, oracle::numeric_gradient(f, theta)) < 1e-5);
  }
}

TEST_CASE("logistic: non-convergence reports the gradient norm") {
  Matrix x;
  Labels y;
  blobs(60, 3, 1.0, 5, x, y);
  LogisticConfig cfg;
  cfg.max_iter = 1;
  cfg.tol = 1e-14;
  try {
    train_logistic(x, y, 2, Vector::Ones(60), cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("gradient") != std::string::npos);
  }
}

TEST_CASE("logistic: scaling every class weight leaves decisions unchanged") {
  Matrix x;
  Labels y;
  blobs(80, 3, 1.2, 6, x, y);
  const auto b = compute_balanced_weights(y);
  const Vector w = balanced_sample_weights(b, y);
  LogisticConfig cfg;
  cfg.tol = 1e-10;
  const auto m1 = train_logistic(x, y, 2, w, cfg);
  const auto m2 = train_logistic(x, y, 2, (7.0 * w).eval(), cfg);
  CHECK(argmax_labels(m1.predict_proba(x)) == argmax_labels(m2.predict_proba(x)));
}

TEST_CASE("forest: depth-1 tree splits on the informative binary feature") {
  Matrix x(8, 3);
  x << 0, 0.3, 1, 0, 0.9, 0, 0, 0.1, 1, 0, 0.7, 0,  //
      1, 0.2, 1, 1, 0.8, 0, 1, 0.4, 1, 1, 0.6, 0;
  const Labels y{0, 0, 0, 0, 1, 1, 1, 1};
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 1;
  cfg.features_per_split = 3;
  cfg.bootstrap = false;
  const auto f = train_random_forest(x, y, 2, Vector::Ones(8), cfg);
  const auto& root = f.trees[0].nodes[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == 0.5);
  // weighted Gini decrease by hand: parent 0.5, children pure
  CHECK(gini_impurity({4, 4}) == 0.5);
  CHECK(gini_impurity({4, 0}) == 0.0);
}

TEST_CASE("forest: pure node is a leaf and config errors") {
  const Matrix x = Matrix::Random(6, 2);
  ForestConfig cfg;
  cfg.n_trees = 3;
  cfg.max_depth = 10;
  const auto f = train_random_forest(x, Labels(6, 1), 2, Vector::Ones(6), cfg);
  for (const auto& t : f.trees) CHECK(t.nodes.size() == 1);
  cfg.n_trees = 0;
  CHECK_THROWS_AS(train_random_forest(x, Labels(6, 1), 2, Vector::Ones(6), cfg), ConfigError);
  cfg.n_trees = 2;
  cfg.max_depth = 0;
  CHECK_THROWS_AS(train_random_forest(x, Labels(6, 1), 2, Vector::Ones(6), cfg), ConfigError);
}

TEST_CASE("forest and boosting are deterministic per seed") {
  Matrix x;
  Labels y;
  blobs(70, 5, 1.0, 7, x, y);
  ForestConfig fc;
  fc.n_trees = 10;
  fc.seed = 99;
  const auto w = Vector::Ones(70);
  CHECK(to_json(train_random_forest(x, y, 2, w, fc)).dump() == to_json(train_random_forest(x, y, 2, w, fc)).dump());
  GbtConfig gc;
  gc.n_rounds = 10;
  CHECK(to_json(train_gbt(x, y, 2, w, gc)).dump() == to_json(train_gbt(x, y, 2, w, gc)).dump());
}

TEST_CASE("gbt: zero rounds predicts sigmoid(base_score)") {
  Matrix x;
  Labels y;
  blobs(30, 2, 1.0, 8, x, y);
  GbtConfig cfg;
  cfg.n_rounds = 0;
  const auto e = train_gbt(x, y, 2, Vector::Ones(30), cfg);
  CHECK(e.trees.empty());
  const double p1 = 9.0 / 30.0;
  CHECK(e.base_score[0] == doctest::Approx(std::log(p1 / (1 - p1))));
  const auto p = e.predict_proba(Matrix::Random(5, 2));
  for (Index i = 0; i < 5; ++i) CHECK(p(i, 1) == doctest::Approx(p1).epsilon(1e-12));

  TreeEnsemble empty;
  empty.num_features = 2;
  empty.base_score = {0.0};
  const auto half = empty.predict_proba(Matrix::Zero(3, 2));
  CHECK((half.array() == 0.5).all());
}

TEST_CASE("gbt: one round, depth 1, hand-evaluated gain and leaves") {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  const Labels y{0, 0, 1, 1};
  GbtConfig cfg;
  cfg.n_rounds = 1;
  cfg.max_depth = 1;
  cfg.min_child_weight = 0.1;
  cfg.lambda = 1.0;
  cfg.learning_rate = 1.0;
  const auto e = train_gbt(x, y, 2, Vector::Ones(4), cfg);
  REQUIRE(e.trees.size() == 1);
  const auto& t = e.trees[0];
  REQUIRE(t.nodes.size() == 3);
  CHECK(t.nodes[0].feature == 0);
  // base 0 -> p = 1/2; g = p - y, h = p(1-p)
  const double gl = 0.5 + 0.5, hl = 0.25 + 0.25, gr = -1.0, hr = 0.5;
  const double gain = 0.5 * (gl * gl / (hl + 1) + gr * gr / (hr + 1) - 0.0 / (hl + hr + 1));
  CHECK(split_gain(gl, hl, gr, hr, 1.0, 0.0) == doctest::Approx(gain));
  const auto& left = t.nodes[static_cast<std::size_t>(t.nodes[0].left)];
  const auto& right = t.nodes[static_cast<std::size_t>(t.nodes[0].right)];
  CHECK(left.value == doctest::Approx(-gl / (hl + 1)));
  CHECK(right.value == doctest::Approx(-gr / (hr + 1)));
  CHECK(left.value * right.value < 0);
  CHECK(t.nodes[0].cover == doctest::Approx(left.cover + right.cover));
}

TEST_CASE("gbt: margin additivity along tree paths") {
  Matrix x;
  Labels y;
  blobs(60, 4, 1.0, 9, x, y);
  GbtConfig cfg;
  cfg.n_rounds = 15;
  const auto e = train_gbt(x, y, 2, Vector::Ones(60), cfg);
  const auto m = e.margin(x);
  for (Index i = 0; i < x.rows(); ++i) {
    double s = e.base_score[0];
    for (const auto& t : e.trees) {
      int n = 0;  // walk the path by hand
      while (t.nodes[static_cast<std::size_t>(n)].feature >= 0) {
        const auto& nd = t.nodes[static_cast<std::size_t>(n)];
        n = x(i, nd.feature) < nd.threshold ? nd.left : nd.right;
      }
      s += e.learning_rate * t.nodes[static_cast<std::size_t>(n)].value;
    }
    CHECK(std::abs(s - m(i, 0)) < 1e-12);
  }
}

TEST_CASE("gbt: weighted training loss is non-increasing per round") {
  for (int k : {2, 3}) {
    std::mt19937_64 rng(10 + static_cast<unsigned>(k));
    const Matrix x = test::random_matrix(90, 4, rng);
    const Labels y = test::random_labels(90, k, rng);
    const auto b = compute_balanced_weights(y, k);
    const Vector w = boosting_sample_weights(b, y);
    GbtConfig cfg;
    cfg.n_rounds = 20;
    cfg.learning_rate = 0.3;
    const auto e = train_gbt(x, y, k, w, cfg);
    double prev = weighted_log_loss(e.truncated(0).predict_proba(x), y, w);
    for (std::size_t r = 1; r <= e.rounds(); ++r) {
      const double cur = weighted_log_loss(e.truncated(r).predict_proba(x), y, w);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("gbt: scaling every class weight leaves decisions unchanged") {
  Matrix x;
  Labels y;
  blobs(80, 4, 1.0, 12, x, y);
  const Vector w = boosting_sample_weights(compute_balanced_weights(y), y);
  GbtConfig cfg;
  cfg.n_rounds = 10;
  cfg.min_child_weight = 0.0;
  cfg.lambda = 0.0;
  const auto a = train_gbt(x, y, 2, w, cfg);
  const auto b = train_gbt(x, y, 2, (5.0 * w).eval(), cfg);
  CHECK(argmax_labels(a.predict_proba(x)) == argmax_labels(b.predict_proba(x)));
}

TEST_CASE("gbt: minority duplication matches scale_pos_weight on the first tree") {
  for (int w : {2, 3, 5}) {
    Matrix x;
    Labels y;
    blobs(50, 3, 1.0, 20 + static_cast<std::uint64_t>(w), x, y, 0.2);
    Vector weights = Vector::Ones(50);
    std::vector<Index> rows;
    for (Index i = 0; i < 50; ++i) {
      const int copies = y[static_cast<std::size_t>(i)] == 1 ? w : 1;
      if (copies > 1) weights(i) = w;
      for (int c = 0; c < copies; ++c) rows.push_back(i);
    }
    GbtConfig cfg;
    cfg.n_rounds = 1;
    cfg.max_depth = 3;
    const auto a = train_gbt(x, y, 2, weights, cfg);
    const auto b = train_gbt(take_rows(x, rows), take(y, rows), 2, Vector::Ones(static_cast<Index>(rows.size())), cfg);
    CHECK(a.base_score[0] == doctest::Approx(b.base_score[0]).epsilon(1e-14));
    const auto& ta = a.trees.at(0).nodes;
    const auto& tb = b.trees.at(0).nodes;
    REQUIRE(ta.size() == tb.size());
    for (std::size_t n = 0; n < ta.size(); ++n) {
      CHECK(ta[n].feature == tb[n].feature);
      CHECK(ta[n].threshold == tb[n].threshold);
      CHECK(std::abs(ta[n].value - tb[n].value) < 1e-10);
    }
  }
}

TEST_CASE("gbt: invalid configuration") {
  GbtConfig cfg;
  cfg.max_depth = 0;
  CHECK_THROWS_AS(train_gbt(Matrix::Ones(4, 1), Labels{0, 1, 0, 1}, 2, Vector::Ones(4), cfg), ConfigError);
  cfg = {};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train_gbt(Matrix::Ones(4, 1), Labels{0, 1, 0, 1}, 2, Vector::Ones(4), cfg), ConfigError);
}

TEST_CASE("knn: majority, limit and tie examples") {
  Matrix x(4, 1);
  x << 0, 1, 2, 10;
  const Labels y{0, 0, 1, 1};
  const auto m3 = fit_knn(x, y, 2, 3);
  const Eigen::RowVectorXd q = Eigen::RowVectorXd::Constant(1, 0.5);
  const auto p = knn_predict(m3, q);
  CHECK(p(0) == doctest::Approx(2.0 / 3.0));
  const auto all = knn_predict(fit_knn(x, y, 2, 4), q);
  CHECK(all(0) == 0.5);
  CHECK(all(1) == 0.5);
  Matrix tie(1, 1);
  tie << 1.5;
  CHECK(argmax_labels(fit_knn(x, y, 2, 2).predict_proba(tie)) == Labels{0});
  CHECK_THROWS_AS(fit_knn(x, y, 2, 0), ConfigError);
  CHECK_THROWS_AS(fit_knn(x, y, 2, 5), ConfigError);
}

TEST_CASE("predict_proba: self-neighbour, softmax normalisation, shape errors") {
  std::mt19937_64 rng(13);
  const Matrix x = test::random_matrix(40, 3, rng);
  Labels y = test::random_labels(40, 3, rng);
  const auto knn = fit_knn(x, y, 3, 1);
  const auto p = knn.predict_proba(x);
  for (Index i = 0; i < 40; ++i) CHECK(p(i, y[static_cast<std::size_t>(i)]) == 1.0);

  for (auto kind : {ModelKind::kGbt, ModelKind::kLogistic, ModelKind::kForest, ModelKind::kKnn}) {
    ParamSet params;
    if (kind == ModelKind::kForest) params = {{"n_trees", 5}};
    if (kind == ModelKind::kGbt) params = {{"n_rounds", 5}};
    const Model m = train_model(kind, x, y, 3, params, 1);
    const auto pr = predict_proba(m, x);
    CHECK(pr.cols() == 3);
    CHECK(((pr.rowwise().sum().array() - 1.0).abs() < 1e-9).all());
    CHECK(predict_proba(m, x) == pr);
    CHECK_THROWS_AS(predict_proba(m, Matrix::Zero(2, 4)), DataError);
  }
}

TEST_CASE("model documents round trip") {
  std::mt19937_64 rng(14);
  const Matrix x = test::random_matrix(30, 3, rng);
  const Labels y = test::random_labels(30, 2, rng);
  for (auto kind : {ModelKind::kGbt, ModelKind::kLogistic, ModelKind::kForest, ModelKind::kKnn}) {
    const Model m = train_model(kind, x, y, 2, {}, 3);
    const auto doc = model_to_json(m);
    CHECK(doc.at("kind") == to_string(kind));
    const Model back = model_from_json(doc, std::make_pair(x, y));
    CHECK(predict_proba(back, x) == predict_proba(m, x));
  }
  CHECK_THROWS_AS(train_model(ModelKind::kGbt, x, y, 2, {{"depth", 3}}, 0), ConfigError);
  CHECK_THROWS_AS(model_from_json(model_to_json(train_model(ModelKind::kKnn, x, y, 2, {}, 0))), DataError);
}

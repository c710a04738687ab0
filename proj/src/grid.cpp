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

#include "pdstage/grid.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "pdstage/preprocess.hpp"

namespace pdstage {

std::vector<ParamSet> GridSpec::expand() const {
  std::vector<ParamSet> out{ParamSet{}};
  for (const auto& [name, values] : params) {
    if (values.empty()) throw ConfigError("grid: parameter '" + name + "' has no values");
    std::vector<ParamSet> next;
    for (const auto& partial : out)
      for (double v : values) {
        ParamSet p = partial;
        p[name] = v;
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  return out;
}

GridSpec grid_from_json(ModelKind model, const nlohmann::json& j) {
  GridSpec g;
  g.model = model;
  if (!j.is_object()) throw ConfigError("grid for " + to_string(model) + " must be an object");
  for (const auto& [name, values] : j.items()) {
    std::vector<double> v;
    if (values.is_array()) {
      for (const auto& x : values) {
        if (x.is_boolean()) {
          v.push_back(x.get<bool>() ? 1.0 : 0.0);
        } else {
          v.push_back(x.get<double>());
        }
      }
    } else {
      v.push_back(values.get<double>());
    }
    g.params.emplace_back(name, v);
  }
  return g;
}

nlohmann::json to_json(const GridSpec& g) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, values] : g.params) j[name] = values;
  return j;
}

GridSpec default_grid(ModelKind model) {
  GridSpec g;
  g.model = model;
  switch (model) {
    case ModelKind::kGbt:
      g.params = {{"max_depth", {3, 5, 7}}, {"n_rounds", {100, 300}}, {"learning_rate", {0.05, 0.1}}, {"lambda", {1}}};
      break;
    case ModelKind::kLogistic: g.params = {{"l2", {0.01, 0.1, 1}}}; break;
    case ModelKind::kKnn: g.params = {{"k", {5, 11, 21}}}; break;
    case ModelKind::kForest: g.params = {{"n_trees", {200}}, {"max_depth", {8, 16}}}; break;
  }
  return g;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct FoldResult {
  Metrics metrics;
  Labels pred;
  Matrix proba;
};

FoldResult run_fold(ModelKind kind, const ParamSet& params, const Matrix& x, const Labels& y, int num_class,
                    const Fold& fold, std::uint64_t seed) {
  const Matrix fit_x = take_rows(x, fold.fit);
  const Matrix val_x = take_rows(x, fold.validate);
  const Labels fit_y = take(y, fold.fit);
  const Labels val_y = take(y, fold.validate);
  const auto scaler = fit_standardizer(fit_x, {}, "fold");
  const Matrix fit_z = apply_standardizer(scaler, fit_x);
  const Matrix val_z = apply_standardizer(scaler, val_x);
  const Model model = train_model(kind, fit_z, fit_y, num_class, params, seed);
  FoldResult r;
  r.proba = predict_proba(model, val_z);
  r.pred = argmax_labels(r.proba);
  r.metrics = compute_metrics(val_y, r.pred, r.proba, num_class);
  return r;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, "fold" + std::to_string(fold)); }

void assemble(CvOutcome& cv, const std::vector<Fold>& folds, std::vector<FoldResult>& results, Index n, int k) {
  cv.oof_pred.assign(static_cast<std::size_t>(n), -1);
  cv.oof_proba = Matrix::Zero(n, k);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    cv.fold_metrics.push_back(results[f].metrics);
    for (std::size_t i = 0; i < folds[f].validate.size(); ++i) {
      const Index r = folds[f].validate[i];
      cv.oof_pred[static_cast<std::size_t>(r)] = results[f].pred[i];
      cv.oof_proba.row(r) = results[f].proba.row(static_cast<Index>(i));
    }
  }
}

}  // namespace

CvOutcome cross_validate(ModelKind kind, const ParamSet& params, const Matrix& x, const Labels& y, int num_class,
                         const std::vector<Fold>& folds, std::uint64_t seed) {
  std::vector<FoldResult> results;
  for (std::size_t f = 0; f < folds.size(); ++f)
    results.push_back(run_fold(kind, params, x, y, num_class, folds[f], fold_seed(seed, f)));
  CvOutcome cv;
  assemble(cv, folds, results, x.rows(), num_class);
  return cv;
}

GridResult grid_search(const Matrix& x, const Labels& y, int num_class, const GridSpec& grid,
                       const std::vector<Fold>& folds, std::uint64_t seed, int workers) {
  const auto points = grid.expand();
  if (points.empty()) throw ConfigError("grid: no grid points");
  if (folds.empty()) throw ConfigError("grid: no folds");
  const std::size_t nf = folds.size();
  std::vector<FoldResult> results(points.size() * nf);
  std::vector<std::string> errors(points.size() * nf);

  parallel_for(results.size(), workers, [&](std::size_t unit) {
    const std::size_t p = unit / nf;
    const std::size_t f = unit % nf;
    try {
      results[unit] = run_fold(grid.model, points[p], x, y, num_class, folds[f], fold_seed(seed, f));
    } catch (const std::exception& e) {
      errors[unit] = std::string("fold ") + std::to_string(f) + ": " + e.what();
    }
  });

  GridResult out;
  bool any = false;
  for (std::size_t p = 0; p < points.size(); ++p) {
    ConfigScore cs;
    cs.params = points[p];
    for (std::size_t f = 0; f < nf; ++f)
      if (!errors[p * nf + f].empty()) {
        cs.failed = true;
        cs.error = errors[p * nf + f];
        break;
      }
    if (!cs.failed) {
      std::vector<FoldResult> mine(results.begin() + static_cast<std::ptrdiff_t>(p * nf),
                                   results.begin() + static_cast<std::ptrdiff_t>((p + 1) * nf));
      assemble(cs.cv, folds, mine, x.rows(), num_class);
      for (const auto& m : cs.cv.fold_metrics) cs.fold_scores.push_back(m.f1);
      cs.mean_score = summarize(cs.cv.fold_metrics).f1.mean;
      if (!any || cs.mean_score > out.configs[out.best_index].mean_score) out.best_index = p;
      any = true;
    }
    out.configs.push_back(std::move(cs));
  }
  if (!any) throw NumericalError("grid search: every grid point failed (first error: " + out.configs.front().error + ")");
  return out;
}

}  // namespace pdstage

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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdstage/metrics.hpp"
#include "pdstage/model.hpp"
#include "pdstage/split.hpp"

namespace pdstage {

/// Named hyperparameter lists. Grid points enumerate the Cartesian
/// product with the first parameter varying slowest.
struct GridSpec {
  ModelKind model = ModelKind::kGbt;
  std::vector<std::pair<std::string, std::vector<double>>> params;

  std::vector<ParamSet> expand() const;
};

GridSpec grid_from_json(ModelKind model, const nlohmann::json& j);
nlohmann::json to_json(const GridSpec& g);
/// Shipped default grid for each learner.
GridSpec default_grid(ModelKind model);

struct CvOutcome {
  std::vector<Metrics> fold_metrics;
  Labels oof_pred;   // -1 where a row was never validated
  Matrix oof_proba;
};

struct ConfigScore {
  ParamSet params;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
  bool failed = false;
  std::string error;
  CvOutcome cv;
};

struct GridResult {
  std::size_t best_index = 0;
  std::vector<ConfigScore> configs;

  const ConfigScore& best() const { return configs.at(best_index); }
};

/// Trains on each fold's fit rows after refitting the standardizer on those
/// rows only, then scores the validation rows. Fold seeds derive from
/// `seed` and the fold number, so every grid point sees the same seeds.
CvOutcome cross_validate(ModelKind kind, const ParamSet& params, const Matrix& x, const Labels& y, int num_class,
                         const std::vector<Fold>& folds, std::uint64_t seed);

/// Exhaustive search ranked by mean validation F1 (binary) or macro-F1.
/// Ties go to the earlier grid point. A point whose training throws is
/// marked failed and skipped; if every point fails a NumericalError is
/// raised. Work units run on up to `workers` threads.
GridResult grid_search(const Matrix& x, const Labels& y, int num_class, const GridSpec& grid,
                       const std::vector<Fold>& folds, std::uint64_t seed, int workers = 1);

/// Runs `n` independent jobs on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job);

}  // namespace pdstage

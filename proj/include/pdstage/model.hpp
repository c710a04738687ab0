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
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "json.hpp"
#include "pdstage/forest.hpp"
#include "pdstage/gbt.hpp"
#include "pdstage/knn.hpp"
#include "pdstage/logistic.hpp"

namespace pdstage {

enum class ModelKind { kLogistic, kKnn, kForest, kGbt };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

/// One hyperparameter assignment, e.g. {"max_depth": 3, "n_rounds": 100}.
using ParamSet = std::map<std::string, double>;

using Model = std::variant<LinearModel, KnnModel, RandomForest, TreeEnsemble>;

/// Trains with the learner's class-imbalance treatment: balanced class
/// weights for logistic regression and the forest, scale_pos_weight (or
/// balanced weights for K > 2) for boosting, none for KNN.
Model train_model(ModelKind kind, const Matrix& x, const Labels& y, int num_class, const ParamSet& params,
                  std::uint64_t seed);

Matrix predict_proba(const Model& m, const Matrix& x);
ModelKind kind_of(const Model& m);

GbtConfig gbt_config(const ParamSet& p, std::uint64_t seed = 0);
ForestConfig forest_config(const ParamSet& p, std::uint64_t seed = 0);
LogisticConfig logistic_config(const ParamSet& p);

/// Self-describing model document: {"format", "version", "kind", "model"}.
nlohmann::json model_to_json(const Model& m);
/// KNN documents need their training data passed back in.
Model model_from_json(const nlohmann::json& j, const std::optional<std::pair<Matrix, Labels>>& knn_train = {});

}  // namespace pdstage

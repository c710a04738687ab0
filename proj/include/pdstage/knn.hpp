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

#include <string>

#include "json.hpp"
#include "pdstage/core.hpp"

namespace pdstage {

/// Unweighted k-nearest-neighbour vote on Euclidean distance. Neighbour
/// ties at equal distance resolve to the lower training index.
struct KnnModel {
  int k = 5;
  int num_class = 2;
  Matrix train;
  Labels labels;
  std::string training_reference;  // provenance of `train` for serialization

  Matrix predict_proba(const Matrix& x) const;
};

KnnModel fit_knn(const Matrix& x, const Labels& y, int num_class, int k);

/// Neighbour-vote fractions for one query row.
Vector knn_predict(const KnnModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Serializes k and a reference to the training artifact, not the data.
nlohmann::json to_json(const KnnModel& m);
/// Rebinds a serialized model to its training matrix.
KnnModel knn_from_json(const nlohmann::json& j, Matrix train, Labels labels);

/// Content digest used as the training reference.
std::string matrix_digest(const Matrix& x, const Labels& y);

}  // namespace pdstage

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

#include "pdstage/knn.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>
#include <iomanip>

namespace pdstage {

KnnModel fit_knn(const Matrix& x, const Labels& y, int num_class, int k) {
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  if (static_cast<Index>(y.size()) != x.rows()) throw DataError("knn: features and labels differ in length");
  if (k > x.rows())
    throw ConfigError("knn: k = " + std::to_string(k) + " exceeds training size " + std::to_string(x.rows()));
  KnnModel m;
  m.k = k;
  m.num_class = num_class;
  m.train = x;
  m.labels = y;
  m.training_reference = matrix_digest(x, y);
  return m;
}

Vector knn_predict(const KnnModel& m, const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  const Index n = m.train.rows();
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = {(m.train.row(i) - q).squaredNorm(), i};
  const auto kth = dist.begin() + m.k;
  std::partial_sort(dist.begin(), kth, dist.end());
  Vector votes = Vector::Zero(m.num_class);
  for (auto it = dist.begin(); it != kth; ++it) votes(m.labels[static_cast<std::size_t>(it->second)]) += 1.0;
  return votes / static_cast<double>(m.k);
}

Matrix KnnModel::predict_proba(const Matrix& x) const {
  if (x.cols() != train.cols())
    throw DataError("knn: input has " + std::to_string(x.cols()) + " features, model expects " +
                    std::to_string(train.cols()));
  if (k > train.rows()) throw ConfigError("knn: k exceeds training size");
  Matrix p(x.rows(), num_class);
  for (Index r = 0; r < x.rows(); ++r) p.row(r) = knn_predict(*this, x.row(r)).transpose();
  return p;
}

std::string matrix_digest(const Matrix& x, const Labels& y) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const Index rows = x.rows(), cols = x.cols();
  feed(&rows, sizeof rows);
  feed(&cols, sizeof cols);
  feed(x.data(), static_cast<std::size_t>(x.size()) * sizeof(double));
  feed(y.data(), y.size() * sizeof(int));
  std::ostringstream s;
  s << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

nlohmann::json to_json(const KnnModel& m) {
  return {{"k", m.k},
          {"num_class", m.num_class},
          {"distance", "euclidean"},
          {"n_train", m.train.rows()},
          {"n_features", m.train.cols()},
          {"training_reference", m.training_reference}};
}

KnnModel knn_from_json(const nlohmann::json& j, Matrix train, Labels labels) {
  KnnModel m = fit_knn(train, labels, j.at("num_class").get<int>(), j.at("k").get<int>());
  if (m.training_reference != j.at("training_reference").get<std::string>())
    throw DataError("knn: supplied training data does not match the serialized reference");
  return m;
}

}  // namespace pdstage

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

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdstage/core.hpp"
#include "pdstage/ingest.hpp"

namespace pdstage {

/// Per-feature z-score parameters. Population (1/N) standard deviation;
/// a zero-variance feature keeps sigma = 0 and transforms to 0.
template <typename Scalar = double>
struct Standardizer {
  VectorX<Scalar> mean;
  VectorX<Scalar> sd;
  std::vector<std::string> feature_order;
  std::string fitted_on;
};

template <typename Derived>
Standardizer<typename Derived::Scalar> fit_standardizer(const Eigen::MatrixBase<Derived>& train,
                                                        std::vector<std::string> feature_order = {},
                                                        std::string fitted_on = "train") {
  using Scalar = typename Derived::Scalar;
  if (train.rows() == 0) throw DataError("fit_standardizer: empty training matrix");
  Standardizer<Scalar> s;
  const Scalar n = static_cast<Scalar>(train.rows());
  s.mean = train.colwise().sum().transpose() / n;
  s.sd.resize(train.cols());
  for (Index j = 0; j < train.cols(); ++j) {
    Scalar ss = (train.col(j).array() - s.mean(j)).square().sum();
    s.sd(j) = std::sqrt(ss / n);
  }
  s.feature_order = std::move(feature_order);
  s.fitted_on = std::move(fitted_on);
  return s;
}

template <typename Scalar, typename Derived>
MatrixX<Scalar> apply_standardizer(const Standardizer<Scalar>& s, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != s.mean.size())
    throw DataError("apply_standardizer: matrix has " + std::to_string(x.cols()) +
                    " columns, standardizer expects " + std::to_string(s.mean.size()));
  MatrixX<Scalar> out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    if (s.sd(j) > Scalar(0)) {
      out.col(j) = (x.col(j).array() - s.mean(j)) / s.sd(j);
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

inline Standardizer<double> fit_standardizer(const FeatureMatrix& train, std::string fitted_on = "train") {
  return fit_standardizer(train.values, train.feature_order, std::move(fitted_on));
}

/// Checks that feature names line up before transforming.
inline FeatureMatrix apply_standardizer(const Standardizer<double>& s, const FeatureMatrix& data) {
  if (!s.feature_order.empty() && s.feature_order != data.feature_order)
    throw DataError("apply_standardizer: feature order differs from the fitted order");
  FeatureMatrix out = data;
  out.values = apply_standardizer(s, data.values);
  return out;
}

inline nlohmann::json to_json(const Standardizer<double>& s) {
  nlohmann::json features = nlohmann::json::array();
  for (Index j = 0; j < s.mean.size(); ++j) {
    std::string name = static_cast<std::size_t>(j) < s.feature_order.size()
                           ? s.feature_order[static_cast<std::size_t>(j)]
                           : "f" + std::to_string(j);
    features.push_back({{"feature", name}, {"mean", s.mean(j)}, {"sd", s.sd(j)}});
  }
  return {{"fitted_on", s.fitted_on}, {"features", features}};
}

inline Standardizer<double> standardizer_from_json(const nlohmann::json& j) {
  Standardizer<double> s;
  s.fitted_on = j.at("fitted_on").get<std::string>();
  const auto& f = j.at("features");
  s.mean.resize(static_cast<Index>(f.size()));
  s.sd.resize(static_cast<Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    s.feature_order.push_back(f[i].at("feature").get<std::string>());
    s.mean(static_cast<Index>(i)) = f[i].at("mean").get<double>();
    s.sd(static_cast<Index>(i)) = f[i].at("sd").get<double>();
  }
  return s;
}

}  // namespace pdstage

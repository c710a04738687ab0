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

#include "pdstage/model.hpp"

#include <cmath>
#include <set>
#include <type_traits>

namespace pdstage {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLogistic: return "lr";
    case ModelKind::kKnn: return "knn";
    case ModelKind::kForest: return "rf";
    case ModelKind::kGbt: return "gbt";
  }
  return "gbt";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "lr" || s == "logistic") return ModelKind::kLogistic;
  if (s == "knn") return ModelKind::kKnn;
  if (s == "rf" || s == "random_forest") return ModelKind::kForest;
  if (s == "gbt" || s == "xgboost") return ModelKind::kGbt;
  throw ConfigError("unknown model '" + s + "' (expected lr, knn, rf or gbt)");
}

namespace {

void check_keys(const ParamSet& p, std::set<std::string> allowed, const std::string& model) {
  for (const auto& [k, v] : p)
    if (!allowed.count(k)) throw ConfigError(model + ": unknown hyperparameter '" + k + "'");
}

int as_int(double v, const std::string& name) {
  if (v != std::floor(v)) throw ConfigError("hyperparameter " + name + " must be an integer");
  return static_cast<int>(v);
}

template <typename T>
void set_if(const ParamSet& p, const std::string& key, T& field) {
  if (auto it = p.find(key); it != p.end()) {
    if constexpr (std::is_same_v<T, int>) {
      field = as_int(it->second, key);
    } else {
      field = it->second;
    }
  }
}

}  // namespace

GbtConfig gbt_config(const ParamSet& p, std::uint64_t seed) {
  check_keys(p, {"n_rounds", "learning_rate", "max_depth", "min_child_weight", "lambda", "gamma"}, "gbt");
  GbtConfig c;
  set_if(p, "n_rounds", c.n_rounds);
  set_if(p, "learning_rate", c.learning_rate);
  set_if(p, "max_depth", c.max_depth);
  set_if(p, "min_child_weight", c.min_child_weight);
  set_if(p, "lambda", c.lambda);
  set_if(p, "gamma", c.gamma);
  c.seed = seed;
  return c;
}

ForestConfig forest_config(const ParamSet& p, std::uint64_t seed) {
  check_keys(p, {"n_trees", "max_depth", "min_leaf", "features_per_split", "bootstrap"}, "rf");
  ForestConfig c;
  set_if(p, "n_trees", c.n_trees);
  set_if(p, "max_depth", c.max_depth);
  set_if(p, "min_leaf", c.min_leaf);
  set_if(p, "features_per_split", c.features_per_split);
  if (auto it = p.find("bootstrap"); it != p.end()) c.bootstrap = it->second != 0.0;
  c.seed = seed;
  return c;
}

LogisticConfig logistic_config(const ParamSet& p) {
  check_keys(p, {"l2", "max_iter", "tol"}, "lr");
  LogisticConfig c;
  set_if(p, "l2", c.l2);
  set_if(p, "max_iter", c.max_iter);
  set_if(p, "tol", c.tol);
  return c;
}

Model train_model(ModelKind kind, const Matrix& x, const Labels& y, int num_class, const ParamSet& params,
                  std::uint64_t seed) {
  switch (kind) {
    case ModelKind::kLogistic: {
      auto cfg = logistic_config(params);
      return train_logistic(x, y, compute_balanced_weights(y, num_class), cfg);
    }
    case ModelKind::kKnn: {
      check_keys(params, {"k"}, "knn");
      int k = 5;
      set_if(params, "k", k);
      return fit_knn(x, y, num_class, k);
    }
    case ModelKind::kForest: {
      auto cfg = forest_config(params, seed);
      auto info = compute_balanced_weights(y, num_class);
      return train_random_forest(x, y, num_class, balanced_sample_weights(info, y), cfg);
    }
    case ModelKind::kGbt: {
      auto cfg = gbt_config(params, seed);
      return train_gbt(x, y, compute_balanced_weights(y, num_class), cfg);
    }
  }
  throw ConfigError("unhandled model kind");
}

Matrix predict_proba(const Model& m, const Matrix& x) {
  return std::visit([&](const auto& model) { return model.predict_proba(x); }, m);
}

ModelKind kind_of(const Model& m) {
  switch (m.index()) {
    case 0: return ModelKind::kLogistic;
    case 1: return ModelKind::kKnn;
    case 2: return ModelKind::kForest;
    default: return ModelKind::kGbt;
  }
}

nlohmann::json model_to_json(const Model& m) {
  nlohmann::json body = std::visit([](const auto& model) -> nlohmann::json { return to_json(model); }, m);
  return {{"format", "pdstage-model"}, {"version", 1}, {"kind", to_string(kind_of(m))}, {"model", body}};
}

Model model_from_json(const nlohmann::json& j, const std::optional<std::pair<Matrix, Labels>>& knn_train) {
  if (j.value("format", "") != "pdstage-model") throw DataError("not a pdstage model document");
  const auto& body = j.at("model");
  switch (parse_model_kind(j.at("kind").get<std::string>())) {
    case ModelKind::kLogistic: return linear_from_json(body);
    case ModelKind::kForest: return forest_from_json(body);
    case ModelKind::kGbt: return ensemble_from_json(body);
    case ModelKind::kKnn:
      if (!knn_train) throw DataError("knn model: training data must be supplied to deserialize");
      return knn_from_json(body, knn_train->first, knn_train->second);
  }
  throw DataError("unhandled model kind");
}

}  // namespace pdstage

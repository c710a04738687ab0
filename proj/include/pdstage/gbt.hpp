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
#include <vector>

#include "pdstage/balance.hpp"
#include "pdstage/tree.hpp"

namespace pdstage {

struct GbtConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double min_child_weight = 1.0;
  double lambda = 1.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;  // no sampling yet; kept for the model record

  void validate() const;
};

/// Loss reduction of splitting a node with statistics (G, H) into
/// (G_L, H_L) and (G_R, H_R).
inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr;
  const double h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

inline double leaf_weight(double g, double h, double lambda) {
  return h + lambda > 0.0 ? -g / (h + lambda) : 0.0;
}

/// Grows one regression tree on per-sample gradient/hessian statistics
/// over the listed rows. Exact greedy search; node cover is the hessian sum.
RegressionTree fit_gradient_tree(const FeatureBins& bins, const Vector& grad, const Vector& hess,
                                 const std::vector<Index>& rows, const GbtConfig& cfg);

/// Second-order boosting of the weighted logistic (K = 2) or softmax loss.
/// `sample_weight` multiplies every sample's gradient and hessian.
TreeEnsemble train_gbt(const Matrix& x, const Labels& y, int num_class, const Vector& sample_weight,
                       const GbtConfig& cfg);

/// Minority-class samples weighted by scale_pos_weight (binary) or by the
/// balanced per-class weight (multiclass).
TreeEnsemble train_gbt(const Matrix& x, const Labels& y, const ClassBalanceInfo& balance,
                       const GbtConfig& cfg);

}  // namespace pdstage

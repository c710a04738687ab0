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

#include <vector>

#include "pdstage/core.hpp"

namespace pdstage {

struct ClassBalanceInfo {
  std::vector<std::size_t> class_counts;
  int major_class = 0;
  int minor_class = 1;
  std::size_t n_major = 0;
  std::size_t n_minor = 0;
  double scale_pos_weight = 1.0;            // n_major / n_minor
  std::vector<double> per_class_weight;     // N / (K * n_c)
};

/// Majority-to-minority count ratio of a binary {0, 1} label vector.
double compute_scale_pos_weight(const Labels& y);

/// Class counts, the majority/minority ratio and "balanced" inverse
/// frequency weights. `num_classes` of 0 infers K from the labels.
ClassBalanceInfo compute_balanced_weights(const Labels& y, int num_classes = 0);

/// Per-sample weights: balanced class weight of each sample's class.
Vector balanced_sample_weights(const ClassBalanceInfo& info, const Labels& y);

/// Per-sample weights for boosting: minority samples carry
/// scale_pos_weight when K = 2, the balanced class weight otherwise.
Vector boosting_sample_weights(const ClassBalanceInfo& info, const Labels& y);

}  // namespace pdstage

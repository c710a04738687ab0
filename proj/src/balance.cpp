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

#include "pdstage/balance.hpp"

#include <algorithm>

namespace pdstage {

namespace {

std::vector<std::size_t> count_classes(const Labels& y, int k) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (int c : y) {
    if (c < 0 || c >= k) throw DataError("label " + std::to_string(c) + " outside [0, " + std::to_string(k) + ")");
    ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

}  // namespace

double compute_scale_pos_weight(const Labels& y) {
  auto counts = count_classes(y, 2);
  if (counts[0] == 0 || counts[1] == 0)
    throw DataError("scale_pos_weight: both classes must be present");
  return static_cast<double>(std::max(counts[0], counts[1])) /
         static_cast<double>(std::min(counts[0], counts[1]));
}

ClassBalanceInfo compute_balanced_weights(const Labels& y, int num_classes) {
  if (y.empty()) throw DataError("class weights: empty label vector");
  int k = num_classes > 0 ? num_classes : *std::max_element(y.begin(), y.end()) + 1;
  if (k < 2) throw DataError("class weights: at least two classes are required");
  ClassBalanceInfo info;
  info.class_counts = count_classes(y, k);
  for (int c = 0; c < k; ++c)
    if (info.class_counts[static_cast<std::size_t>(c)] == 0)
      throw DataError("class weights: class " + std::to_string(c) + " has no samples");
  const double n = static_cast<double>(y.size());
  for (int c = 0; c < k; ++c)
    info.per_class_weight.push_back(n / (k * static_cast<double>(info.class_counts[static_cast<std::size_t>(c)])));
  // Ties resolve to the higher index as minority (the positive class).
  for (int c = 0; c < k; ++c) {
    const auto n_c = info.class_counts[static_cast<std::size_t>(c)];
    if (n_c > info.class_counts[static_cast<std::size_t>(info.major_class)]) info.major_class = c;
    if (n_c <= info.class_counts[static_cast<std::size_t>(info.minor_class)]) info.minor_class = c;
  }
  if (info.major_class == info.minor_class) info.major_class = info.minor_class == 0 ? 1 : 0;
  info.n_major = info.class_counts[static_cast<std::size_t>(info.major_class)];
  info.n_minor = info.class_counts[static_cast<std::size_t>(info.minor_class)];
  info.scale_pos_weight = static_cast<double>(info.n_major) / static_cast<double>(info.n_minor);
  return info;
}

Vector balanced_sample_weights(const ClassBalanceInfo& info, const Labels& y) {
  Vector w(static_cast<Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    w(static_cast<Index>(i)) = info.per_class_weight.at(static_cast<std::size_t>(y[i]));
  return w;
}

Vector boosting_sample_weights(const ClassBalanceInfo& info, const Labels& y) {
  if (info.class_counts.size() != 2) return balanced_sample_weights(info, y);
  Vector w = Vector::Ones(static_cast<Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == info.minor_class) w(static_cast<Index>(i)) = info.scale_pos_weight;
  return w;
}

}  // namespace pdstage

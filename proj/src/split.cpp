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

#include "pdstage/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace pdstage {

namespace {

std::vector<std::vector<Index>> by_class(const Labels& y, int num_class) {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(num_class));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= num_class) throw DataError("split: label outside [0, num_class)");
    out[static_cast<std::size_t>(y[i])].push_back(static_cast<Index>(i));
  }
  return out;
}

std::string class_label(int c, const std::vector<std::string>& names) {
  return static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)] : "class " + std::to_string(c);
}

}  // namespace

HoldoutSplit stratified_holdout(const Labels& y, int num_class, double test_fraction, std::uint64_t seed,
                                const std::vector<std::string>& class_names, std::size_t min_per_class) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  auto groups = by_class(y, num_class);
  HoldoutSplit s;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < num_class; ++c) {
    auto& idx = groups[static_cast<std::size_t>(c)];
    if (idx.size() < min_per_class)
      throw DataError("holdout: " + class_label(c, class_names) + " has " + std::to_string(idx.size()) +
                      " rows, at least " + std::to_string(min_per_class) + " required");
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    s.test.insert(s.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<Fold> stratified_kfold(const Labels& y, int num_class, int k, std::uint64_t seed,
                                   const std::vector<std::string>& class_names, bool allow_sparse) {
  if (k < 2) throw ConfigError("kfold: k must be >= 2");
  auto groups = by_class(y, num_class);
  std::vector<int> fold_of(y.size(), -1);
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (int c = 0; c < num_class; ++c) {
    auto& idx = groups[static_cast<std::size_t>(c)];
    if (!allow_sparse && idx.size() < static_cast<std::size_t>(k))
      throw DataError("kfold: " + class_label(c, class_names) + " has " + std::to_string(idx.size()) +
                      " rows, fewer than k = " + std::to_string(k));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      fold_of[static_cast<std::size_t>(idx[i])] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
    offset += idx.size();
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < y.size(); ++i)
    for (int f = 0; f < k; ++f)
      (fold_of[i] == f ? folds[static_cast<std::size_t>(f)].validate : folds[static_cast<std::size_t>(f)].fit)
          .push_back(static_cast<Index>(i));
  return folds;
}

namespace {

struct Group {
  std::string id;
  std::vector<Index> rows;
  int stratum = 0;
};

std::vector<std::vector<Group>> grouped_strata(const Labels& y, const std::vector<std::string>& groups, int num_class) {
  if (groups.size() != y.size()) throw DataError("grouped split: group and label vectors differ in length");
  std::map<std::string, Group> by_id;
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto& g = by_id[groups[i]];
    g.id = groups[i];
    g.rows.push_back(static_cast<Index>(i));
    g.stratum = std::max(g.stratum, y[i]);
  }
  std::vector<std::vector<Group>> strata(static_cast<std::size_t>(num_class));
  for (auto& [id, g] : by_id) strata[static_cast<std::size_t>(g.stratum)].push_back(std::move(g));
  return strata;
}

}  // namespace

HoldoutSplit grouped_holdout(const Labels& y, const std::vector<std::string>& groups, int num_class,
                             double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  auto strata = grouped_strata(y, groups, num_class);
  std::mt19937_64 rng(seed);
  HoldoutSplit s;
  for (auto& stratum : strata) {
    std::shuffle(stratum.begin(), stratum.end(), rng);
    std::size_t total = 0;
    for (const auto& g : stratum) total += g.rows.size();
    const double target = test_fraction * static_cast<double>(total);
    std::size_t taken = 0;
    for (const auto& g : stratum) {
      const bool to_test = static_cast<double>(taken) + 0.5 * static_cast<double>(g.rows.size()) <= target;
      auto& dst = to_test ? s.test : s.train;
      dst.insert(dst.end(), g.rows.begin(), g.rows.end());
      if (to_test) taken += g.rows.size();
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<Fold> grouped_kfold(const Labels& y, const std::vector<std::string>& groups, int num_class, int k,
                                std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold: k must be >= 2");
  auto strata = grouped_strata(y, groups, num_class);
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(y.size(), -1);
  std::vector<std::size_t> fold_rows(static_cast<std::size_t>(k), 0);
  for (auto& stratum : strata) {
    std::shuffle(stratum.begin(), stratum.end(), rng);
    std::vector<std::size_t> load(static_cast<std::size_t>(k), 0);
    for (const auto& g : stratum) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < load.size(); ++f)
        if (load[f] < load[best] || (load[f] == load[best] && fold_rows[f] < fold_rows[best])) best = f;
      load[best] += g.rows.size();
      fold_rows[best] += g.rows.size();
      for (Index r : g.rows) fold_of[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < y.size(); ++i)
    for (int f = 0; f < k; ++f)
      (fold_of[i] == f ? folds[static_cast<std::size_t>(f)].validate : folds[static_cast<std::size_t>(f)].fit)
          .push_back(static_cast<Index>(i));
  for (const auto& f : folds)
    if (f.validate.empty()) throw DataError("grouped kfold: fewer groups than folds");
  return folds;
}

}  // namespace pdstage

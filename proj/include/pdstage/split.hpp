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
#include <string>
#include <vector>

#include "pdstage/core.hpp"

namespace pdstage {

struct HoldoutSplit {
  std::vector<Index> train;
  std::vector<Index> test;
};

struct Fold {
  std::vector<Index> fit;
  std::vector<Index> validate;
};

/// Per class c, round(test_fraction * n_c) rows go to the test partition.
/// Index lists come back sorted. Throws DataError naming the first class
/// with fewer than `min_per_class` rows.
HoldoutSplit stratified_holdout(const Labels& y, int num_class, double test_fraction, std::uint64_t seed,
                                const std::vector<std::string>& class_names = {}, std::size_t min_per_class = 5);

/// Shuffles each class and deals it round-robin across k folds, carrying
/// the dealing offset from one class to the next so fold totals stay level.
/// Every class count per fold is floor or ceil of n_c / k.
/// allow_sparse lets a class smaller than k leave some folds without it.
std::vector<Fold> stratified_kfold(const Labels& y, int num_class, int k, std::uint64_t seed,
                                   const std::vector<std::string>& class_names = {}, bool allow_sparse = false);

/// Subject-grouped variants: all rows of one group land in the same
/// partition. Groups are stratified by their most severe (highest) class;
/// class proportions are approximate.
HoldoutSplit grouped_holdout(const Labels& y, const std::vector<std::string>& groups, int num_class,
                             double test_fraction, std::uint64_t seed);
std::vector<Fold> grouped_kfold(const Labels& y, const std::vector<std::string>& groups, int num_class, int k,
                                std::uint64_t seed);

}  // namespace pdstage

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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace pdstage::test {

/// Runs the CLI with stdout/stderr sent to `log`; returns the exit status.
inline int run_cli(const std::vector<std::string>& args, const std::filesystem::path& log) {
  std::string cmd = "'" PDSTAGE_CLI "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " >>'" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// A cohort and grid small enough for a full pipeline run in seconds.
inline nlohmann::json small_run_config() {
  using nlohmann::json;
  return json{
      {"data_dir", "data"},
      {"out", "run"},
      {"seed", 7},
      {"tasks", {"healthy_vs_mild", "healthy_vs_modsevere", "mild_vs_modsevere", "three_class"}},
      {"models", {"gbt", "lr", "knn", "rf"}},
      {"grids",
       {{"gbt", {{"max_depth", {2, 3}}, {"n_rounds", {20}}, {"learning_rate", {0.3}}}},
        {"lr", {{"l2", {1.0}}}},
        {"knn", {{"k", {5}}}},
        {"rf", {{"n_trees", {15}}, {"max_depth", {5}}}}}},
      {"explain", {{"top_k", 15}, {"waterfall_top_n", 5}, {"waterfall_per_class", 1}, {"partition", "test"}}},
      {"embed", {{"perplexity", 10}, {"iterations", 300}, {"max_points", 120}, {"learning_rate", 50}}},
      {"synth",
       {{"seed", 3},
        {"healthy", 90},
        {"stages", {{"1", 30}, {"2", 50}, {"3", 25}, {"4", 4}, {"5", 1}, {"101", 2}}},
        {"visits_per_subject", 3},
        {"planted",
         {{{"feature", "NP3BRADY"}, {"boundary", "healthy_vs_mild"}, {"shift", 3.0}},
          {{"feature", "NP3GAIT"}, {"boundary", "mild_vs_modsevere"}, {"shift", 3.5}}}}}}};
}

}  // namespace pdstage::test

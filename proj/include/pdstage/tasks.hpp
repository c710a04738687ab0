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

#include <optional>
#include <string>
#include <vector>

#include "pdstage/ingest.hpp"

namespace pdstage {

enum class Task { kHealthyVsMild, kHealthyVsModSevere, kMildVsModSevere, kThreeClass };

/// Classes are ordered by severity; class index = position in `classes`.
/// Binary tasks take the more severe class (index 1) as positive.
struct TaskSpec {
  Task task = Task::kThreeClass;
  std::vector<Severity> classes;
  std::optional<Severity> positive;

  int num_class() const { return static_cast<int>(classes.size()); }
  bool binary() const { return classes.size() == 2; }
  std::string name() const;
  std::vector<std::string> class_names() const;
  /// Class index of a consolidated label, or -1 if outside the task.
  int class_index(Severity s) const;
};

TaskSpec task_spec(Task t);
Task parse_task(const std::string& s);
std::string to_string(Task t);
const std::vector<Task>& all_tasks();
const std::vector<Task>& binary_tasks();

struct TaskData {
  TaskSpec spec;
  FeatureMatrix matrix;
  Labels y;
  std::vector<Index> source_rows;  // rows of the full matrix
};

/// Keeps only rows whose consolidated label belongs to the task.
TaskData select_task(const FeatureMatrix& m, const TaskSpec& spec);

}  // namespace pdstage

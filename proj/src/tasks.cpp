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

#include "pdstage/tasks.hpp"

namespace pdstage {

std::string to_string(Task t) {
  switch (t) {
    case Task::kHealthyVsMild: return "healthy_vs_mild";
    case Task::kHealthyVsModSevere: return "healthy_vs_modsevere";
    case Task::kMildVsModSevere: return "mild_vs_modsevere";
    case Task::kThreeClass: return "three_class";
  }
  return "three_class";
}

Task parse_task(const std::string& s) {
  for (Task t : all_tasks())
    if (to_string(t) == s) return t;
  throw ConfigError("unknown task '" + s +
                    "' (expected healthy_vs_mild, healthy_vs_modsevere, mild_vs_modsevere or three_class)");
}

const std::vector<Task>& all_tasks() {
  static const std::vector<Task> t = {Task::kHealthyVsMild, Task::kHealthyVsModSevere, Task::kMildVsModSevere,
                                      Task::kThreeClass};
  return t;
}

const std::vector<Task>& binary_tasks() {
  static const std::vector<Task> t = {Task::kHealthyVsMild, Task::kHealthyVsModSevere, Task::kMildVsModSevere};
  return t;
}

TaskSpec task_spec(Task t) {
  TaskSpec s;
  s.task = t;
  switch (t) {
    case Task::kHealthyVsMild: s.classes = {Severity::kHealthy, Severity::kMild}; break;
    case Task::kHealthyVsModSevere: s.classes = {Severity::kHealthy, Severity::kModSevere}; break;
    case Task::kMildVsModSevere: s.classes = {Severity::kMild, Severity::kModSevere}; break;
    case Task::kThreeClass: s.classes = {Severity::kHealthy, Severity::kMild, Severity::kModSevere}; break;
  }
  if (s.binary()) s.positive = s.classes.back();
  return s;
}

std::string TaskSpec::name() const { return to_string(task); }

std::vector<std::string> TaskSpec::class_names() const {
  std::vector<std::string> out;
  for (auto c : classes) out.push_back(to_string(c));
  return out;
}

int TaskSpec::class_index(Severity s) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == s) return static_cast<int>(i);
  return -1;
}

TaskData select_task(const FeatureMatrix& m, const TaskSpec& spec) {
  if (m.labels.size() != static_cast<std::size_t>(m.rows()))
    throw DataError("select_task: feature matrix carries no severity labels");
  TaskData d;
  d.spec = spec;
  for (Index r = 0; r < m.rows(); ++r) {
    int c = spec.class_index(m.labels[static_cast<std::size_t>(r)].consolidated);
    if (c < 0) continue;
    d.source_rows.push_back(r);
    d.y.push_back(c);
  }
  d.matrix = m.subset(d.source_rows);
  return d;
}

}  // namespace pdstage

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

#include "pdstage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "pdstage/csv.hpp"

namespace pdstage {

CohortSpec CohortSpec::defaults() {
  CohortSpec s;
  s.planted = {{"NP3BRADY", "healthy_vs_mild", 3.0},
               {"NP3FTAPR", "healthy_vs_mild", 3.0},
               {"NP3RIGRU", "healthy_vs_mild", 3.0},
               {"NP3PSTBL", "mild_vs_modsevere", 3.5},
               {"NP3GAIT", "mild_vs_modsevere", 3.5},
               {"NP3FRZGT", "mild_vs_modsevere", 3.5}};
  return s;
}

CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  CohortSpec s = CohortSpec::defaults();
  static const std::set<std::string> known{"seed",        "healthy",        "stages", "unstaged", "visits_per_subject",
                                           "missingness", "orphan_visits", "noise",  "planted"};
  if (!j.is_object()) throw ConfigError("cohort spec: expected an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("cohort spec: unknown key '" + key + "'");
  try {
    s.seed = j.value("seed", s.seed);
    s.healthy = j.value("healthy", s.healthy);
    if (j.contains("stages")) {
      s.stages.clear();
      for (const auto& [code, n] : j.at("stages").items()) s.stages[std::stoi(code)] = n.get<std::size_t>();
    }
    s.unstaged = j.value("unstaged", s.unstaged);
    s.visits_per_subject = j.value("visits_per_subject", s.visits_per_subject);
    s.missingness = j.value("missingness", s.missingness);
    s.orphan_visits = j.value("orphan_visits", s.orphan_visits);
    s.noise = j.value("noise", s.noise);
    if (j.contains("planted")) {
      s.planted.clear();
      for (const auto& p : j.at("planted"))
        s.planted.push_back({p.at("feature").get<std::string>(), p.at("boundary").get<std::string>(),
                             p.value("shift", 3.0)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cohort spec: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("cohort spec: stage keys must be integer codes");
  }
  if (s.visits_per_subject == 0) throw ConfigError("cohort spec: visits_per_subject must be positive");
  if (!(s.missingness >= 0.0 && s.missingness < 1.0)) throw ConfigError("cohort spec: missingness must be in [0, 1)");
  if (!(s.noise > 0.0)) throw ConfigError("cohort spec: noise must be positive");
  return s;
}

nlohmann::json to_json(const CohortSpec& s) {
  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [code, n] : s.stages) stages[std::to_string(code)] = n;
  nlohmann::json planted = nlohmann::json::array();
  for (const auto& p : s.planted) planted.push_back({{"feature", p.feature}, {"boundary", p.boundary}, {"shift", p.shift}});
  return {{"seed", s.seed},
          {"healthy", s.healthy},
          {"stages", stages},
          {"unstaged", s.unstaged},
          {"visits_per_subject", s.visits_per_subject},
          {"missingness", s.missingness},
          {"orphan_visits", s.orphan_visits},
          {"noise", s.noise},
          {"planted", planted}};
}

nlohmann::json to_json(const CohortManifest& m) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [c, n] : m.expected_classes) classes[to_string(c)] = n;
  return {{"visits", m.visits},
          {"complete_visits", m.complete_visits},
          {"expected_classes", classes},
          {"expected_excluded_unclear", m.expected_excluded_unclear},
          {"expected_excluded_other", m.expected_excluded_other},
          {"instrument_rows", m.instrument_rows},
          {"planted", m.planted}};
}

namespace {

struct Visit {
  std::string subject;
  std::string visit;
  int raw_stage = kNoStage;  // kNoStage with healthy=false means blank stage
  bool healthy = false;
  int latent_class = 0;      // 0 healthy, 1 mild, 2 moderate-severe
};

std::vector<double> boundary_means(const std::string& boundary, double shift) {
  if (boundary == "healthy_vs_mild") return {0.0, shift, shift};
  if (boundary == "mild_vs_modsevere") return {0.0, 0.0, shift};
  if (boundary == "healthy_vs_modsevere") return {0.0, shift / 2, shift};
  throw ConfigError("cohort spec: unknown boundary '" + boundary + "'");
}

std::string visit_name(std::size_t i) {
  if (i == 0) return "BL";
  std::string n = std::to_string(i);
  return "V" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

double ordinal(double z, std::pair<double, double> range) {
  const double lo = range.first;
  const double hi = range.second;
  const double u = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return std::min(hi, lo + std::floor((hi - lo + 1.0) * u));
}

}  // namespace

CohortManifest generate_cohort(const CohortSpec& spec, const SchemaSet& schema, const std::filesystem::path& out_dir) {
  schema.validate();
  // latent mean shift per column per latent class
  std::map<std::string, std::vector<double>> shift;
  CohortManifest manifest;
  for (const auto& p : spec.planted) {
    const auto* owner = schema.owner_of_feature(p.feature);
    if (!owner) throw ConfigError("cohort spec: planted feature '" + p.feature + "' is not in the schema");
    const auto means = boundary_means(p.boundary, p.shift);
    for (const auto& d : owner->derived) {
      if (d.name != p.feature) continue;
      for (const auto& col : d.inputs) {
        auto& s = shift.try_emplace(col, std::vector<double>(3, 0.0)).first->second;
        for (std::size_t c = 0; c < 3; ++c) s[c] += means[c];
      }
    }
    manifest.planted[p.boundary].push_back(p.feature);
  }

  // Visits are dealt into subjects in blocks of equal raw stage.
  std::vector<Visit> visits;
  std::size_t subject_no = 3000;
  auto add_group = [&](std::size_t count, int stage, bool healthy, int latent) {
    for (std::size_t i = 0; i < count; ++i) {
      if (i % spec.visits_per_subject == 0) ++subject_no;
      visits.push_back({std::to_string(subject_no), visit_name(i % spec.visits_per_subject), stage, healthy, latent});
    }
  };
  add_group(spec.healthy, 0, true, 0);
  for (const auto& [code, n] : spec.stages) {
    int latent = 1;
    if (code >= 3 && code <= 5) latent = 2;
    if (code < 1 || (code > 5 && code != kUnclearStage))
      throw ConfigError("cohort spec: stage code " + std::to_string(code) + " is not 1-5 or 101");
    add_group(n, code, false, latent);
  }
  add_group(spec.unstaged, kNoStage, false, 1);
  if (visits.empty()) throw ConfigError("cohort spec: no visits requested");

  std::mt19937_64 rng(derive_seed(spec.seed, "synth"));
  std::normal_distribution<double> normal(0.0, spec.noise);
  std::bernoulli_distribution blank(spec.missingness);

  std::filesystem::create_directories(out_dir);
  std::vector<char> incomplete(visits.size(), 0);
  std::size_t orphan_subject = 900000;
  for (const auto& inst : schema.instruments) {
    const auto cols = inst.required_columns();
    std::set<std::string> used;
    for (const auto& d : inst.derived) used.insert(d.inputs.begin(), d.inputs.end());
    std::ofstream out(out_dir / inst.file, std::ios::binary);
    if (!out) throw DataError("cannot write " + (out_dir / inst.file).string());
    std::vector<std::string> header{schema.subject_column, schema.visit_column};
    header.insert(header.end(), cols.begin(), cols.end());
    csv::write_row(out, header);
    auto emit = [&](const std::string& subj, const std::string& vis, int latent, char* flag) {
      std::vector<std::string> row{subj, vis};
      for (const auto& c : cols) {
        if (inst.row_filter && c == inst.row_filter->column) {
          row.push_back(inst.row_filter->value);
          continue;
        }
        double z = normal(rng);
        if (auto it = shift.find(c); it != shift.end()) z += it->second[static_cast<std::size_t>(latent)];
        const double v = ordinal(z, inst.range_of(c));
        if (blank(rng)) {
          row.emplace_back();
          if (flag && used.count(c)) *flag = 1;
        } else {
          row.push_back(csv::format_number(v));
        }
      }
      csv::write_row(out, row);
    };
    for (std::size_t i = 0; i < visits.size(); ++i)
      emit(visits[i].subject, visits[i].visit, visits[i].latent_class, &incomplete[i]);
    for (std::size_t o = 0; o < spec.orphan_visits; ++o) emit(std::to_string(++orphan_subject), "BL", 0, nullptr);
    manifest.instrument_rows[inst.name] = visits.size() + spec.orphan_visits;
  }

  {
    std::ofstream out(out_dir / kStageFile, std::ios::binary);
    csv::write_row(out, {schema.subject_column, schema.visit_column, "COHORT", "NHY"});
    for (const auto& v : visits)
      csv::write_row(out, {v.subject, v.visit, v.healthy ? "HC" : "PD",
                           v.raw_stage == kNoStage ? "" : std::to_string(v.raw_stage)});
  }
  {
    std::ofstream out(out_dir / "truth.csv", std::ios::binary);
    csv::write_row(out, {schema.subject_column, schema.visit_column, "raw_stage", "label", "complete"});
    for (std::size_t i = 0; i < visits.size(); ++i) {
      const auto& v = visits[i];
      csv::write_row(out, {v.subject, v.visit, std::to_string(v.raw_stage), to_string(consolidate(v.raw_stage, v.healthy)),
                           incomplete[i] ? "0" : "1"});
    }
  }

  manifest.visits = visits.size();
  for (std::size_t i = 0; i < visits.size(); ++i) {
    if (incomplete[i]) continue;
    ++manifest.complete_visits;
    const auto& v = visits[i];
    const Severity s = consolidate(v.raw_stage, v.healthy);
    if (s != Severity::kExcluded) {
      ++manifest.expected_classes[s];
    } else if (v.raw_stage == kUnclearStage) {
      ++manifest.expected_excluded_unclear;
    } else {
      ++manifest.expected_excluded_other;
    }
  }
  nlohmann::json doc = {{"spec", to_json(spec)}, {"manifest", to_json(manifest)}};
  std::ofstream(out_dir / "manifest.json", std::ios::binary) << doc.dump(2) << '\n';
  return manifest;
}

}  // namespace pdstage

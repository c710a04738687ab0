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

// pdstage command line entry point.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error
// (bad flags, config file, or grid), 3 data error (missing files, columns,
// labels, empty joins), 4 numerical failure (non-convergence, divergence).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pdstage/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string task;
  std::string model;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 0;
  bool grouped = false;
  std::string data_dir;
  std::string features;
  std::string spec;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run configuration (JSON)");
  cmd->add_option("--task", f.task, "task list: healthy_vs_mild, healthy_vs_modsevere, mild_vs_modsevere, three_class, all");
  cmd->add_option("--model", f.model, "model list: gbt, lr, knn, rf, all");
  cmd->add_option("--seed", f.seed, "top-level seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "worker threads for grid search and attribution");
  cmd->add_flag("--grouped-split", f.grouped, "split by subject instead of by visit");
  cmd->add_option("--data-dir", f.data_dir, "directory of instrument CSVs and stages.csv");
  cmd->add_option("--features", f.features, "feature matrix written by ingest");
}

pdstage::RunConfig resolve_config(const Flags& f, const CLI::App& cmd) {
  pdstage::RunConfig c = f.config.empty() ? pdstage::RunConfig::defaults() : pdstage::load_run_config(f.config);
  pdstage::Overrides o;
  if (cmd.count("--task")) o.task = f.task;
  if (cmd.count("--model")) o.model = f.model;
  if (cmd.count("--seed")) o.seed = f.seed;
  if (cmd.count("--out")) o.out = f.out;
  if (cmd.count("--workers")) o.workers = f.workers;
  if (f.grouped) o.grouped_split = true;
  pdstage::apply_overrides(c, o);
  if (cmd.count("--data-dir")) c.data_dir = fs::weakly_canonical(fs::absolute(f.data_dir));
  if (cmd.count("--features")) c.features = fs::weakly_canonical(fs::absolute(f.features));
  return c;
}

void print_ingest(const pdstage::IngestOutcome& o) {
  const auto& r = o.result.report;
  std::cout << "joined visits      " << r.joined_rows << "\n"
            << "dropped incomplete " << r.dropped_incomplete << "\n"
            << "excluded (101)     " << r.excluded_unclear << "\n"
            << "excluded (other)   " << r.excluded_other << "\n";
  for (const auto& [s, n] : r.class_counts) std::cout << "  " << pdstage::to_string(s) << " " << n << "\n";
  std::cout << "features           " << o.result.matrix.feature_order.size() << "\n"
            << "wrote " << o.matrix_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdstage: severity staging toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pdstage::kToolVersion);
  Flags f;
  auto* ingest = app.add_subcommand("ingest", "derive features, join instruments, label visits");
  auto* evaluate = app.add_subcommand("evaluate", "holdout split, cross-validated grid search, holdout metrics");
  auto* explain = app.add_subcommand("explain", "TreeSHAP attributions, global summaries, heatmap, waterfalls");
  auto* embed = app.add_subcommand("embed", "t-SNE embeddings per task");
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  auto* report = app.add_subcommand("report", "assemble report.md from existing artifacts");
  for (auto* cmd : {ingest, evaluate, explain, embed, synth, report}) add_common(cmd, f);
  synth->add_option("--spec", f.spec, "cohort spec (JSON); defaults to the config's synth block");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      print_ingest(pdstage::cmd_ingest(resolve_config(f, *ingest)));
    } else if (*evaluate) {
      const auto c = resolve_config(f, *evaluate);
      const auto doc = pdstage::cmd_evaluate(c);
      for (const auto& [task, t] : doc.at("tasks").items())
        for (const auto& [model, m] : t.at("models").items()) {
          const std::string key = t.at("selection_metric");
          std::cout << task << " " << model << " cv " << key << " " << m.at("cv").at(key).at("mean").get<double>()
                    << " holdout accuracy " << m.at("holdout").at("accuracy").get<double>() << "\n";
        }
      std::cout << "wrote " << (c.out / "evaluate" / "metrics.json").string() << "\n";
    } else if (*explain) {
      const auto c = resolve_config(f, *explain);
      const auto doc = pdstage::cmd_explain(c);
      for (const auto& [task, t] : doc.at("tasks").items())
        std::cout << task << " max residual " << t.at("max_abs_residual").get<double>() << "\n";
      std::cout << "wrote " << (c.out / "explain").string() << "\n";
    } else if (*embed) {
      const auto c = resolve_config(f, *embed);
      pdstage::cmd_embed(c);
      std::cout << "wrote " << (c.out / "embed").string() << "\n";
    } else if (*synth) {
      auto c = resolve_config(f, *synth);
      pdstage::CohortSpec spec = c.synth.value_or(pdstage::CohortSpec::defaults());
      if (!f.spec.empty()) {
        std::ifstream in(f.spec);
        if (!in) throw pdstage::ConfigError("cannot read spec " + f.spec);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw pdstage::ConfigError(f.spec + ": " + e.what());
        }
        spec = pdstage::cohort_spec_from_json(j);
      }
      if (synth->count("--seed")) spec.seed = f.seed;
      const auto m = pdstage::cmd_synth(spec, c);
      std::cout << "visits " << m.visits << ", complete " << m.complete_visits << "\n"
                << "wrote " << c.out.string() << "\n";
    } else if (*report) {
      const auto path = pdstage::cmd_report(resolve_config(f, *report));
      std::cout << "wrote " << path.string() << "\n";
    }
  } catch (const pdstage::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

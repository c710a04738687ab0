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

#include "pdstage/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "pdstage/csv.hpp"
#include "pdstage/explain.hpp"
#include "pdstage/metrics.hpp"
#include "pdstage/preprocess.hpp"
#include "pdstage/shap.hpp"
#include "pdstage/split.hpp"

namespace pdstage {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig RunConfig::defaults() {
  RunConfig c;
  for (auto k : {ModelKind::kGbt, ModelKind::kLogistic, ModelKind::kKnn, ModelKind::kForest}) c.grids[k] = default_grid(k);
  return c;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return fs::weakly_canonical(path.is_absolute() ? path : base / path);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Task> parse_tasks(const std::vector<std::string>& names) {
  if (names.size() == 1 && names.front() == "all") return all_tasks();
  std::vector<Task> out;
  for (const auto& n : names) out.push_back(parse_task(n));
  if (out.empty()) throw ConfigError("no task selected");
  return out;
}

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
  if (names.size() == 1 && names.front() == "all")
    return {ModelKind::kGbt, ModelKind::kLogistic, ModelKind::kKnn, ModelKind::kForest};
  std::vector<ModelKind> out;
  for (const auto& n : names) out.push_back(parse_model_kind(n));
  if (out.empty()) throw ConfigError("no model selected");
  return out;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

std::vector<std::string> string_list(const json& j) {
  if (j.is_string()) return split_list(j.get<std::string>());
  return j.get<std::vector<std::string>>();
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<std::string> sample_ids(const std::vector<VisitKey>& keys) {
  std::vector<std::string> out;
  for (const auto& k : keys) out.push_back(k.str());
  return out;
}

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (ch == '/' || ch == '\\' || ch == ' ') ch = '_';
  return s;
}

fs::path task_dir(const RunConfig& c, const char* stage, Task t) { return c.out / stage / to_string(t); }

json params_json(const ParamSet& p) {
  json j = json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

void write_confusion(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& names) {
  auto out = open_out(path);
  std::vector<std::string> header{"true_class"};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(out, header);
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row{names[static_cast<std::size_t>(i)]};
    for (Index j = 0; j < m.cols(); ++j) row.push_back(csv::format_number(m(i, j)));
    csv::write_row(out, row);
  }
}

json metrics_json(const Metrics& m, bool binary) {
  json j = to_json(m);
  if (!binary) {
    j["macro_f1"] = j["f1"];
    j.erase("f1");
  }
  return j;
}

json report_json(const MetricReport& r, bool binary) {
  json j = to_json(r);
  if (!binary) {
    j["macro_f1"] = j["f1"];
    j.erase("f1");
  }
  return j;
}

struct TaskSplit {
  HoldoutSplit holdout;
  std::vector<Fold> folds;  // indices into holdout.train
};

TaskSplit make_split(const RunConfig& c, const TaskData& td) {
  const int k = td.spec.num_class();
  const auto names = td.spec.class_names();
  const std::string tag = to_string(td.spec.task);
  TaskSplit s;
  if (c.grouped_split) {
    std::vector<std::string> groups;
    for (const auto& key : td.matrix.keys) groups.push_back(key.subject);
    s.holdout = grouped_holdout(td.y, groups, k, c.holdout_fraction, derive_seed(c.seed, "holdout/" + tag));
    s.folds = grouped_kfold(take(td.y, s.holdout.train), take(groups, s.holdout.train), k, c.folds,
                            derive_seed(c.seed, "kfold/" + tag));
  } else {
    s.holdout = stratified_holdout(td.y, k, c.holdout_fraction, derive_seed(c.seed, "holdout/" + tag), names);
    s.folds = stratified_kfold(take(td.y, s.holdout.train), k, c.folds, derive_seed(c.seed, "kfold/" + tag), names);
  }
  return s;
}

void write_splits(const fs::path& path, const TaskData& td, const TaskSplit& s) {
  std::vector<std::string> partition(td.y.size(), "");
  std::vector<std::string> fold(td.y.size(), "");
  for (Index r : s.holdout.test) partition[static_cast<std::size_t>(r)] = "test";
  for (std::size_t i = 0; i < s.holdout.train.size(); ++i) partition[static_cast<std::size_t>(s.holdout.train[i])] = "train";
  for (std::size_t f = 0; f < s.folds.size(); ++f)
    for (Index v : s.folds[f].validate)
      fold[static_cast<std::size_t>(s.holdout.train[static_cast<std::size_t>(v)])] = std::to_string(f);
  const auto names = td.spec.class_names();
  auto out = open_out(path);
  csv::write_row(out, {"subject", "visit", "label", "partition", "fold"});
  for (std::size_t i = 0; i < td.y.size(); ++i)
    csv::write_row(out, {td.matrix.keys[i].subject, td.matrix.keys[i].visit,
                         names[static_cast<std::size_t>(td.y[i])], partition[i], fold[i]});
}

std::map<VisitKey, std::string> read_partitions(const fs::path& path) {
  const auto t = csv::read(path);
  const auto s = t.column("subject");
  const auto v = t.column("visit");
  const auto p = t.column("partition");
  if (!s || !v || !p) throw DataError(path.string() + ": not a split file");
  std::map<VisitKey, std::string> out;
  for (const auto& r : t.rows) out[{r[*s], r[*v]}] = r[*p];
  return out;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c = RunConfig::defaults();
  check_keys(j, {"schema", "data_dir", "stage_file", "features", "out", "seed", "workers", "tasks", "models", "grids",
                 "folds", "holdout_fraction", "grouped_split", "stage_columns", "explain", "embed", "synth",
                 "tool_version"},
             "config");
  try {
    c.schema = resolve(base_dir, j.value("schema", std::string{}));
    c.data_dir = resolve(base_dir, j.value("data_dir", std::string{}));
    c.stage_file = resolve(base_dir, j.value("stage_file", std::string{}));
    c.features = resolve(base_dir, j.value("features", std::string{}));
    if (j.contains("out")) c.out = resolve(base_dir, j.at("out").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("tasks")) c.tasks = parse_tasks(string_list(j.at("tasks")));
    if (j.contains("models")) c.models = parse_models(string_list(j.at("models")));
    if (j.contains("grids")) {
      check_keys(j.at("grids"), {"gbt", "lr", "knn", "rf"}, "grids");
      for (const auto& [name, g] : j.at("grids").items()) {
        const auto kind = parse_model_kind(name);
        c.grids[kind] = grid_from_json(kind, g);
      }
    }
    c.folds = j.value("folds", c.folds);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    c.grouped_split = j.value("grouped_split", c.grouped_split);
    if (j.contains("stage_columns")) {
      const auto& s = j.at("stage_columns");
      check_keys(s, {"subject", "visit", "stage", "cohort", "healthy_values"}, "stage_columns");
      c.stage_columns.subject = s.value("subject", c.stage_columns.subject);
      c.stage_columns.visit = s.value("visit", c.stage_columns.visit);
      c.stage_columns.stage = s.value("stage", c.stage_columns.stage);
      c.stage_columns.cohort = s.value("cohort", c.stage_columns.cohort);
      c.stage_columns.healthy_values = s.value("healthy_values", c.stage_columns.healthy_values);
    }
    if (j.contains("explain")) {
      const auto& e = j.at("explain");
      check_keys(e, {"top_k", "waterfall_top_n", "waterfall_per_class", "samples", "partition"}, "explain");
      c.explain.top_k = e.value("top_k", c.explain.top_k);
      c.explain.waterfall_top_n = e.value("waterfall_top_n", c.explain.waterfall_top_n);
      c.explain.waterfall_per_class = e.value("waterfall_per_class", c.explain.waterfall_per_class);
      c.explain.samples = e.value("samples", c.explain.samples);
      c.explain.partition = e.value("partition", c.explain.partition);
    }
    if (j.contains("embed")) {
      const auto& e = j.at("embed");
      check_keys(e, {"perplexity", "iterations", "learning_rate", "exaggeration", "exaggeration_iterations",
                     "initial_momentum", "final_momentum", "init_sd", "kl_every", "max_points", "input"},
                 "embed");
      auto& t = c.embed.tsne;
      t.perplexity = e.value("perplexity", t.perplexity);
      t.iterations = e.value("iterations", t.iterations);
      t.learning_rate = e.value("learning_rate", t.learning_rate);
      t.exaggeration = e.value("exaggeration", t.exaggeration);
      t.exaggeration_iterations = e.value("exaggeration_iterations", t.exaggeration_iterations);
      t.initial_momentum = e.value("initial_momentum", t.initial_momentum);
      t.final_momentum = e.value("final_momentum", t.final_momentum);
      t.init_sd = e.value("init_sd", t.init_sd);
      t.kl_every = e.value("kl_every", t.kl_every);
      c.embed.max_points = e.value("max_points", c.embed.max_points);
      c.embed.input = e.value("input", c.embed.input);
    }
    if (j.contains("synth")) c.synth = cohort_spec_from_json(j.at("synth"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.workers < 1) throw ConfigError("config: workers must be at least 1");
  if (c.folds < 2) throw ConfigError("config: folds must be at least 2");
  if (!(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0)) throw ConfigError("config: holdout_fraction must be in (0, 1)");
  if (c.explain.partition != "test" && c.explain.partition != "train" && c.explain.partition != "all")
    throw ConfigError("config: explain.partition must be test, train or all");
  if (c.embed.input != "features" && c.embed.input != "margin")
    throw ConfigError("config: embed.input must be features or margin");
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j, fs::absolute(path).parent_path());
}

json to_json(const RunConfig& c) {
  json tasks = json::array();
  for (auto t : c.tasks) tasks.push_back(to_string(t));
  json models = json::array();
  for (auto m : c.models) models.push_back(to_string(m));
  json grids = json::object();
  for (const auto& [k, g] : c.grids) grids[to_string(k)] = to_json(g);
  const auto& t = c.embed.tsne;
  json j = {{"tool_version", kToolVersion},
            {"schema", c.schema.string()},
            {"data_dir", c.data_dir.string()},
            {"stage_file", c.stage_file.string()},
            {"features", c.features.string()},
            {"out", c.out.string()},
            {"seed", c.seed},
            {"workers", c.workers},
            {"tasks", tasks},
            {"models", models},
            {"grids", grids},
            {"folds", c.folds},
            {"holdout_fraction", c.holdout_fraction},
            {"grouped_split", c.grouped_split},
            {"stage_columns",
             {{"subject", c.stage_columns.subject},
              {"visit", c.stage_columns.visit},
              {"stage", c.stage_columns.stage},
              {"cohort", c.stage_columns.cohort},
              {"healthy_values", c.stage_columns.healthy_values}}},
            {"explain",
             {{"top_k", c.explain.top_k},
              {"waterfall_top_n", c.explain.waterfall_top_n},
              {"waterfall_per_class", c.explain.waterfall_per_class},
              {"samples", c.explain.samples},
              {"partition", c.explain.partition}}},
            {"embed",
             {{"perplexity", t.perplexity},
              {"iterations", t.iterations},
              {"learning_rate", t.learning_rate},
              {"exaggeration", t.exaggeration},
              {"exaggeration_iterations", t.exaggeration_iterations},
              {"initial_momentum", t.initial_momentum},
              {"final_momentum", t.final_momentum},
              {"init_sd", t.init_sd},
              {"kl_every", t.kl_every},
              {"max_points", c.embed.max_points},
              {"input", c.embed.input}}}};
  if (c.synth) j["synth"] = to_json(*c.synth);
  return j;
}

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.task) c.tasks = parse_tasks(split_list(*o.task));
  if (o.model) c.models = parse_models(split_list(*o.model));
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = fs::weakly_canonical(fs::absolute(*o.out));
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers must be at least 1");
    c.workers = *o.workers;
  }
  if (o.grouped_split) c.grouped_split = *o.grouped_split;
}

void write_resolved_config(const RunConfig& c) { write_json(c.out / "resolved_config.json", to_json(c)); }

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

SchemaSet load_run_schema(const RunConfig& c) {
  auto s = load_schema(c.schema.empty() ? default_schema_path() : c.schema);
  s.validate();
  return s;
}

IngestOutcome cmd_ingest(const RunConfig& c) {
  if (c.data_dir.empty()) throw ConfigError("ingest: data_dir is not set");
  if (!fs::is_directory(c.data_dir)) throw DataError("ingest: data directory " + c.data_dir.string() + " does not exist");
  const auto schema = load_run_schema(c);
  const fs::path stages = c.stage_file.empty() ? c.data_dir / kStageFile : c.stage_file;
  IngestOutcome o;
  o.result = ingest_directory(c.data_dir, schema, stages, c.stage_columns);
  o.matrix_path = c.out / "features.csv";
  fs::create_directories(c.out);
  write_feature_matrix(o.matrix_path, o.result.matrix);

  const auto& r = o.result.report;
  json stage_counts = json::object();
  for (const auto& [code, n] : r.stage_counts) stage_counts[std::to_string(code)] = n;
  json classes = json::object();
  for (const auto& [s, n] : r.class_counts) classes[to_string(s)] = n;
  json instruments = json::array();
  for (const auto& inst : schema.instruments)
    instruments.push_back({{"instrument", inst.name},
                           {"items", inst.items.size() + inst.excluded.size()},
                           {"features", inst.derived.size()},
                           {"rows", r.instrument_rows.count(inst.name) ? r.instrument_rows.at(inst.name) : 0}});
  write_json(c.out / "ingest_report.json",
             {{"instruments", instruments},
              {"feature_count", o.result.matrix.feature_order.size()},
              {"item_count", schema.item_count()},
              {"joined_rows", r.joined_rows},
              {"dropped_incomplete", r.dropped_incomplete},
              {"excluded_unclear", r.excluded_unclear},
              {"excluded_other", r.excluded_other},
              {"stage_counts", stage_counts},
              {"class_counts", classes},
              {"final_rows", r.final_rows},
              {"matrix_digest", file_digest(o.matrix_path)}});
  write_resolved_config(c);
  return o;
}

FeatureMatrix load_features(const RunConfig& c) {
  if (!c.features.empty()) return read_feature_matrix(c.features);
  if (fs::exists(c.out / "features.csv")) return read_feature_matrix(c.out / "features.csv");
  if (!c.data_dir.empty()) return cmd_ingest(c).result.matrix;
  throw ConfigError("no feature matrix: set 'features' or 'data_dir', or run ingest first");
}

json cmd_evaluate(const RunConfig& c) {
  const FeatureMatrix fm = load_features(c);
  json tasks = json::object();
  for (Task task : c.tasks) {
    const TaskData td = select_task(fm, task_spec(task));
    const int k = td.spec.num_class();
    const bool binary = td.spec.binary();
    const auto names = td.spec.class_names();
    const TaskSplit split = make_split(c, td);
    const fs::path dir = task_dir(c, "evaluate", task);
    write_splits(dir / "splits.csv", td, split);

    const Matrix train_x = take_rows(td.matrix.values, split.holdout.train);
    const Labels train_y = take(td.y, split.holdout.train);
    const Matrix test_x = take_rows(td.matrix.values, split.holdout.test);
    const Labels test_y = take(td.y, split.holdout.test);
    const auto scaler = fit_standardizer(train_x, td.matrix.feature_order, "train");
    const Matrix train_z = apply_standardizer(scaler, train_x);
    const Matrix test_z = apply_standardizer(scaler, test_x);
    write_json(dir / "standardizer.json", to_json(scaler));

    json models = json::object();
    for (ModelKind kind : c.models) {
      const std::string mname = to_string(kind);
      const auto grid_it = c.grids.find(kind);
      const GridSpec grid = grid_it != c.grids.end() ? grid_it->second : default_grid(kind);
      const GridResult gr = grid_search(train_x, train_y, k, grid, split.folds,
                                        derive_seed(c.seed, "grid/" + td.spec.name() + "/" + mname), c.workers);
      const auto& best = gr.best();
      const Model model = train_model(kind, train_z, train_y, k, best.params,
                                      derive_seed(c.seed, "final/" + td.spec.name() + "/" + mname));
      const Matrix proba = predict_proba(model, test_z);
      const Labels pred = argmax_labels(proba);
      const Metrics holdout = compute_metrics(test_y, pred, proba, k);

      const fs::path mdir = dir / mname;
      write_confusion(mdir / "confusion_oof.csv", oof_confusion(train_y, best.cv.oof_pred, k), names);
      write_confusion(mdir / "confusion_holdout.csv", row_normalize(confusion_counts(test_y, pred, k)), names);
      json doc = model_to_json(model);
      doc["params"] = params_json(best.params);
      doc["feature_order"] = td.matrix.feature_order;
      doc["classes"] = names;
      write_json(mdir / "model.json", doc);

      json grid_rows = json::array();
      for (const auto& cs : gr.configs) {
        json row = {{"params", params_json(cs.params)}, {"failed", cs.failed}};
        if (cs.failed) {
          row["error"] = cs.error;
        } else {
          row["mean_score"] = cs.mean_score;
          row["fold_scores"] = cs.fold_scores;
        }
        grid_rows.push_back(row);
      }
      models[mname] = {{"best_params", params_json(best.params)},
                       {"cv", report_json(summarize(best.cv.fold_metrics), binary)},
                       {"holdout", metrics_json(holdout, binary)},
                       {"grid", grid_rows}};
    }
    json counts = json::object();
    for (int cls = 0; cls < k; ++cls)
      counts[names[static_cast<std::size_t>(cls)]] = std::count(td.y.begin(), td.y.end(), cls);
    tasks[td.spec.name()] = {{"classes", names},
                             {"positive", binary ? json(names[1]) : json(nullptr)},
                             {"selection_metric", binary ? "f1" : "macro_f1"},
                             {"class_counts", counts},
                             {"n_train", split.holdout.train.size()},
                             {"n_test", split.holdout.test.size()},
                             {"folds", split.folds.size()},
                             {"grouped_split", c.grouped_split},
                             {"models", models}};
  }
  json doc = {{"format", "pdstage-metrics"},
              {"version", 1},
              {"tool_version", kToolVersion},
              {"seed", c.seed},
              {"averaging", "macro one-vs-rest for multiclass ROC-AUC and PR-AUC"},
              {"tasks", tasks}};
  write_json(c.out / "evaluate" / "metrics.json", doc);
  write_resolved_config(c);
  return doc;
}

namespace {

struct LoadedBooster {
  TreeEnsemble ensemble;
  Standardizer<double> scaler;
  std::map<VisitKey, std::string> partition;
};

LoadedBooster load_booster(const RunConfig& c, Task task) {
  const fs::path dir = task_dir(c, "evaluate", task);
  const fs::path model_path = dir / to_string(ModelKind::kGbt) / "model.json";
  if (!fs::exists(model_path))
    throw ConfigError("no boosted model for task " + to_string(task) + " at " + model_path.string() +
                      "; run evaluate with the gbt model first");
  LoadedBooster b;
  const Model m = model_from_json(read_json(model_path));
  b.ensemble = std::get<TreeEnsemble>(m);
  b.scaler = standardizer_from_json(read_json(dir / "standardizer.json"));
  b.partition = read_partitions(dir / "splits.csv");
  return b;
}

std::vector<Index> partition_rows(const TaskData& td, const std::map<VisitKey, std::string>& partition,
                                  const std::string& which) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < td.matrix.keys.size(); ++i) {
    const auto it = partition.find(td.matrix.keys[i]);
    if (it == partition.end())
      throw DataError("split file does not cover visit " + td.matrix.keys[i].str() + "; rerun evaluate");
    if (which == "all" || it->second == which) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

}  // namespace

json cmd_explain(const RunConfig& c) {
  const FeatureMatrix fm = load_features(c);
  const auto schema = load_run_schema(c);
  json report = json::object();
  std::vector<GlobalSummary> binary_summaries;
  std::optional<std::size_t> heatmap_rows;
  for (Task task : c.tasks) {
    const TaskData td = select_task(fm, task_spec(task));
    const LoadedBooster b = load_booster(c, task);
    const auto rows = partition_rows(td, b.partition, c.explain.partition);
    if (rows.empty()) throw DataError("explain: partition '" + c.explain.partition + "' is empty");
    const FeatureMatrix part = td.matrix.subset(rows);
    const Labels y = take(td.y, rows);
    const Matrix z = apply_standardizer(b.scaler, part).values;
    const auto batches = explain_rows(b.ensemble, z, c.workers);
    const auto ids = sample_ids(part.keys);
    const fs::path dir = task_dir(c, "explain", task);

    {
      auto out = open_out(dir / "attributions.csv");
      write_attributions_csv(out, ids, part.feature_order, batches);
    }
    const Matrix phi = true_class_phi(batches, y);
    const auto summary = global_class_summary(phi, y, td.spec.class_names(), part.feature_order, c.explain.top_k,
                                              td.spec.name());
    {
      auto out = open_out(dir / "summary.tsv");
      write_summary_tsv(out, summary, &schema);
    }
    if (td.spec.binary()) binary_summaries.push_back(summary);

    double worst = 0.0;
    for (const auto& batch : batches)
      for (Index i = 0; i < batch.phi.rows(); ++i)
        worst = std::max(worst, std::abs(batch.base_value + batch.phi.row(i).sum() - batch.margin(i)));

    // waterfall samples: the first per_class visits of each class, then named ones
    std::vector<std::size_t> chosen;
    std::vector<std::size_t> seen(static_cast<std::size_t>(td.spec.num_class()), 0);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (seen[static_cast<std::size_t>(y[i])]++ < c.explain.waterfall_per_class) chosen.push_back(i);
    for (const auto& id : c.explain.samples) {
      const auto it = std::find(ids.begin(), ids.end(), id);
      if (it == ids.end())
        throw ConfigError("explain: sample " + id + " is not in the " + c.explain.partition + " partition of " +
                          td.spec.name());
      chosen.push_back(static_cast<std::size_t>(it - ids.begin()));
    }
    json waterfalls = json::array();
    for (std::size_t i : chosen) {
      const std::size_t output = batches.size() == 1 ? 0 : static_cast<std::size_t>(y[i]);
      AttributionVector a;
      a.output = static_cast<int>(output);
      a.sample = static_cast<Index>(i);
      a.base_value = batches[output].base_value;
      const auto row = batches[output].phi.row(static_cast<Index>(i));
      a.phi.assign(row.data(), row.data() + row.size());
      const auto w = local_waterfall(a, part.feature_order, c.explain.waterfall_top_n);
      const fs::path path = dir / ("waterfall_" + safe_name(ids[i]) + ".csv");
      auto out = open_out(path);
      write_waterfall_csv(out, ids[i], w);
      waterfalls.push_back({{"sample", ids[i]}, {"output", output}, {"file", path.filename().string()}});
    }
    json bases = json::array();
    for (const auto& batch : batches) bases.push_back(batch.base_value);
    report[td.spec.name()] = {{"partition", c.explain.partition},
                              {"samples", rows.size()},
                              {"base_values", bases},
                              {"max_abs_residual", worst},
                              {"top_features", summary.top_features()},
                              {"waterfalls", waterfalls}};
  }
  if (binary_summaries.size() == 3) {
    const auto h = cross_task_heatmap(binary_summaries, c.explain.top_k);
    auto out = open_out(c.out / "explain" / "heatmap.tsv");
    write_heatmap_tsv(out, h, &schema);
    heatmap_rows = h.rows.size();
  }
  json doc = {{"method", "path-dependent TreeSHAP (cover weighted), margin space"},
              {"multiclass_summary", "phi of each sample's true class"},
              {"tasks", report}};
  if (heatmap_rows) doc["heatmap_rows"] = *heatmap_rows;
  write_json(c.out / "explain" / "explain_report.json", doc);
  write_resolved_config(c);
  return doc;
}

json cmd_embed(const RunConfig& c) {
  const FeatureMatrix fm = load_features(c);
  json out_doc = json::object();
  for (Task task : c.tasks) {
    const TaskData td = select_task(fm, task_spec(task));
    const int k = td.spec.num_class();
    // deterministic stratified subsample when the task is larger than max_points
    std::vector<Index> rows;
    const std::size_t n = td.y.size();
    if (c.embed.max_points == 0 || n <= c.embed.max_points) {
      for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<Index>(i));
    } else {
      std::mt19937_64 rng(derive_seed(c.seed, "embed-sample/" + td.spec.name()));
      const double frac = static_cast<double>(c.embed.max_points) / static_cast<double>(n);
      for (int cls = 0; cls < k; ++cls) {
        std::vector<Index> members;
        for (std::size_t i = 0; i < n; ++i)
          if (td.y[i] == cls) members.push_back(static_cast<Index>(i));
        std::shuffle(members.begin(), members.end(), rng);
        const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(members.size()))));
        members.resize(std::min(keep, members.size()));
        rows.insert(rows.end(), members.begin(), members.end());
      }
      std::sort(rows.begin(), rows.end());
    }
    const FeatureMatrix part = td.matrix.subset(rows);
    const Labels y = take(td.y, rows);
    Matrix input;
    if (c.embed.input == "margin") {
      const LoadedBooster b = load_booster(c, task);
      input = b.ensemble.margin(apply_standardizer(b.scaler, part).values);
    } else {
      const auto scaler = fit_standardizer(part.values, part.feature_order, "embed");
      input = apply_standardizer(scaler, part.values);
    }
    TsneConfig t = c.embed.tsne;
    t.seed = derive_seed(c.seed, "embed/" + td.spec.name());
    const auto res = tsne_embed(input, t);

    const fs::path path = c.out / "embed" / (td.spec.name() + ".csv");
    auto out = open_out(path);
    out << "# tool_version=" << kToolVersion << "\n# task=" << td.spec.name() << "\n# input=" << c.embed.input
        << "\n# perplexity=" << csv::format_number(t.perplexity) << "\n# iterations=" << t.iterations
        << "\n# learning_rate=" << csv::format_number(t.learning_rate)
        << "\n# exaggeration=" << csv::format_number(t.exaggeration) << "\n# exaggeration_iterations="
        << t.exaggeration_iterations << "\n# init=gaussian sd " << csv::format_number(t.init_sd) << " seed " << t.seed
        << "\n";
    csv::write_row(out, {"sample", "x", "y", "label"});
    const auto names = td.spec.class_names();
    for (std::size_t i = 0; i < rows.size(); ++i)
      csv::write_row(out, {part.keys[i].str(), csv::format_number(res.embedding(static_cast<Index>(i), 0)),
                           csv::format_number(res.embedding(static_cast<Index>(i), 1)),
                           names[static_cast<std::size_t>(y[i])]});
    out_doc[td.spec.name()] = {{"points", rows.size()},
                               {"final_kl", res.kl_trace.empty() ? json(nullptr) : json(res.kl_trace.back().second)},
                               {"file", path.filename().string()}};
  }
  write_json(c.out / "embed" / "embed_report.json", out_doc);
  write_resolved_config(c);
  return out_doc;
}

CohortManifest cmd_synth(const CohortSpec& spec, const RunConfig& c) {
  const auto schema = load_run_schema(c);
  RunConfig snapshot = c;
  snapshot.synth = spec;
  const auto m = generate_cohort(spec, schema, c.out);
  write_resolved_config(snapshot);
  return m;
}

fs::path cmd_report(const RunConfig& c) {
  std::ostringstream md;
  md << "# Run report\n\n";
  md << "tool version " << kToolVersion << ", seed " << c.seed << "\n\n";
  if (fs::exists(c.out / "ingest_report.json")) {
    const json r = read_json(c.out / "ingest_report.json");
    md << "## Cohort accounting\n\n";
    md << "| step | rows |\n|---|---|\n";
    md << "| joined visits | " << r.at("joined_rows") << " |\n";
    md << "| after dropping incomplete | " << r.at("joined_rows").get<std::size_t>() - r.at("dropped_incomplete").get<std::size_t>() << " |\n";
    md << "| final labelled | " << r.at("final_rows") << " |\n\n";
    md << "| class | visits |\n|---|---|\n";
    for (const auto& [k, v] : r.at("class_counts").items()) md << "| " << k << " | " << v << " |\n";
    md << "\nfeatures: " << r.at("feature_count") << " derived from " << r.at("item_count") << " items\n\n";
  }
  if (fs::exists(c.out / "evaluate" / "metrics.json")) {
    const json m = read_json(c.out / "evaluate" / "metrics.json");
    md << "## Cross-validation (mean ± SD over folds)\n\n";
    for (const auto& [task, t] : m.at("tasks").items()) {
      const std::string f1 = t.at("selection_metric").get<std::string>();
      md << "### " << task << "\n\n| model | accuracy | " << f1 << " | roc_auc | pr_auc | mcc | holdout accuracy | holdout "
         << f1 << " |\n|---|---|---|---|---|---|---|---|\n";
      for (const auto& [model, r] : t.at("models").items()) {
        md << "| " << model;
        for (const char* key : {"accuracy", f1.c_str(), "roc_auc", "pr_auc", "mcc"}) {
          const auto& s = r.at("cv").at(key);
          md << " | " << format_mean_sd({s.at("mean").get<double>(), s.at("sd").get<double>(), {}});
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, " | %.4f | %.4f |\n", r.at("holdout").at("accuracy").get<double>(),
                      r.at("holdout").at(f1).get<double>());
        md << buf;
      }
      md << "\n";
    }
  }
  if (fs::exists(c.out / "explain" / "explain_report.json")) {
    const json e = read_json(c.out / "explain" / "explain_report.json");
    md << "## Attribution\n\n" << e.at("method").get<std::string>() << "\n\n";
    for (const auto& [task, t] : e.at("tasks").items()) {
      md << "- " << task << ": max |base + sum(phi) - margin| = " << t.at("max_abs_residual").get<double>()
         << "; top features:";
      for (const auto& f : t.at("top_features")) md << ' ' << f.get<std::string>();
      md << "\n";
    }
    if (e.contains("heatmap_rows")) md << "\ncross-task heatmap rows: " << e.at("heatmap_rows") << "\n";
  }
  const fs::path path = c.out / "report.md";
  auto out = open_out(path);
  out << md.str();
  return path;
}

}  // namespace pdstage

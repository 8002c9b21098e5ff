#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "flowforge/chi_square.hpp"
#include "flowforge/classifier.hpp"
#include "flowforge/csv.hpp"
#include "flowforge/metrics.hpp"
#include "flowforge/preprocess.hpp"
#include "flowforge/synthetic.hpp"

namespace flowforge {

// seed streams derived from the experiment seed
inline constexpr uint64_t kSamplingStream = 1;
inline constexpr uint64_t kSplitStream = 2;
inline constexpr uint64_t kForestStream = 3;
inline constexpr uint64_t kFoldStream = 4;

struct SplitSpec {
  enum class Mode { holdout, kfold };
  Mode mode = Mode::holdout;
  double train_fraction = 0.7;
  size_t k = 10;
  bool stratified = true;
};

struct ExperimentConfig {
  std::string input;      // single CSV; or
  std::string manifest;   // shard manifest file / glob
  std::string schema_path;
  TaskVariant task = TaskVariant::binary;
  ClassifierKind classifier = ClassifierKind::random_forest;
  int feature_k = kSelectAll;  // 5, 10, or kSelectAll
  std::optional<SamplingPlan> plan;
  bool full_data = false;
  bool force_selection = false;
  uint64_t seed = 0;
  SplitSpec split;
  size_t partitions = 8;
  unsigned workers = 0;
  int bins = 32;
  TreeParams tree;
  ForestParams forest;
  double nb_smoothing = 1.0;
  std::string out_dir;

  void validate() const {
    if (input.empty() && manifest.empty()) {
      throw ConfigError("experiment needs an input CSV or a shard manifest");
    }
    if (schema_path.empty()) throw ConfigError("experiment needs a schema file");
    if (full_data && feature_k != kSelectAll && !force_selection) {
      throw ConfigError("full-data mode uses all features; pass --force-selection "
                        "to deviate from that protocol");
    }
    if (feature_k != kSelectAll && feature_k <= 0) {
      throw ConfigError("feature_k must be positive or \"all\"");
    }
  }
};

inline int feature_k_from_string(const std::string& s) {
  if (s == "all" || s == "ALL") return kSelectAll;
  try {
    return std::stoi(s);
  } catch (...) {
    throw ConfigError("feature_k must be a positive integer or \"all\"");
  }
}

inline std::string feature_k_to_string(int k) {
  return k == kSelectAll ? "all" : std::to_string(k);
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.input = j.value("input", "");
  c.manifest = j.value("manifest", "");
  c.schema_path = j.value("schema", "");
  if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
  if (j.contains("classifier")) {
    c.classifier = classifier_from_string(j.at("classifier").get<std::string>());
  }
  if (j.contains("feature_k")) {
    const auto& fk = j.at("feature_k");
    c.feature_k = fk.is_string() ? feature_k_from_string(fk.get<std::string>())
                                 : fk.get<int>();
  }
  if (j.contains("plan") && !j.at("plan").is_null()) {
    c.plan = SamplingPlan::from_json(j.at("plan"));
  }
  c.full_data = j.value("full_data", false);
  c.force_selection = j.value("force_selection", false);
  c.seed = j.value("seed", uint64_t{0});
  if (j.contains("split")) {
    const auto& js = j.at("split");
    const std::string mode = js.value("mode", "holdout");
    if (mode == "holdout") {
      c.split.mode = SplitSpec::Mode::holdout;
    } else if (mode == "kfold") {
      c.split.mode = SplitSpec::Mode::kfold;
    } else {
      throw ConfigError("split mode must be holdout or kfold");
    }
    c.split.train_fraction = js.value("train_fraction", 0.7);
    c.split.k = js.value("k", size_t{10});
    c.split.stratified = js.value("stratified", true);
  }
  c.partitions = j.value("partitions", size_t{8});
  c.workers = j.value("workers", 0u);
  c.bins = j.value("bins", 32);
  c.tree.max_bins = c.bins;  // "tree.max_bins" may still override
  if (j.contains("tree")) {
    const auto& jt = j.at("tree");
    c.tree.max_depth = jt.value("max_depth", c.tree.max_depth);
    c.tree.max_bins = jt.value("max_bins", c.tree.max_bins);
    c.tree.min_instances_per_node =
        jt.value("min_instances_per_node", c.tree.min_instances_per_node);
    c.tree.min_info_gain = jt.value("min_info_gain", c.tree.min_info_gain);
  }
  if (j.contains("forest")) {
    const auto& jf = j.at("forest");
    c.forest.num_trees = jf.value("num_trees", c.forest.num_trees);
    c.forest.bootstrap = jf.value("bootstrap", c.forest.bootstrap);
    c.forest.feature_subset_size =
        jf.value("feature_subset_size", c.forest.feature_subset_size);
  }
  c.nb_smoothing = j.value("nb_smoothing", 1.0);
  c.out_dir = j.value("out_dir", "");

  // environment override for reproducibility experiments
  if (const char* env = std::getenv("FLOWFORGE_SEED")) {
    c.seed = std::strtoull(env, nullptr, 10);
  }
  c.forest.tree = c.tree;
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["input"] = c.input;
  j["manifest"] = c.manifest;
  j["schema"] = c.schema_path;
  j["task"] = to_string(c.task);
  j["classifier"] = to_string(c.classifier);
  j["feature_k"] = feature_k_to_string(c.feature_k);
  j["plan"] = c.plan ? nlohmann::ordered_json(c.plan->to_json()) : nlohmann::ordered_json();
  j["full_data"] = c.full_data;
  j["force_selection"] = c.force_selection;
  j["seed"] = c.seed;
  j["split"] = {{"mode", c.split.mode == SplitSpec::Mode::holdout ? "holdout" : "kfold"},
                {"train_fraction", c.split.train_fraction},
                {"k", c.split.k},
                {"stratified", c.split.stratified}};
  j["partitions"] = c.partitions;
  j["workers"] = c.workers;
  j["bins"] = c.bins;
  j["tree"] = {{"max_depth", c.tree.max_depth},
               {"max_bins", c.tree.max_bins},
               {"min_instances_per_node", c.tree.min_instances_per_node},
               {"min_info_gain", c.tree.min_info_gain}};
  j["forest"] = {{"num_trees", c.forest.num_trees},
                 {"bootstrap", c.forest.bootstrap},
                 {"feature_subset_size", c.forest.feature_subset_size}};
  j["nb_smoothing"] = c.nb_smoothing;
  return j;
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

class StageTimer {
 public:
  void record(const std::string& stage, double seconds) { seconds_[stage] += seconds; }

  template <typename Fn>
  auto time(const std::string& stage, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(stage, elapsed(t0));
    } else {
      auto out = fn();
      record(stage, elapsed(t0));
      return out;
    }
  }

  const std::map<std::string, double>& seconds() const { return seconds_; }

 private:
  static double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::map<std::string, double> seconds_;
};

// Shared pipeline prefix: ingest -> index strings -> dedup -> drop missing
// -> undersample. Identical for every cell of a matrix run.
struct PreparedData {
  FlowTable table;
  size_t rows_ingested = 0;
  size_t duplicates_removed = 0;
  MissingReport missing;
  std::map<std::string, int64_t> sampling_kept;
  std::vector<IndexMap> index_maps;
  StageTimer timer;
};

inline PreparedData prepare_input(const ExperimentConfig& config) {
  config.validate();
  const TableSchema schema = load_schema(config.schema_path);
  schema.validate();

  PreparedData prep;
  prep.table = prep.timer.time("ingest", [&] {
    if (!config.manifest.empty()) {
      return union_shards(load_manifest(config.manifest), schema);
    }
    return read_csv(config.input, schema);
  });
  prep.rows_ingested = prep.table.row_count();

  prep.timer.time("index_strings", [&] {
    auto res = index_strings(prep.table, default_index_columns(prep.table));
    prep.table = std::move(res.table);
    prep.index_maps = std::move(res.maps);
  });

  prep.timer.time("drop_duplicates", [&] {
    auto res = drop_duplicates(prep.table);
    prep.table = std::move(res.table);
    prep.duplicates_removed = res.removed_count;
  });

  prep.timer.time("drop_missing", [&] {
    auto res = drop_missing(prep.table);
    prep.table = std::move(res.table);
    prep.missing = std::move(res.report);
  });

  if (!config.full_data && config.plan) {
    prep.timer.time("undersample", [&] {
      SamplingPlan plan = *config.plan;
      plan.seed = mix_seed(config.seed, kSamplingStream) ^ plan.seed;
      auto res = undersample(prep.table, plan);
      prep.table = std::move(res.table);
      prep.sampling_kept = std::move(res.kept_per_class);
    });
  }
  return prep;
}

struct RunReport {
  ExperimentConfig config;
  size_t rows_ingested = 0;
  size_t duplicates_removed = 0;
  MissingReport missing;
  std::map<std::string, int64_t> sampling_kept;
  std::vector<std::string> class_names;
  ChiSqRanking ranking;
  std::vector<std::string> selected_features;
  MetricsReport metrics;                      // holdout mode
  std::optional<CrossValidationReport> cv;    // kfold mode
  std::map<std::string, double> stage_seconds;

  // timings are excluded from the metrics view so reruns are byte-identical
  nlohmann::ordered_json metrics_json() const {
    nlohmann::ordered_json j;
    j["task"] = to_string(config.task);
    j["classifier"] = to_string(config.classifier);
    j["feature_k"] = feature_k_to_string(config.feature_k);
    j["seed"] = config.seed;
    j["classes"] = class_names;
    j["selected_features"] = selected_features;
    if (cv) {
      j["cross_validation"] = cv->to_json();
    } else {
      j["metrics"] = metrics.to_json();
    }
    return j;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["config"] = config_to_json(config);
    j["rows_ingested"] = rows_ingested;
    j["duplicates_removed"] = duplicates_removed;
    j["missing_removed"] = missing_report_to_json(missing);
    nlohmann::ordered_json sampling = nlohmann::ordered_json::object();
    for (const auto& [cls, n] : sampling_kept) sampling[cls] = n;
    j["sampling_kept"] = std::move(sampling);
    j["chi2_ranking"] = ranking.to_json();
    j["result"] = metrics_json();
    nlohmann::ordered_json timings = nlohmann::ordered_json::object();
    for (const auto& [stage, secs] : stage_seconds) timings[stage] = secs;
    j["stage_seconds"] = std::move(timings);
    return j;
  }
};

namespace detail {

inline std::vector<std::string> feature_names(const FlowTable& t) {
  std::vector<std::string> names;
  for (size_t col : t.feature_columns()) names.push_back(t.schema().columns[col].name);
  return names;
}

// normalize (fit on train) -> select -> train; returns the trained model
// with its normalization baked in.
struct FitResult {
  ClassifierModel model;
  ChiSqRanking ranking;
};

inline FitResult fit_pipeline(const FlowTable& train, const LabelTask& task,
                              const ExperimentConfig& config, StageTimer* timer) {
  const auto features = feature_names(train);
  auto norm = min_max_normalize(train, features);

  FitResult out;
  std::vector<std::string> selected = features;
  const bool select = !config.full_data || config.force_selection;
  if (select) {
    auto sel = select_top_k(norm.table, kTargetColumn, config.feature_k, config.bins);
    out.ranking = std::move(sel.ranking);
    selected = std::move(sel.selected);
  }

  const ExecConfig exec{config.partitions, config.workers};
  auto train_model = [&]() -> ClassifierModel {
    ClassifierModel cm;
    switch (config.classifier) {
      case ClassifierKind::decision_tree:
        cm.model = train_decision_tree(norm.table, kTargetColumn, config.tree, exec,
                                       selected);
        break;
      case ClassifierKind::random_forest: {
        ForestParams fp = config.forest;
        fp.tree = config.tree;
        fp.seed = mix_seed(config.seed, kForestStream);
        cm.model = train_random_forest(norm.table, kTargetColumn, fp, exec, selected);
        break;
      }
      case ClassifierKind::naive_bayes:
        cm.model = train_naive_bayes(norm.table, kTargetColumn, selected,
                                     config.nb_smoothing);
        break;
    }
    cm.features = selected;
    cm.class_names = task.class_names;
    NormalizationParams np;
    for (const auto& f : selected) np.by_column[f] = norm.params.by_column.at(f);
    cm.normalization = std::move(np);
    return cm;
  };
  out.model = timer ? timer->time("train", train_model) : train_model();
  return out;
}

}  // namespace detail

/// One experiment cell on already-prepared data: derive labels, split,
/// normalize on train only, select features, train, evaluate.
inline RunReport run_cell(const PreparedData& prep, const ExperimentConfig& config) {
  RunReport report;
  report.config = config;
  report.rows_ingested = prep.rows_ingested;
  report.duplicates_removed = prep.duplicates_removed;
  report.missing = prep.missing;
  report.sampling_kept = prep.sampling_kept;
  StageTimer timer;

  LabelTask task{config.task, {}};
  const FlowTable labeled = timer.time("derive_labels", [&] {
    LabelTask t{config.task, {}};
    FlowTable out = derive_labels(prep.table, t);
    task = std::move(t);
    return out;
  });
  report.class_names = task.class_names;

  if (config.split.mode == SplitSpec::Mode::holdout) {
    auto split = timer.time("split", [&] {
      return split_train_test(labeled, config.split.train_fraction,
                              mix_seed(config.seed, kSplitStream),
                              config.split.stratified);
    });
    auto fit = detail::fit_pipeline(split.train, task, config, &timer);
    report.ranking = std::move(fit.ranking);
    report.selected_features = fit.model.features;
    report.metrics = timer.time("evaluate", [&] {
      return evaluate_model(fit.model, split.test, task);
    });
  } else {
    const FoldAssignment folds =
        make_folds(labeled, config.split.k, mix_seed(config.seed, kFoldStream),
                   config.split.stratified);
    report.cv = timer.time("cross_validate", [&] {
      return cross_validate(labeled, task, folds, [&](const FlowTable& train) {
        return detail::fit_pipeline(train, task, config, nullptr).model;
      });
    });
    // informational ranking over the full prepared table
    if (!config.full_data || config.force_selection) {
      auto norm = min_max_normalize(labeled, detail::feature_names(labeled));
      report.ranking =
          select_top_k(norm.table, kTargetColumn, config.feature_k, config.bins).ranking;
    }
  }

  report.metrics.task = to_string(config.task);
  report.metrics.classifier = to_string(config.classifier);
  report.metrics.feature_k = feature_k_to_string(config.feature_k);
  report.metrics.seed = config.seed;
  if (report.cv) {
    for (auto& f : report.cv->folds) {
      f.feature_k = feature_k_to_string(config.feature_k);
      f.seed = config.seed;
    }
  }
  for (const auto& [stage, secs] : prep.timer.seconds()) {
    report.stage_seconds[stage] = secs;
  }
  for (const auto& [stage, secs] : timer.seconds()) report.stage_seconds[stage] = secs;
  return report;
}

/// Full pipeline for a single experiment configuration.
inline RunReport run_experiment(const ExperimentConfig& config) {
  PreparedData prep = prepare_input(config);
  return run_cell(prep, config);
}

// ---------------------------------------------------------------------------
// Experiment matrices
// ---------------------------------------------------------------------------

struct MatrixCell {
  TaskVariant task;
  ClassifierKind classifier;
  int feature_k;
  std::optional<RunReport> report;   // empty when the cell failed
  std::string error;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;

  double cell_macro_f1(const MatrixCell& c) const {
    if (!c.report) return -1.0;
    return c.report->cv ? c.report->cv->macro_f1.mean : c.report->metrics.macro_f1;
  }

  // metrics of every cell, no timings: byte-identical across reruns
  nlohmann::ordered_json metrics_json() const {
    nlohmann::ordered_json cells_json = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
      nlohmann::ordered_json j;
      j["task"] = to_string(c.task);
      j["classifier"] = to_string(c.classifier);
      j["feature_k"] = feature_k_to_string(c.feature_k);
      if (c.report) {
        j["result"] = c.report->metrics_json();
      } else {
        j["error"] = c.error;
      }
      cells_json.push_back(std::move(j));
    }
    nlohmann::ordered_json j;
    j["cells"] = std::move(cells_json);
    j["comparison"] = comparison_json();
    return j;
  }

  nlohmann::ordered_json comparison_json() const {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::map<std::string, double> best;
    for (const auto& c : cells) {
      const double f1 = cell_macro_f1(c);
      auto [it, inserted] = best.try_emplace(to_string(c.task), f1);
      if (!inserted && f1 > it->second) it->second = f1;
    }
    for (const auto& c : cells) {
      const double f1 = cell_macro_f1(c);
      rows.push_back({{"task", to_string(c.task)},
                      {"classifier", to_string(c.classifier)},
                      {"feature_k", feature_k_to_string(c.feature_k)},
                      {"macro_f1", f1},
                      {"best_for_task", c.report && f1 == best.at(to_string(c.task))}});
    }
    return rows;
  }

  std::string comparison_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    os << std::left << std::setw(15) << "task" << std::setw(16) << "classifier"
       << std::setw(6) << "k" << std::right << std::setw(10) << "macro-f1"
       << "\n";
    for (const auto& c : cells) {
      os << std::left << std::setw(15) << to_string(c.task) << std::setw(16)
         << to_string(c.classifier) << std::setw(6) << feature_k_to_string(c.feature_k)
         << std::right << std::setw(9);
      if (c.report) {
        os << percent_1dp(cell_macro_f1(c)) << "%";
      } else {
        os << "FAILED";
      }
      double best = -1.0;
      for (const auto& o : cells) {
        if (o.task == c.task) best = std::max(best, cell_macro_f1(o));
      }
      if (c.report && cell_macro_f1(c) == best) os << "  <- best";
      os << "\n";
    }
    return os.str();
  }
};

/// Runs one cell per (task, classifier, feature_k) combination, sharing the
/// prepared input across cells. A failing cell is recorded and the matrix
/// continues. Empty axes fall back to the base config's single cell.
/// Cells run sequentially by default (bounded memory); parallel_cells > 1
/// spreads them over that many threads with identical results.
inline MatrixResult run_matrix(const ExperimentConfig& base,
                               std::vector<TaskVariant> tasks,
                               std::vector<ClassifierKind> classifiers,
                               std::vector<int> feature_ks,
                               unsigned parallel_cells = 1) {
  if (tasks.empty()) tasks = {base.task};
  if (classifiers.empty()) classifiers = {base.classifier};
  if (feature_ks.empty()) feature_ks = {base.feature_k};

  const PreparedData prep = prepare_input(base);
  MatrixResult result;
  for (TaskVariant task : tasks) {
    for (ClassifierKind clf : classifiers) {
      for (int k : feature_ks) {
        result.cells.push_back({task, clf, k, std::nullopt, ""});
      }
    }
  }

  auto run_one = [&](MatrixCell& cell) {
    ExperimentConfig config = base;
    config.task = cell.task;
    config.classifier = cell.classifier;
    config.feature_k = cell.feature_k;
    try {
      config.validate();
      cell.report = run_cell(prep, config);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  if (parallel_cells <= 1 || result.cells.size() <= 1) {
    for (auto& cell : result.cells) run_one(cell);
  } else {
    std::atomic<size_t> next{0};
    const auto pool = std::min<size_t>(parallel_cells, result.cells.size());
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (size_t w = 0; w < pool; ++w) {
      threads.emplace_back([&] {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= result.cells.size()) return;
          run_one(result.cells[i]);
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  return result;
}

// per-class f1 series as CSV, for external plotting
inline void write_plot_data(const std::vector<const MetricsReport*>& reports,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write plot data: " + path);
  out << "task,classifier,feature_k,class,f1\n";
  for (const MetricsReport* r : reports) {
    for (size_t c = 0; c < r->per_class.size(); ++c) {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof buf, r->per_class[c].f1);
      out << r->task << ',' << r->classifier << ',' << r->feature_k << ','
          << csv_quote(c < r->class_names.size() ? r->class_names[c]
                                                 : std::to_string(c),
                       ',')
          << ',' << std::string(buf, res.ptr) << "\n";
    }
  }
}

}  // namespace flowforge

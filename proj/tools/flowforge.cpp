// flowforge: flow-record intrusion-detection pipeline CLI.
//
// Subcommands: merge, prep, select, train, eval, run, matrix, synth.
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowforge/chi_square.hpp"
#include "flowforge/classifier.hpp"
#include "flowforge/csv.hpp"
#include "flowforge/experiment.hpp"
#include "flowforge/metrics.hpp"
#include "flowforge/preprocess.hpp"
#include "flowforge/synthetic.hpp"

namespace fs = std::filesystem;
using namespace flowforge;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// target column codes for standalone `select`: integer columns pass through,
// string columns are frequency-indexed first
FlowTable target_codes(const FlowTable& table, const std::string& target) {
  const int col = table.require(target);
  if (table.is_numeric(col)) return table;
  auto res = index_strings(table, {target});
  return res.table;
}

struct CommonIn {
  std::string in;
  std::string schema;
};

FlowTable read_input(const CommonIn& args) {
  TableSchema schema = load_schema(args.schema);
  return read_csv(args.in, schema);
}

// ---------------------------------------------------------------------------

int cmd_merge(const std::string& manifest_arg, const std::string& schema_path,
              const std::string& out) {
  const TableSchema schema = load_schema(schema_path);
  const ShardManifest manifest = load_manifest(manifest_arg);
  const size_t shards = stream_merge(manifest, schema, out);
  std::cout << "merged " << shards << " shard(s) into " << out << "\n";
  return 0;
}

int cmd_prep(const CommonIn& args, const std::string& plan_path, uint64_t seed,
             bool seed_given, const std::string& out, const std::string& report_path) {
  FlowTable table = read_input(args);
  const size_t rows_in = table.row_count();

  auto indexed = index_strings(table, default_index_columns(table));
  table = std::move(indexed.table);

  auto dedup = drop_duplicates(table);
  table = std::move(dedup.table);

  auto missing = drop_missing(table);
  table = std::move(missing.table);

  std::map<std::string, int64_t> kept;
  if (!plan_path.empty()) {
    std::ifstream in(plan_path);
    if (!in) throw ConfigError("cannot open sampling plan: " + plan_path);
    nlohmann::json pj;
    in >> pj;
    SamplingPlan plan = SamplingPlan::from_json(pj);
    if (seed_given) plan.seed = seed;
    auto sampled = undersample(table, plan);
    table = std::move(sampled.table);
    kept = std::move(sampled.kept_per_class);
  }

  write_csv(table, out);
  save_schema(table.schema(), out + ".schema.json");

  nlohmann::ordered_json report;
  report["rows_in"] = rows_in;
  report["rows_out"] = table.row_count();
  report["duplicates_removed"] = dedup.removed_count;
  report["missing_removed"] = missing_report_to_json(missing.report);
  nlohmann::ordered_json kept_json = nlohmann::ordered_json::object();
  for (const auto& [cls, n] : kept) kept_json[cls] = n;
  report["sampling_kept"] = std::move(kept_json);
  report["index_maps"] = index_maps_to_json(indexed.maps);
  if (!report_path.empty()) write_json(report_path, report);

  int64_t missing_total = 0;
  for (const auto& [cls, n] : missing.report) missing_total += n;
  std::cout << "prep: " << rows_in << " rows -> " << table.row_count() << " ("
            << dedup.removed_count << " duplicates, " << missing_total
            << " with missing values); wrote " << out << "\n";
  return 0;
}

int cmd_select(const CommonIn& args, const std::string& target, const std::string& k,
               int bins, const std::string& out_ranking) {
  FlowTable table = target_codes(read_input(args), target);
  // standalone mode normalizes on the whole input before binning
  std::vector<std::string> features;
  for (size_t col : table.feature_columns()) {
    features.push_back(table.schema().columns[col].name);
  }
  auto norm = min_max_normalize(table, features);
  auto sel = select_top_k(norm.table, target, feature_k_from_string(k), bins);

  std::cout << "rank  feature                          chi2\n";
  for (size_t i = 0; i < sel.ranking.scores.size(); ++i) {
    const auto& s = sel.ranking.scores[i];
    std::cout << std::left << std::setw(6) << i + 1 << std::setw(32) << s.feature
              << s.statistic << "\n";
  }
  if (!out_ranking.empty()) write_json(out_ranking, sel.ranking.to_json());
  return 0;
}

ExperimentConfig config_from_flags(const CommonIn& args, const std::string& task,
                                   const std::string& classifier, const std::string& k,
                                   int bins, uint64_t seed, size_t partitions,
                                   unsigned workers) {
  ExperimentConfig c;
  c.input = args.in;
  c.schema_path = args.schema;
  c.task = task_from_string(task);
  c.classifier = classifier_from_string(classifier);
  c.feature_k = feature_k_from_string(k);
  c.bins = bins;
  c.tree.max_bins = bins;
  c.seed = seed;
  c.partitions = partitions;
  c.workers = workers;
  return c;
}

int cmd_train(const CommonIn& args, const std::string& task_name,
              const std::string& classifier, const std::string& k, int bins,
              uint64_t seed, size_t partitions, unsigned workers,
              const std::string& model_out) {
  ExperimentConfig config = config_from_flags(args, task_name, classifier, k, bins,
                                              seed, partitions, workers);
  FlowTable table = read_input(args);
  LabelTask task{config.task, {}};
  table = derive_labels(table, task);
  auto fit = detail::fit_pipeline(table, task, config, nullptr);
  save_model(fit.model, model_out);
  std::cout << "trained " << to_string(config.classifier) << " on "
            << table.row_count() << " rows (" << fit.model.features.size()
            << " features); wrote " << model_out << "\n";
  return 0;
}

int cmd_eval(const CommonIn& args, const std::string& task_name,
             const std::string& model_path, const std::string& report_path,
             const std::string& plot_path) {
  FlowTable table = read_input(args);
  LabelTask task{task_from_string(task_name), {}};
  table = derive_labels(table, task);
  const ClassifierModel model = load_model(model_path);
  MetricsReport report = evaluate_model(model, table, task);
  std::cout << report.to_text();
  if (!report_path.empty()) write_json(report_path, report.to_json());
  if (!plot_path.empty()) write_plot_data({&report}, plot_path);
  return 0;
}

int cmd_run(const std::string& config_path, std::string out_dir,
            const std::string& plot_path) {
  ExperimentConfig config = load_config(config_path);
  if (!out_dir.empty()) config.out_dir = out_dir;
  RunReport report = run_experiment(config);

  std::string summary;
  if (report.cv) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    os << to_string(config.task) << " / " << to_string(config.classifier) << " / k="
       << feature_k_to_string(config.feature_k) << " (" << report.cv->folds.size()
       << "-fold)\n  macro-f1 " << percent_1dp(report.cv->macro_f1.mean) << "% +/- "
       << percent_1dp(report.cv->macro_f1.stddev) << "%  accuracy "
       << percent_1dp(report.cv->accuracy.mean) << "%\n";
    summary = os.str();
  } else {
    summary = report.metrics.to_text();
  }
  std::cout << summary;

  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    write_json(config.out_dir + "/report.json", report.to_json());
    write_json(config.out_dir + "/metrics.json", report.metrics_json());
    write_text(config.out_dir + "/summary.txt", summary);
  }
  if (!plot_path.empty()) {
    if (report.cv) {
      MetricsReport mean;
      mean.task = to_string(config.task);
      mean.classifier = to_string(config.classifier);
      mean.feature_k = feature_k_to_string(config.feature_k);
      mean.class_names = report.class_names;
      for (const auto& ms : report.cv->per_class_f1) {
        mean.per_class.push_back({0.0, 0.0, ms.mean});
      }
      write_plot_data({&mean}, plot_path);
    } else {
      write_plot_data({&report.metrics}, plot_path);
    }
  }
  return 0;
}

int cmd_matrix(const std::string& config_path, std::string out_dir,
               const std::string& tasks_arg, const std::string& classifiers_arg,
               const std::string& ks_arg, const std::string& plot_path,
               unsigned parallel_cells) {
  ExperimentConfig base = load_config(config_path);
  if (!out_dir.empty()) base.out_dir = out_dir;

  std::vector<TaskVariant> tasks;
  for (const auto& t : split_list(tasks_arg)) tasks.push_back(task_from_string(t));
  std::vector<ClassifierKind> classifiers;
  for (const auto& c : split_list(classifiers_arg)) {
    classifiers.push_back(classifier_from_string(c));
  }
  std::vector<int> ks;
  for (const auto& k : split_list(ks_arg)) ks.push_back(feature_k_from_string(k));

  // default axes reproduce the full test matrix: 27 partial cells, or
  // 9 all-features cells in full-data mode
  if (tasks.empty()) {
    tasks = {TaskVariant::binary, TaskVariant::main_category, TaskVariant::sub_category};
  }
  if (classifiers.empty()) {
    classifiers = {ClassifierKind::decision_tree, ClassifierKind::random_forest,
                   ClassifierKind::naive_bayes};
  }
  if (ks.empty()) {
    ks = base.full_data ? std::vector<int>{kSelectAll}
                        : std::vector<int>{kSelectAll, 10, 5};
  }

  MatrixResult result = run_matrix(base, tasks, classifiers, ks, parallel_cells);
  std::cout << result.comparison_text();

  if (!base.out_dir.empty()) {
    fs::create_directories(base.out_dir);
    write_json(base.out_dir + "/matrix_metrics.json", result.metrics_json());
    write_text(base.out_dir + "/comparison.txt", result.comparison_text());
    nlohmann::ordered_json full = nlohmann::ordered_json::array();
    for (const auto& cell : result.cells) {
      if (cell.report) full.push_back(cell.report->to_json());
    }
    write_json(base.out_dir + "/matrix_report.json", full);
  }
  if (!plot_path.empty()) {
    std::vector<const MetricsReport*> reports;
    for (const auto& cell : result.cells) {
      if (cell.report && !cell.report->cv) reports.push_back(&cell.report->metrics);
    }
    write_plot_data(reports, plot_path);
  }
  for (const auto& cell : result.cells) {
    if (!cell.report) {
      std::cerr << "cell " << to_string(cell.task) << "/" << to_string(cell.classifier)
                << "/k=" << feature_k_to_string(cell.feature_k)
                << " failed: " << cell.error << "\n";
    }
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out,
              const std::string& schema_out) {
  const SyntheticSpec spec = load_synthetic_spec(spec_path);
  const FlowTable table = generate_synthetic(spec);
  write_csv(table, out);
  save_schema(table.schema(), schema_out.empty() ? out + ".schema.json" : schema_out);
  std::cout << "generated " << table.row_count() << " rows into " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowforge: flow-record intrusion-detection pipeline"};
  app.require_subcommand(1);

  // merge
  std::string merge_manifest, merge_schema, merge_out;
  auto* merge = app.add_subcommand("merge", "union sharded flow CSVs into one file");
  merge->add_option("--manifest", merge_manifest, "manifest file or glob")->required();
  merge->add_option("--schema", merge_schema, "schema JSON")->required();
  merge->add_option("--out", merge_out, "output CSV")->required();

  // prep
  CommonIn prep_in;
  std::string prep_plan, prep_out, prep_report;
  uint64_t prep_seed = 0;
  auto* prep = app.add_subcommand("prep", "index, dedup, drop missing, undersample");
  prep->add_option("--in", prep_in.in, "input CSV")->required();
  prep->add_option("--schema", prep_in.schema, "schema JSON")->required();
  prep->add_option("--plan", prep_plan, "sampling plan JSON");
  auto* prep_seed_opt = prep->add_option("--seed", prep_seed, "sampling seed override");
  prep->add_option("--out", prep_out, "output CSV")->required();
  prep->add_option("--report", prep_report, "preprocessing report JSON");

  // select
  CommonIn sel_in;
  std::string sel_target, sel_k = "all", sel_out;
  int sel_bins = 32;
  auto* select = app.add_subcommand("select", "chi-square feature ranking");
  select->add_option("--in", sel_in.in, "input CSV")->required();
  select->add_option("--schema", sel_in.schema, "schema JSON")->required();
  select->add_option("--target", sel_target, "target column")->required();
  select->add_option("--k", sel_k, "5, 10 or all");
  select->add_option("--bins", sel_bins, "bins for continuous features");
  select->add_option("--out-ranking", sel_out, "ranking JSON");

  // train
  CommonIn train_in;
  std::string train_task = "binary", train_clf = "rf", train_k = "all", train_model;
  int train_bins = 32;
  uint64_t train_seed = 0;
  size_t train_parts = 8;
  unsigned train_workers = 0;
  auto* train = app.add_subcommand("train", "train a classifier on a prepared CSV");
  train->add_option("--in", train_in.in, "input CSV")->required();
  train->add_option("--schema", train_in.schema, "schema JSON")->required();
  train->add_option("--task", train_task, "binary|main|sub");
  train->add_option("--classifier", train_clf, "dt|rf|nb");
  train->add_option("--k", train_k, "feature count: 5, 10 or all");
  train->add_option("--bins", train_bins, "bin count");
  train->add_option("--seed", train_seed, "seed");
  train->add_option("--partitions", train_parts, "executor partitions");
  train->add_option("--workers", train_workers, "worker threads (0 = cores)");
  train->add_option("--model-out", train_model, "model JSON")->required();

  // eval
  CommonIn eval_in;
  std::string eval_task = "binary", eval_model, eval_report, eval_plot;
  auto* eval = app.add_subcommand("eval", "evaluate a saved model");
  eval->add_option("--in", eval_in.in, "test CSV")->required();
  eval->add_option("--schema", eval_in.schema, "schema JSON")->required();
  eval->add_option("--task", eval_task, "binary|main|sub");
  eval->add_option("--model", eval_model, "model JSON")->required();
  eval->add_option("--report", eval_report, "metrics JSON");
  eval->add_option("--emit-plot-data", eval_plot, "per-class f1 CSV");

  // run
  std::string run_config, run_out, run_plot;
  auto* run = app.add_subcommand("run", "full pipeline for one experiment config");
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out-dir", run_out, "output directory");
  run->add_option("--emit-plot-data", run_plot, "per-class f1 CSV");

  // matrix
  std::string mx_config, mx_out, mx_tasks, mx_clfs, mx_ks, mx_plot;
  unsigned mx_parallel = 1;
  auto* matrix = app.add_subcommand("matrix", "run an experiment matrix");
  matrix->add_option("--config", mx_config, "base experiment config JSON")->required();
  matrix->add_option("--out-dir", mx_out, "output directory");
  matrix->add_option("--tasks", mx_tasks, "comma list (default: all three)");
  matrix->add_option("--classifiers", mx_clfs, "comma list (default: dt,rf,nb)");
  matrix->add_option("--ks", mx_ks, "comma list (default: all,10,5; full data: all)");
  matrix->add_option("--emit-plot-data", mx_plot, "per-class f1 CSV");
  matrix->add_option("--parallel", mx_parallel,
                     "run up to N matrix cells concurrently (default 1)");

  // synth
  std::string synth_spec, synth_out, synth_schema;
  auto* synth = app.add_subcommand("synth", "generate a synthetic flow corpus");
  synth->add_option("--spec", synth_spec, "synthetic spec JSON")->required();
  synth->add_option("--out", synth_out, "output CSV")->required();
  synth->add_option("--schema-out", synth_schema, "schema JSON (default <out>.schema.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are configuration errors
  }

  try {
    if (merge->parsed()) return cmd_merge(merge_manifest, merge_schema, merge_out);
    if (prep->parsed()) {
      return cmd_prep(prep_in, prep_plan, prep_seed, prep_seed_opt->count() > 0,
                      prep_out, prep_report);
    }
    if (select->parsed()) return cmd_select(sel_in, sel_target, sel_k, sel_bins, sel_out);
    if (train->parsed()) {
      return cmd_train(train_in, train_task, train_clf, train_k, train_bins,
                       train_seed, train_parts, train_workers, train_model);
    }
    if (eval->parsed()) return cmd_eval(eval_in, eval_task, eval_model, eval_report, eval_plot);
    if (run->parsed()) return cmd_run(run_config, run_out, run_plot);
    if (matrix->parsed()) {
      return cmd_matrix(mx_config, mx_out, mx_tasks, mx_clfs, mx_ks, mx_plot,
                        mx_parallel);
    }
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out, synth_schema);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xglad/datasets.hpp"
#include "xglad/evaluation.hpp"
#include "xglad/training.hpp"

namespace xglad {

struct DatasetSpec {
  // Synthetic when variant is set; TU layout otherwise.
  std::string variant;  // "BM-MT" | "BM-MN" | "BM-MS"
  int n_train = 500;
  int n_test = 200;
  double anomaly_ratio = 0.1;

  std::string tu_dir;
  std::string tu_name;
  int normal_class = 0;
  double test_fraction = 0.2;
  double anomaly_fraction = 0.2;

  bool synthetic() const { return !variant.empty(); }
  std::string name() const { return synthetic() ? variant : tu_name; }
};

struct ExperimentConfig {
  DatasetSpec dataset;
  TrainConfig train;
  ExplanationRule explanation;
  std::string output_dir = "out";
  int repeats = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

// Parses a JSON experiment config. Training hyper-parameters default to the
// per-dataset rows of the built-in defaults table when the dataset name is
// known; explicit values always win. Unknown keys and type mismatches are
// rejected with the offending path.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text, const std::string& origin);

// Fills train fields from the defaults table for a known dataset name.
// Returns false when the name has no table row.
bool apply_dataset_defaults(const std::string& name, TrainConfig& train);

struct RepeatMetrics {
  int repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double ad_auc = 0.0;
  std::optional<double> nx_auc, ex_auc;
  std::optional<double> nx_auc_macro, ex_auc_macro;
  double wall_clock_seconds = 0.0;
};

struct MetricsReport {
  std::vector<RepeatMetrics> repeats;
  double ad_auc_mean = 0.0, ad_auc_std = 0.0;
  std::optional<double> nx_auc_mean, nx_auc_std, ex_auc_mean, ex_auc_std;
  double wall_clock_seconds = 0.0;
};

// Builds the dataset for one repeat (regenerated or re-split with the
// repeat seed).
DatasetBundle build_dataset(const DatasetSpec& spec, std::uint64_t seed);

// One full repeat: fit, score, explain, evaluate.
RepeatMetrics run_repeat(const ExperimentConfig& cfg, int repeat, const std::string& out_dir);

// All repeats plus the aggregate report; artifacts land under
// cfg.output_dir (config echo, per-repeat directories, report.json).
// Individual repeat failures are recorded, not fatal; the experiment throws
// only if every repeat fails.
MetricsReport run_experiment(const ExperimentConfig& cfg);

// --- artifact files -----------------------------------------------------------

// scores.csv: header graph_id,score,label; 17 significant digits.
void write_scores_csv(const std::string& path, const ScoreTable& table);
ScoreTable read_scores_csv(const std::string& path);

// explanations.txt: per graph a "graph <id>" line followed by nodes:,
// edges:, selected_nodes:, selected_edges: lines.
void write_explanations(const std::string& path, const std::vector<ExplanationResult>& results);

void write_report_json(const std::string& path, const ExperimentConfig& cfg,
                       const MetricsReport& report);
MetricsReport read_report_json(const std::string& path);

std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace xglad

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "xglad/runner.hpp"

using namespace xglad;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_experiment(const std::string& out_dir) {
  ExperimentConfig cfg = parse_config_json(R"({
    "dataset": {"variant": "BM-MT", "n_train": 12, "n_test": 8, "anomaly_ratio": 0.25},
    "train": {"epochs": 2, "batch_size": 6, "layers_enc": 2, "dim_enc": 5,
              "layers_ext": 1, "dim_ext": 4},
    "repeats": 1,
    "seed": 5
  })",
                                           "test");
  cfg.output_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("minimal config picks up the BM-MT defaults row") {
  const ExperimentConfig cfg = parse_config_json(R"({"dataset": {"variant": "BM-MT"}})", "t");
  CHECK(cfg.train.epochs == 1000);
  CHECK(cfg.train.learning_rate == 1e-2);
  CHECK(cfg.train.layers_enc == 5);
  CHECK(cfg.train.dim_enc == 16);
  CHECK(cfg.train.extractor == ExtractorKind::gnn);
  CHECK(cfg.train.layers_ext == 2);
  CHECK(cfg.train.dim_ext == 16);

  const ExperimentConfig ms = parse_config_json(R"({"dataset": {"variant": "BM-MS"}})", "t");
  CHECK(ms.train.epochs == 200);
  CHECK(ms.train.dim_ext == 32);

  const ExperimentConfig mutag = parse_config_json(
      R"({"dataset": {"tu_dir": "data", "tu_name": "MUTAG"}})", "t");
  CHECK(mutag.train.epochs == 50);
  CHECK(mutag.train.layers_ext == 5);
  CHECK(mutag.train.dim_ext == 4);
}

TEST_CASE("explicit values override table defaults") {
  const ExperimentConfig cfg = parse_config_json(
      R"({"dataset": {"variant": "BM-MT"}, "train": {"epochs": 7}})", "t");
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.train.learning_rate == 1e-2);  // untouched default
}

TEST_CASE("unknown keys and type mismatches are rejected with paths") {
  CHECK_THROWS_WITH_AS(
      parse_config_json(R"({"dataset": {"variant": "BM-MT"}, "train": {"epcohs": 5}})", "t"),
      doctest::Contains("epcohs"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_json(R"({"dataset": {"variant": "BM-MT"}, "train": {"epochs": "many"}})", "t"),
      doctest::Contains("t.train.epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_json(R"({"dataset": {}})", "t"),
                       doctest::Contains("variant"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"dataset": {"variant": "BM-MT", "tu_name": "X"}})", "t"),
      ConfigError);
  CHECK_THROWS_AS(parse_config_json("{not json", "t"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("scores csv schema and roundtrip") {
  const std::string dir = (fs::temp_directory_path() / "xglad_runner_csv").string();
  fs::remove_all(dir);
  ScoreTable table;
  table.rows = {{0, 1.2345678901234567, 0}, {1, -3.25, 1}};
  write_scores_csv(dir + "/scores.csv", table);

  const std::string text = slurp(dir + "/scores.csv");
  CHECK(text.rfind("graph_id,score,label\n", 0) == 0);
  CHECK(text.find("1.2345678901234567") != std::string::npos);

  const ScoreTable back = read_scores_csv(dir + "/scores.csv");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].score == table.rows[0].score);
  CHECK(back.rows[1].label == 1);
  fs::remove_all(dir);
}

TEST_CASE("explanations file aligns with graph sizes") {
  const std::string dir = (fs::temp_directory_path() / "xglad_runner_expl").string();
  fs::remove_all(dir);
  ExplanationResult res;
  res.graph_id = 3;
  res.node_probs = {0.25, 0.5};
  res.edge_probs = {0.125};
  res.selected_nodes = {1};
  res.selected_edges = {0};
  write_explanations(dir + "/explanations.txt", {res});
  const std::string text = slurp(dir + "/explanations.txt");
  CHECK(text.find("graph 3\n") != std::string::npos);
  CHECK(text.find("nodes: 0.25 0.5\n") != std::string::npos);
  CHECK(text.find("edges: 0.125\n") != std::string::npos);
  CHECK(text.find("selected_nodes: 1\n") != std::string::npos);
  CHECK(text.find("selected_edges: 0\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("experiment artifacts and aggregate bookkeeping") {
  const std::string dir = (fs::temp_directory_path() / "xglad_runner_exp").string();
  fs::remove_all(dir);
  ExperimentConfig cfg = tiny_experiment(dir);
  cfg.repeats = 2;
  const MetricsReport report = run_experiment(cfg);

  REQUIRE(report.repeats.size() == 2);
  for (const RepeatMetrics& m : report.repeats) CHECK(m.ok);
  CHECK(fs::exists(dir + "/config.json"));
  CHECK(fs::exists(dir + "/repeat_1/scores.csv"));
  CHECK(fs::exists(dir + "/repeat_2/explanations.txt"));
  CHECK(fs::exists(dir + "/repeat_1/model.ckpt"));
  CHECK(fs::exists(dir + "/report.json"));

  // aggregates recompute from the per-repeat rows
  const MetricsReport back = read_report_json(dir + "/report.json");
  REQUIRE(back.repeats.size() == 2);
  double mean = 0.0;
  for (const RepeatMetrics& m : back.repeats) mean += m.ad_auc;
  mean /= 2.0;
  CHECK(back.ad_auc_mean == doctest::Approx(mean).epsilon(1e-12));
  double var = 0.0;
  for (const RepeatMetrics& m : back.repeats) var += (m.ad_auc - mean) * (m.ad_auc - mean);
  CHECK(back.ad_auc_std == doctest::Approx(std::sqrt(var / 2.0)).epsilon(1e-12));
  CHECK(back.nx_auc_mean.has_value());  // synthetic data carries masks
  CHECK(back.ex_auc_mean.has_value());

  fs::remove_all(dir);
}

TEST_CASE("single repeat reports zero std") {
  const std::string dir = (fs::temp_directory_path() / "xglad_runner_one").string();
  fs::remove_all(dir);
  const MetricsReport report = run_experiment(tiny_experiment(dir));
  CHECK(report.ad_auc_std == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("reruns produce byte-identical artifacts") {
  const std::string dir_a = (fs::temp_directory_path() / "xglad_runner_det_a").string();
  const std::string dir_b = (fs::temp_directory_path() / "xglad_runner_det_b").string();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_experiment(tiny_experiment(dir_a));
  run_experiment(tiny_experiment(dir_b));
  CHECK(slurp(dir_a + "/repeat_1/scores.csv") == slurp(dir_b + "/repeat_1/scores.csv"));
  CHECK(slurp(dir_a + "/repeat_1/explanations.txt") == slurp(dir_b + "/repeat_1/explanations.txt"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("config echo reparses to the same json") {
  const ExperimentConfig cfg = tiny_experiment("/tmp/unused");
  const std::string echoed = config_to_json(cfg);
  const ExperimentConfig back = parse_config_json(echoed, "echo");
  CHECK(config_to_json(back) == echoed);
}

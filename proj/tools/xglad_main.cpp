#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xglad/runner.hpp"

namespace {

namespace fs = std::filesystem;
using namespace xglad;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitMetric = 5;

// Picks the TU file prefix inside a directory: an explicit name wins, a
// single prefix is used as-is, and with several prefixes one ending in
// "_test" is preferred (the layout written by `generate`).
std::string resolve_tu_name(const std::string& dir, const std::string& explicit_name) {
  if (!explicit_name.empty()) return explicit_name;
  std::vector<std::string> prefixes;
  const std::string suffix = "_A.txt";
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string fname = entry.path().filename().string();
    if (fname.size() > suffix.size() &&
        fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) == 0)
      prefixes.push_back(fname.substr(0, fname.size() - suffix.size()));
  }
  if (prefixes.empty()) throw DataError("no *_A.txt files under " + dir);
  if (prefixes.size() == 1) return prefixes[0];
  for (const std::string& p : prefixes)
    if (p.size() > 5 && p.compare(p.size() - 5, 5, "_test") == 0) return p;
  std::string msg = "multiple TU datasets under " + dir + ", pass --name; found:";
  for (const std::string& p : prefixes) msg += " " + p;
  throw DataError(msg);
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + out_path);
  out << text;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int repeats,
            long long seed) {
  ExperimentConfig cfg = load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (repeats > 0) cfg.repeats = repeats;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.validate();

  const MetricsReport report = run_experiment(cfg);
  for (const RepeatMetrics& m : report.repeats) {
    if (m.ok) {
      std::printf("repeat %d (seed %llu): AD-AUC %.4f", m.repeat,
                  static_cast<unsigned long long>(m.seed), m.ad_auc);
      if (m.nx_auc) std::printf("  NX-AUC %.4f", *m.nx_auc);
      if (m.ex_auc) std::printf("  EX-AUC %.4f", *m.ex_auc);
      std::printf("  (%.1fs)\n", m.wall_clock_seconds);
    } else {
      std::printf("repeat %d (seed %llu): FAILED: %s\n", m.repeat,
                  static_cast<unsigned long long>(m.seed), m.error.c_str());
    }
  }
  std::printf("aggregate: AD-AUC %.4f +- %.4f", report.ad_auc_mean, report.ad_auc_std);
  if (report.nx_auc_mean) std::printf("  NX-AUC %.4f +- %.4f", *report.nx_auc_mean, *report.nx_auc_std);
  if (report.ex_auc_mean) std::printf("  EX-AUC %.4f +- %.4f", *report.ex_auc_mean, *report.ex_auc_std);
  std::printf("\nreport: %s/report.json\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_generate(const std::string& variant, const std::string& out_dir, int n_train, int n_test,
                 double ratio, long long seed) {
  const SyntheticVariant v = parse_variant(variant);
  const DatasetBundle bundle =
      gen_synthetic(v, n_train, n_test, ratio, static_cast<std::uint64_t>(seed));
  save_tu_graphs(bundle.train, out_dir, variant + "_train");
  save_tu_graphs(bundle.test, out_dir, variant + "_test");
  std::printf("wrote %zu train / %zu test graphs under %s (prefixes %s_train, %s_test)\n",
              bundle.train.size(), bundle.test.size(), out_dir.c_str(), variant.c_str(),
              variant.c_str());
  return 0;
}

int cmd_score(const std::string& checkpoint, const std::string& data_dir, const std::string& name,
              const std::string& out_path) {
  const ModelState state = load_checkpoint(checkpoint);
  const std::string prefix = resolve_tu_name(data_dir, name);
  const std::vector<Graph> graphs = load_tu_graphs(data_dir, prefix);
  const ScoreTable table = score_test_set(state, graphs, state.cfg.loss.temperature);
  std::ostringstream csv;
  csv << "graph_id,score,label\n";
  for (const ScoreRow& row : table.rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", row.score);
    csv << row.graph_id << "," << buf << "," << row.label << "\n";
  }
  emit(csv.str(), out_path);
  for (const std::string& w : table.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_explain(const std::string& checkpoint, const std::string& data_dir,
                const std::string& name, int topk, const std::string& out_path) {
  const ModelState state = load_checkpoint(checkpoint);
  const std::string prefix = resolve_tu_name(data_dir, name);
  const std::vector<Graph> graphs = load_tu_graphs(data_dir, prefix);
  std::vector<ExplanationResult> results;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    ExplanationRule rule{RuleKind::top_k, std::min(topk, g.num_nodes), 0.5};
    ExplanationResult res;
    if (g.num_edges() > 0) {
      const ForwardOutput fwd = forward(state.model, g);
      res = extract_explanation(g, fwd, rule, static_cast<int>(i));
    } else {
      res.graph_id = static_cast<int>(i);
      res.node_probs.assign(static_cast<std::size_t>(g.num_nodes), 0.0);
      res.rule = rule;
    }
    results.push_back(std::move(res));
  }
  if (out_path.empty()) {
    const std::string tmp = "explanations.txt";
    write_explanations(tmp, results);
    std::ifstream in(tmp);
    std::cout << in.rdbuf();
    fs::remove(tmp);
  } else {
    write_explanations(out_path, results);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-level anomaly detection with subgraph explanations"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, data_dir, name, out_path;
  std::string variant = "BM-MT";
  int repeats = -1, n_train = 500, n_test = 200, topk = 5;
  long long seed = -1;
  long long gen_seed = 1;
  double ratio = 0.1;

  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config_path, "experiment config (json)")->required();
  run->add_option("--out", out_dir, "output directory (overrides config)");
  run->add_option("--repeats", repeats, "repeat count (overrides config)");
  run->add_option("--seed", seed, "base seed (overrides config)");

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic benchmark as TU files");
  generate->add_option("--variant", variant, "BM-MT | BM-MN | BM-MS")->required();
  generate->add_option("--out", out_dir, "output directory")->required();
  generate->add_option("--train", n_train, "number of training graphs");
  generate->add_option("--test", n_test, "number of test graphs");
  generate->add_option("--ratio", ratio, "test anomaly ratio");
  generate->add_option("--seed", gen_seed, "generation seed");

  CLI::App* score = app.add_subcommand("score", "score a TU dataset with a trained model");
  score->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  score->add_option("--data", data_dir, "TU dataset directory")->required();
  score->add_option("--name", name, "TU file prefix (default: auto-detect)");
  score->add_option("--out", out_path, "scores csv path (default: stdout)");

  CLI::App* explain = app.add_subcommand("explain", "emit explanations for a TU dataset");
  explain->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  explain->add_option("--data", data_dir, "TU dataset directory")->required();
  explain->add_option("--name", name, "TU file prefix (default: auto-detect)");
  explain->add_option("--topk", topk, "nodes/edges kept per graph")->required();
  explain->add_option("--out", out_path, "output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, repeats, seed);
    if (generate->parsed()) return cmd_generate(variant, out_dir, n_train, n_test, ratio, gen_seed);
    if (score->parsed()) return cmd_score(checkpoint, data_dir, name, out_path);
    if (explain->parsed()) return cmd_explain(checkpoint, data_dir, name, topk, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const MetricError& e) {
    std::cerr << "metric undefined: " << e.what() << "\n";
    return kExitMetric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

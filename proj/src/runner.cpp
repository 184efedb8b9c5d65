#include "xglad/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace xglad {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  if (!dataset.synthetic() && dataset.tu_name.empty())
    throw ConfigError("dataset: set either variant or tu_dir/tu_name");
  if (dataset.synthetic()) parse_variant(dataset.variant);
  train.validate();
}

// --- defaults table ----------------------------------------------------------

namespace {

struct DefaultsRow {
  const char* name;
  int epochs;
  double lr;
  int layers_enc, dim_enc;
  ExtractorKind extractor;
  int layers_ext, dim_ext;
};

// Per-dataset training defaults; unknown names fall back to the BM-MT row's
// generic values already present in TrainConfig.
constexpr DefaultsRow kDefaults[] = {
    {"BM-MT", 1000, 1e-2, 5, 16, ExtractorKind::gnn, 2, 16},
    {"BM-MN", 500, 1e-2, 5, 16, ExtractorKind::gnn, 3, 8},
    {"BM-MS", 200, 1e-2, 5, 16, ExtractorKind::gnn, 2, 32},
    {"MUTAG", 50, 1e-2, 5, 16, ExtractorKind::gnn, 5, 4},
    {"Mutagenicity", 50, 1e-2, 5, 16, ExtractorKind::gnn, 5, 4},
    {"PROTEINS-F", 800, 1e-3, 5, 16, ExtractorKind::gnn, 5, 8},
    {"ENZYMES", 1000, 1e-3, 5, 128, ExtractorKind::gnn, 5, 8},
    {"AIDS", 1000, 1e-4, 5, 16, ExtractorKind::gnn, 5, 8},
    {"DHFR", 1000, 1e-4, 5, 128, ExtractorKind::gnn, 5, 8},
    {"BZR", 1000, 1e-4, 5, 128, ExtractorKind::gnn, 5, 8},
    {"COX2", 1000, 1e-4, 5, 64, ExtractorKind::gnn, 5, 8},
    {"DD", 100, 1e-4, 5, 128, ExtractorKind::gnn, 5, 8},
    {"NCI1", 1000, 1e-4, 5, 128, ExtractorKind::gnn, 5, 8},
    {"IMDB-B", 10, 1e-4, 5, 64, ExtractorKind::gnn, 5, 8},
    {"REDDIT-B", 1000, 1e-4, 5, 128, ExtractorKind::gnn, 5, 8},
};

}  // namespace

bool apply_dataset_defaults(const std::string& name, TrainConfig& train) {
  for (const DefaultsRow& row : kDefaults) {
    if (name == row.name) {
      train.epochs = row.epochs;
      train.learning_rate = row.lr;
      train.layers_enc = row.layers_enc;
      train.dim_enc = row.dim_enc;
      train.extractor = row.extractor;
      train.layers_ext = row.layers_ext;
      train.dim_ext = row.dim_ext;
      return true;
    }
  }
  return false;
}

// --- strict json helpers -------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& item : obj.items())
    if (allowed.find(item.key()) == allowed.end())
      throw ConfigError(path + ": unknown key '" + item.key() + "'");
}

template <typename T>
T typed(const json& obj, const std::string& key, const std::string& path, const char* want) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": expected " + want);
  }
}

int get_int(const json& o, const std::string& k, const std::string& p) {
  if (!o.at(k).is_number_integer()) throw ConfigError(p + "." + k + ": expected an integer");
  return typed<int>(o, k, p, "an integer");
}

double get_double(const json& o, const std::string& k, const std::string& p) {
  if (!o.at(k).is_number()) throw ConfigError(p + "." + k + ": expected a number");
  return typed<double>(o, k, p, "a number");
}

std::string get_string(const json& o, const std::string& k, const std::string& p) {
  if (!o.at(k).is_string()) throw ConfigError(p + "." + k + ": expected a string");
  return typed<std::string>(o, k, p, "a string");
}

bool get_bool(const json& o, const std::string& k, const std::string& p) {
  if (!o.at(k).is_boolean()) throw ConfigError(p + "." + k + ": expected a boolean");
  return typed<bool>(o, k, p, "a boolean");
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  check_keys(root, origin,
             {"dataset", "train", "loss", "explanation", "output_dir", "repeats", "seed"});
  if (!root.contains("dataset")) throw ConfigError(origin + ": missing 'dataset'");

  ExperimentConfig cfg;
  const json& ds = root.at("dataset");
  check_keys(ds, origin + ".dataset",
             {"variant", "n_train", "n_test", "anomaly_ratio", "tu_dir", "tu_name",
              "normal_class", "test_fraction", "anomaly_fraction"});
  const std::string dpath = origin + ".dataset";
  if (ds.contains("variant")) cfg.dataset.variant = get_string(ds, "variant", dpath);
  if (ds.contains("n_train")) cfg.dataset.n_train = get_int(ds, "n_train", dpath);
  if (ds.contains("n_test")) cfg.dataset.n_test = get_int(ds, "n_test", dpath);
  if (ds.contains("anomaly_ratio")) cfg.dataset.anomaly_ratio = get_double(ds, "anomaly_ratio", dpath);
  if (ds.contains("tu_dir")) cfg.dataset.tu_dir = get_string(ds, "tu_dir", dpath);
  if (ds.contains("tu_name")) cfg.dataset.tu_name = get_string(ds, "tu_name", dpath);
  if (ds.contains("normal_class")) cfg.dataset.normal_class = get_int(ds, "normal_class", dpath);
  if (ds.contains("test_fraction")) cfg.dataset.test_fraction = get_double(ds, "test_fraction", dpath);
  if (ds.contains("anomaly_fraction"))
    cfg.dataset.anomaly_fraction = get_double(ds, "anomaly_fraction", dpath);
  if (cfg.dataset.variant.empty() == cfg.dataset.tu_name.empty())
    throw ConfigError(dpath + ": set exactly one of variant or tu_name");

  // Table defaults for a known dataset name first; explicit keys override.
  apply_dataset_defaults(cfg.dataset.name(), cfg.train);

  if (root.contains("train")) {
    const json& tr = root.at("train");
    const std::string tpath = origin + ".train";
    check_keys(tr, tpath,
               {"epochs", "learning_rate", "batch_size", "checkpoint_every", "grad_clip",
                "layers_enc", "dim_enc", "extractor", "layers_ext", "dim_ext", "two_extractor"});
    if (tr.contains("epochs")) cfg.train.epochs = get_int(tr, "epochs", tpath);
    if (tr.contains("learning_rate")) cfg.train.learning_rate = get_double(tr, "learning_rate", tpath);
    if (tr.contains("batch_size")) cfg.train.batch_size = get_int(tr, "batch_size", tpath);
    if (tr.contains("checkpoint_every"))
      cfg.train.checkpoint_every = get_int(tr, "checkpoint_every", tpath);
    if (tr.contains("grad_clip")) cfg.train.grad_clip = get_double(tr, "grad_clip", tpath);
    if (tr.contains("layers_enc")) cfg.train.layers_enc = get_int(tr, "layers_enc", tpath);
    if (tr.contains("dim_enc")) cfg.train.dim_enc = get_int(tr, "dim_enc", tpath);
    if (tr.contains("extractor"))
      cfg.train.extractor = parse_extractor_kind(get_string(tr, "extractor", tpath));
    if (tr.contains("layers_ext")) cfg.train.layers_ext = get_int(tr, "layers_ext", tpath);
    if (tr.contains("dim_ext")) cfg.train.dim_ext = get_int(tr, "dim_ext", tpath);
    if (tr.contains("two_extractor")) cfg.train.two_extractor = get_bool(tr, "two_extractor", tpath);
  }
  if (root.contains("loss")) {
    const json& lo = root.at("loss");
    const std::string lpath = origin + ".loss";
    check_keys(lo, lpath, {"estimator", "temperature", "beta", "negative_mode"});
    if (lo.contains("estimator"))
      cfg.train.loss.estimator = parse_estimator(get_string(lo, "estimator", lpath));
    if (lo.contains("temperature")) cfg.train.loss.temperature = get_double(lo, "temperature", lpath);
    if (lo.contains("beta")) cfg.train.loss.beta = get_double(lo, "beta", lpath);
    if (lo.contains("negative_mode"))
      cfg.train.loss.negative_mode = parse_negative_mode(get_string(lo, "negative_mode", lpath));
  }
  if (root.contains("explanation")) {
    const json& ex = root.at("explanation");
    const std::string epath = origin + ".explanation";
    check_keys(ex, epath, {"rule", "k", "threshold"});
    if (ex.contains("rule")) {
      const std::string rule = get_string(ex, "rule", epath);
      if (rule == "top_k")
        cfg.explanation.kind = RuleKind::top_k;
      else if (rule == "threshold")
        cfg.explanation.kind = RuleKind::threshold;
      else
        throw ConfigError(epath + ".rule: expected top_k or threshold");
    }
    if (ex.contains("k")) cfg.explanation.k = get_int(ex, "k", epath);
    if (ex.contains("threshold")) cfg.explanation.t = get_double(ex, "threshold", epath);
  }
  if (root.contains("output_dir")) cfg.output_dir = get_string(root, "output_dir", origin);
  if (root.contains("repeats")) cfg.repeats = get_int(root, "repeats", origin);
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_integer()) throw ConfigError(origin + ".seed: expected an integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str(), path);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.dataset.synthetic()) {
    j["dataset"] = {{"variant", cfg.dataset.variant},
                    {"n_train", cfg.dataset.n_train},
                    {"n_test", cfg.dataset.n_test},
                    {"anomaly_ratio", cfg.dataset.anomaly_ratio}};
  } else {
    j["dataset"] = {{"tu_dir", cfg.dataset.tu_dir},
                    {"tu_name", cfg.dataset.tu_name},
                    {"normal_class", cfg.dataset.normal_class},
                    {"test_fraction", cfg.dataset.test_fraction},
                    {"anomaly_fraction", cfg.dataset.anomaly_fraction}};
  }
  j["train"] = {{"epochs", cfg.train.epochs},
                {"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"checkpoint_every", cfg.train.checkpoint_every},
                {"grad_clip", cfg.train.grad_clip},
                {"layers_enc", cfg.train.layers_enc},
                {"dim_enc", cfg.train.dim_enc},
                {"extractor", extractor_kind_name(cfg.train.extractor)},
                {"layers_ext", cfg.train.layers_ext},
                {"dim_ext", cfg.train.dim_ext},
                {"two_extractor", cfg.train.two_extractor}};
  j["loss"] = {{"estimator", estimator_name(cfg.train.loss.estimator)},
               {"temperature", cfg.train.loss.temperature},
               {"beta", cfg.train.loss.beta},
               {"negative_mode", negative_mode_name(cfg.train.loss.negative_mode)}};
  j["explanation"] = {{"rule", cfg.explanation.kind == RuleKind::top_k ? "top_k" : "threshold"},
                      {"k", cfg.explanation.k},
                      {"threshold", cfg.explanation.t}};
  j["output_dir"] = cfg.output_dir;
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

// --- artifacts -----------------------------------------------------------------

namespace {

void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_scores_csv(const std::string& path, const ScoreTable& table) {
  std::ostringstream out;
  out << "graph_id,score,label\n";
  for (const ScoreRow& row : table.rows)
    out << row.graph_id << "," << fmt17(row.score) << "," << row.label << "\n";
  atomic_write(path, out.str());
}

ScoreTable read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  ScoreTable table;
  std::string line;
  if (!std::getline(in, line) || line != "graph_id,score,label")
    throw DataError(path + ": bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ScoreRow row;
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',')) throw DataError(path + ": bad row");
    row.graph_id = std::stoi(cell);
    if (!std::getline(ss, cell, ',')) throw DataError(path + ": bad row");
    row.score = std::stod(cell);
    if (!std::getline(ss, cell, ',')) throw DataError(path + ": bad row");
    row.label = std::stoi(cell);
    table.rows.push_back(row);
  }
  return table;
}

void write_explanations(const std::string& path, const std::vector<ExplanationResult>& results) {
  std::ostringstream out;
  for (const ExplanationResult& res : results) {
    out << "graph " << res.graph_id << "\n";
    out << "nodes:";
    for (double p : res.node_probs) out << " " << fmt17(p);
    out << "\nedges:";
    for (double p : res.edge_probs) out << " " << fmt17(p);
    out << "\nselected_nodes:";
    for (int i : res.selected_nodes) out << " " << i;
    out << "\nselected_edges:";
    for (int i : res.selected_edges) out << " " << i;
    out << "\n";
  }
  atomic_write(path, out.str());
}

// --- experiment ------------------------------------------------------------------

DatasetBundle build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.synthetic())
    return gen_synthetic(parse_variant(spec.variant), spec.n_train, spec.n_test,
                         spec.anomaly_ratio, seed);
  return load_tu_dataset(spec.tu_dir, spec.tu_name, spec.normal_class, spec.test_fraction,
                         spec.anomaly_fraction, seed);
}

RepeatMetrics run_repeat(const ExperimentConfig& cfg, int repeat, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RepeatMetrics metrics;
  metrics.repeat = repeat;
  metrics.seed = cfg.seed + static_cast<std::uint64_t>(repeat);

  DatasetBundle bundle = build_dataset(cfg.dataset, metrics.seed);
  TrainConfig tc = cfg.train;
  tc.seed = metrics.seed;
  if (tc.checkpoint_every > 0 && tc.checkpoint_path.empty())
    tc.checkpoint_path = out_dir + "/model.ckpt";
  ModelState state = fit(bundle.train, tc);
  save_checkpoint(state, out_dir + "/model.ckpt");

  const ScoreTable table = score_test_set(state, bundle.test, tc.loss.temperature);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoreRow& row : table.rows) {
    scores.push_back(row.score);
    labels.push_back(row.label);
  }
  metrics.ad_auc = roc_auc(scores, labels);

  std::vector<ExplanationResult> explanations;
  explanations.reserve(bundle.test.size());
  for (std::size_t i = 0; i < bundle.test.size(); ++i) {
    const Graph& g = bundle.test[i];
    ExplanationResult res;
    if (g.num_edges() > 0) {
      const ForwardOutput fwd = forward(state.model, g);
      res = extract_explanation(g, fwd, cfg.explanation, static_cast<int>(i));
    } else {
      res.graph_id = static_cast<int>(i);
      res.node_probs.assign(static_cast<std::size_t>(g.num_nodes), 0.0);
      res.rule = cfg.explanation;
    }
    explanations.push_back(std::move(res));
  }

  const bool has_masks =
      std::all_of(bundle.test.begin(), bundle.test.end(), [](const Graph& g) {
        return g.gt_node_mask.has_value() && g.gt_edge_mask.has_value();
      });
  if (has_masks) {
    metrics.nx_auc = explanation_auc(explanations, bundle.test, ExplanationLevel::node);
    metrics.ex_auc = explanation_auc(explanations, bundle.test, ExplanationLevel::edge);
    metrics.nx_auc_macro = explanation_auc_macro(explanations, bundle.test, ExplanationLevel::node);
    metrics.ex_auc_macro = explanation_auc_macro(explanations, bundle.test, ExplanationLevel::edge);
  }

  write_scores_csv(out_dir + "/scores.csv", table);
  write_explanations(out_dir + "/explanations.txt", explanations);

  metrics.ok = true;
  metrics.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return metrics;
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& stdev) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());  // population std: a single repeat reports 0
  stdev = std::sqrt(var);
}

}  // namespace

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(cfg.output_dir);
  atomic_write(cfg.output_dir + "/config.json", config_to_json(cfg));

  MetricsReport report;
  for (int r = 1; r <= cfg.repeats; ++r) {
    const std::string out_dir = cfg.output_dir + "/repeat_" + std::to_string(r);
    fs::create_directories(out_dir);
    try {
      report.repeats.push_back(run_repeat(cfg, r, out_dir));
    } catch (const std::exception& e) {
      RepeatMetrics failed;
      failed.repeat = r;
      failed.seed = cfg.seed + static_cast<std::uint64_t>(r);
      failed.ok = false;
      failed.error = e.what();
      report.repeats.push_back(std::move(failed));
    }
  }

  std::vector<double> ad, nx, ex;
  for (const RepeatMetrics& m : report.repeats) {
    if (!m.ok) continue;
    ad.push_back(m.ad_auc);
    if (m.nx_auc) nx.push_back(*m.nx_auc);
    if (m.ex_auc) ex.push_back(*m.ex_auc);
  }
  if (ad.empty()) {
    std::string last;
    for (const RepeatMetrics& m : report.repeats)
      if (!m.ok) last = m.error;
    throw Error("experiment failed: every repeat failed (last error: " + last + ")");
  }
  mean_std(ad, report.ad_auc_mean, report.ad_auc_std);
  if (!nx.empty()) {
    double m, s;
    mean_std(nx, m, s);
    report.nx_auc_mean = m;
    report.nx_auc_std = s;
  }
  if (!ex.empty()) {
    double m, s;
    mean_std(ex, m, s);
    report.ex_auc_mean = m;
    report.ex_auc_std = s;
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_report_json(cfg.output_dir + "/report.json", cfg, report);
  return report;
}

void write_report_json(const std::string& path, const ExperimentConfig& cfg,
                       const MetricsReport& report) {
  json j;
  j["config"] = json::parse(config_to_json(cfg));
  j["seeds"] = json::array();
  j["repeats"] = json::array();
  for (const RepeatMetrics& m : report.repeats) {
    j["seeds"].push_back(m.seed);
    json row = {{"repeat", m.repeat},
                {"seed", m.seed},
                {"ok", m.ok},
                {"wall_clock_seconds", m.wall_clock_seconds}};
    if (m.ok) {
      row["ad_auc"] = m.ad_auc;
      if (m.nx_auc) row["nx_auc"] = *m.nx_auc;
      if (m.ex_auc) row["ex_auc"] = *m.ex_auc;
      if (m.nx_auc_macro) row["nx_auc_macro"] = *m.nx_auc_macro;
      if (m.ex_auc_macro) row["ex_auc_macro"] = *m.ex_auc_macro;
    } else {
      row["error"] = m.error;
    }
    j["repeats"].push_back(row);
  }
  json agg = {{"ad_auc", {{"mean", report.ad_auc_mean}, {"std", report.ad_auc_std}}}};
  if (report.nx_auc_mean)
    agg["nx_auc"] = {{"mean", *report.nx_auc_mean}, {"std", *report.nx_auc_std}};
  if (report.ex_auc_mean)
    agg["ex_auc"] = {{"mean", *report.ex_auc_mean}, {"std", *report.ex_auc_std}};
  j["aggregate"] = agg;
  j["wall_clock_seconds"] = report.wall_clock_seconds;
  atomic_write(path, j.dump(2));
}

MetricsReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  MetricsReport report;
  for (const json& row : j.at("repeats")) {
    RepeatMetrics m;
    m.repeat = row.at("repeat").get<int>();
    m.seed = row.at("seed").get<std::uint64_t>();
    m.ok = row.at("ok").get<bool>();
    m.wall_clock_seconds = row.at("wall_clock_seconds").get<double>();
    if (m.ok) {
      m.ad_auc = row.at("ad_auc").get<double>();
      if (row.contains("nx_auc")) m.nx_auc = row.at("nx_auc").get<double>();
      if (row.contains("ex_auc")) m.ex_auc = row.at("ex_auc").get<double>();
    } else {
      m.error = row.at("error").get<std::string>();
    }
    report.repeats.push_back(std::move(m));
  }
  const json& agg = j.at("aggregate");
  report.ad_auc_mean = agg.at("ad_auc").at("mean").get<double>();
  report.ad_auc_std = agg.at("ad_auc").at("std").get<double>();
  if (agg.contains("nx_auc")) {
    report.nx_auc_mean = agg.at("nx_auc").at("mean").get<double>();
    report.nx_auc_std = agg.at("nx_auc").at("std").get<double>();
  }
  if (agg.contains("ex_auc")) {
    report.ex_auc_mean = agg.at("ex_auc").at("mean").get<double>();
    report.ex_auc_std = agg.at("ex_auc").at("std").get<double>();
  }
  report.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return report;
}

}  // namespace xglad

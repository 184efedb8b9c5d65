#pragma once

#include <string>
#include <vector>

#include "xglad/training.hpp"

namespace xglad {

struct ScoreRow {
  int graph_id = 0;
  double score = 0.0;
  int label = 0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;  // one row per test graph, in input order
  std::vector<std::string> warnings;
};

// One forward pass per test graph; the full test set's embeddings form the
// negative pool (self excluded per sample), so scores do not depend on the
// test-set ordering. Edgeless graphs cannot pass the dual transform and are
// assigned max finite score + 1 with a warning.
ScoreTable score_test_set(const ModelState& state, const std::vector<Graph>& test, double tau);

enum class RuleKind { top_k, threshold };

struct ExplanationRule {
  RuleKind kind = RuleKind::threshold;
  int k = 5;
  double t = 0.5;
};

struct ExplanationResult {
  int graph_id = 0;
  std::vector<double> node_probs;
  std::vector<double> edge_probs;  // raw products p_i * p_j, clamp-independent
  std::vector<int> selected_nodes;
  std::vector<int> selected_edges;
  ExplanationRule rule;
};

// top_k keeps the k highest-probability nodes (ties broken by lower index)
// and the min(k, m) highest edges; threshold keeps entries strictly above t.
ExplanationResult extract_explanation(const Graph& g, const ForwardOutput& fwd,
                                      const ExplanationRule& rule, int graph_id = 0);

// ROC-AUC in the rank (Mann-Whitney) formulation:
// (#concordant pairs + 0.5 #tied pairs) / (#pos * #neg).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

enum class ExplanationLevel { node, edge };

// Micro-averaged explanation AUC: probabilities and ground-truth masks of
// all graphs are concatenated into one binary classification problem.
double explanation_auc(const std::vector<ExplanationResult>& results,
                       const std::vector<Graph>& graphs, ExplanationLevel level);

// Per-graph mean of single-graph AUCs (graphs whose mask is single-class are
// skipped); reported alongside the micro average.
double explanation_auc_macro(const std::vector<ExplanationResult>& results,
                             const std::vector<Graph>& graphs, ExplanationLevel level);

}  // namespace xglad

#include "xglad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xglad/objective.hpp"

namespace xglad {

ScoreTable score_test_set(const ModelState& state, const std::vector<Graph>& test, double tau) {
  if (test.size() < 2) throw UsageError("score_test_set: need at least 2 test graphs");
  ScoreTable table;
  std::vector<int> pool_slot(test.size(), -1);  // row in the pool, -1 for edgeless
  std::vector<Tensor> hs, hss;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Graph& g = test[i];
    if (!g.label) throw DataError("score_test_set: test graph " + std::to_string(i) + " lacks a label");
    if (g.num_edges() == 0) {
      table.warnings.push_back("graph " + std::to_string(i) +
                               " has no edges; scored as maximally anomalous");
      continue;
    }
    const ForwardOutput fwd = forward(state.model, g);
    pool_slot[i] = static_cast<int>(hs.size());
    hs.push_back(fwd.h_sub);
    hss.push_back(fwd.h_dual_sub);
  }
  if (hs.size() < 2)
    throw UsageError("score_test_set: fewer than 2 scorable (edged) test graphs");

  const int d = hs[0].cols();
  Tensor pool_h(static_cast<int>(hs.size()), d);
  Tensor pool_hs(static_cast<int>(hs.size()), d);
  for (std::size_t r = 0; r < hs.size(); ++r)
    for (int k = 0; k < d; ++k) {
      pool_h.at(static_cast<int>(r), k) = hs[r].at(0, k);
      pool_hs.at(static_cast<int>(r), k) = hss[r].at(0, k);
    }

  double max_finite = -std::numeric_limits<double>::infinity();
  table.rows.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    table.rows[i].graph_id = static_cast<int>(i);
    table.rows[i].label = *test[i].label;
    if (pool_slot[i] >= 0) {
      const int slot = pool_slot[i];
      table.rows[i].score =
          anomaly_score(gather_rows(pool_h, {slot}), gather_rows(pool_hs, {slot}), pool_h,
                        pool_hs, tau, slot);
      max_finite = std::max(max_finite, table.rows[i].score);
    }
  }
  for (std::size_t i = 0; i < test.size(); ++i)
    if (pool_slot[i] < 0) table.rows[i].score = max_finite + 1.0;
  return table;
}

namespace {

std::vector<int> top_k_indices(const std::vector<double>& probs, int k) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&probs](int a, int b) {
    if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)])
      return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
    return a < b;  // ties break toward the lower index
  });
  order.resize(static_cast<std::size_t>(std::min<int>(k, static_cast<int>(probs.size()))));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> above_threshold(const std::vector<double>& probs, double t) {
  std::vector<int> out;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > t) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace

ExplanationResult extract_explanation(const Graph& g, const ForwardOutput& fwd,
                                      const ExplanationRule& rule, int graph_id) {
  if (rule.kind == RuleKind::top_k && (rule.k < 0 || rule.k > g.num_nodes))
    throw UsageError("extract_explanation: k = " + std::to_string(rule.k) +
                     " exceeds node count " + std::to_string(g.num_nodes));
  if (rule.kind == RuleKind::threshold && !(rule.t > 0.0 && rule.t < 1.0))
    throw UsageError("extract_explanation: threshold must lie in (0, 1)");

  ExplanationResult res;
  res.graph_id = graph_id;
  res.rule = rule;
  res.node_probs.assign(fwd.p.values().begin(), fwd.p.values().end());
  // Ranking uses the raw products so it is independent of the clamp.
  const Tensor raw = lift_edge_probs_raw(fwd.p, g.edges);
  res.edge_probs.assign(raw.values().begin(), raw.values().end());
  if (rule.kind == RuleKind::top_k) {
    res.selected_nodes = top_k_indices(res.node_probs, rule.k);
    res.selected_edges = top_k_indices(res.edge_probs, rule.k);
  } else {
    res.selected_nodes = above_threshold(res.node_probs, rule.t);
    res.selected_edges = above_threshold(res.edge_probs, rule.t);
  }
  return res;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: length mismatch");
  long npos = 0, nneg = 0;
  for (int l : labels) (l != 0 ? npos : nneg)++;
  if (npos == 0 || nneg == 0)
    throw MetricError("roc_auc: both classes must be present");
  for (double s : scores)
    if (!std::isfinite(s)) throw MetricError("roc_auc: non-finite score");

  // Rank formulation with average ranks over ties:
  // AUC = (R_pos - npos (npos + 1) / 2) / (npos * nneg)
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
  });
  double rank_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           scores[static_cast<std::size_t>(order[j + 1])] ==
               scores[static_cast<std::size_t>(order[i])])
      ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[static_cast<std::size_t>(order[k])] != 0) rank_pos += avg_rank;
    i = j + 1;
  }
  return (rank_pos - 0.5 * static_cast<double>(npos) * (npos + 1)) /
         (static_cast<double>(npos) * static_cast<double>(nneg));
}

namespace {

void collect_level(const ExplanationResult& res, const Graph& g, ExplanationLevel level,
                   std::vector<double>& probs, std::vector<int>& labels) {
  if (level == ExplanationLevel::node) {
    if (!g.gt_node_mask) throw MetricError("explanation_auc: graph lacks gt_node_mask");
    for (std::size_t i = 0; i < res.node_probs.size(); ++i) {
      probs.push_back(res.node_probs[i]);
      labels.push_back((*g.gt_node_mask)[i] != 0 ? 1 : 0);
    }
  } else {
    if (!g.gt_edge_mask) throw MetricError("explanation_auc: graph lacks gt_edge_mask");
    for (std::size_t i = 0; i < res.edge_probs.size(); ++i) {
      probs.push_back(res.edge_probs[i]);
      labels.push_back((*g.gt_edge_mask)[i] != 0 ? 1 : 0);
    }
  }
}

}  // namespace

double explanation_auc(const std::vector<ExplanationResult>& results,
                       const std::vector<Graph>& graphs, ExplanationLevel level) {
  if (results.size() != graphs.size())
    throw DimensionError("explanation_auc: results/graphs length mismatch");
  std::vector<double> probs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < results.size(); ++i)
    collect_level(results[i], graphs[i], level, probs, labels);
  return roc_auc(probs, labels);
}

double explanation_auc_macro(const std::vector<ExplanationResult>& results,
                             const std::vector<Graph>& graphs, ExplanationLevel level) {
  if (results.size() != graphs.size())
    throw DimensionError("explanation_auc: results/graphs length mismatch");
  double total = 0.0;
  int counted = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::vector<double> probs;
    std::vector<int> labels;
    collect_level(results[i], graphs[i], level, probs, labels);
    const bool has_pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
    const bool has_neg = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 0; });
    if (!has_pos || !has_neg) continue;
    total += roc_auc(probs, labels);
    ++counted;
  }
  if (counted == 0) throw MetricError("explanation_auc: no graph with both classes in its mask");
  return total / counted;
}

}  // namespace xglad

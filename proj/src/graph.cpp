#include "xglad/graph.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace xglad {

void canonicalize_edges(std::vector<Edge>& edges) {
  for (Edge& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
}

void validate_graph(const Graph& g) {
  if (g.num_nodes <= 0) throw DimensionError("graph: num_nodes must be positive");
  std::set<Edge> seen;
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    auto [u, v] = g.edges[k];
    if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes)
      throw IndexError("graph: edge " + std::to_string(k) + " endpoint out of range");
    if (u == v) throw UsageError("graph: self-loop at edge " + std::to_string(k));
    Edge canon{std::min(u, v), std::max(u, v)};
    if (!seen.insert(canon).second)
      throw UsageError("graph: duplicate edge at index " + std::to_string(k));
  }
  if (!g.node_features.defined() || g.node_features.rows() != g.num_nodes)
    throw DimensionError("graph: node_features must have one row per node");
  if (g.edge_features && g.edge_features->rows() != g.num_edges())
    throw DimensionError("graph: edge_features must have one row per edge");
  if (g.gt_node_mask && static_cast<int>(g.gt_node_mask->size()) != g.num_nodes)
    throw DimensionError("graph: gt_node_mask length " +
                         std::to_string(g.gt_node_mask->size()) + " != num_nodes");
  if (g.gt_edge_mask && static_cast<int>(g.gt_edge_mask->size()) != g.num_edges())
    throw DimensionError("graph: gt_edge_mask length " +
                         std::to_string(g.gt_edge_mask->size()) + " != num_edges");
}

Tensor build_dual_features(const Graph& g) {
  if (g.edge_features) return *g.edge_features;
  const int d = g.feature_dim();
  Tensor out(g.num_edges(), d);
  for (int e = 0; e < g.num_edges(); ++e) {
    const auto [i, j] = g.edges[static_cast<std::size_t>(e)];
    for (int k = 0; k < d; ++k)
      out.at(e, k) = g.node_features.at(i, k) + g.node_features.at(j, k);
  }
  return out;
}

DualHypergraph dht_transform(const Graph& g) {
  validate_graph(g);
  if (g.num_edges() == 0)
    throw DegenerateInputError("dht_transform: edgeless graph has no dual nodes");
  DualHypergraph dual;
  dual.num_dual_nodes = g.num_edges();
  dual.num_hyperedges = g.num_nodes;
  dual.incidence = g.edges;
  dual.dual_features = build_dual_features(g);
  return dual;
}

GraphBatch batch_graphs(const std::vector<Graph>& gs) {
  if (gs.empty()) throw UsageError("batch_graphs: empty sequence");
  const int d_f = gs[0].feature_dim();
  const bool has_edge_feats = gs[0].edge_features.has_value();
  int total_n = 0, total_m = 0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    validate_graph(gs[i]);
    if (gs[i].feature_dim() != d_f)
      throw DimensionError("batch_graphs: node feature dim mismatch at graph " +
                           std::to_string(i));
    if (gs[i].edge_features.has_value() != has_edge_feats)
      throw DimensionError("batch_graphs: inconsistent edge-feature presence at graph " +
                           std::to_string(i));
    total_n += gs[i].num_nodes;
    total_m += gs[i].num_edges();
  }

  GraphBatch b;
  b.num_graphs = static_cast<int>(gs.size());
  b.node_features = Tensor(total_n, d_f);
  b.node_segments.reserve(static_cast<std::size_t>(total_n));
  b.edge_segments.reserve(static_cast<std::size_t>(total_m));
  b.edges.reserve(static_cast<std::size_t>(total_m));

  std::vector<Tensor> duals;
  duals.reserve(gs.size());
  int d_fs = -1;
  int node_offset = 0;
  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    const Graph& g = gs[gi];
    for (int i = 0; i < g.num_nodes; ++i) {
      for (int k = 0; k < d_f; ++k)
        b.node_features.at(node_offset + i, k) = g.node_features.at(i, k);
      b.node_segments.push_back(static_cast<int>(gi));
    }
    for (const Edge& e : g.edges) {
      b.edges.emplace_back(e.first + node_offset, e.second + node_offset);
      b.edge_segments.push_back(static_cast<int>(gi));
    }
    Tensor dual = build_dual_features(g);
    if (d_fs < 0)
      d_fs = dual.cols();
    else if (dual.cols() != d_fs)
      throw DimensionError("batch_graphs: dual feature dim mismatch at graph " +
                           std::to_string(gi));
    duals.push_back(dual);
    b.nodes_per_graph.push_back(g.num_nodes);
    b.edges_per_graph.push_back(g.num_edges());
    node_offset += g.num_nodes;
  }

  b.dual_features = Tensor(total_m, d_fs < 0 ? 0 : d_fs);
  int edge_offset = 0;
  for (const Tensor& dual : duals) {
    for (int e = 0; e < dual.rows(); ++e)
      for (int k = 0; k < dual.cols(); ++k) b.dual_features.at(edge_offset + e, k) = dual.at(e, k);
    edge_offset += dual.rows();
  }
  return b;
}

std::vector<Graph> unbatch_graphs(const GraphBatch& batch) {
  std::vector<Graph> out;
  out.reserve(static_cast<std::size_t>(batch.num_graphs));
  int node_offset = 0, edge_offset = 0;
  for (int gi = 0; gi < batch.num_graphs; ++gi) {
    Graph g;
    g.num_nodes = batch.nodes_per_graph[static_cast<std::size_t>(gi)];
    const int m = batch.edges_per_graph[static_cast<std::size_t>(gi)];
    g.node_features = Tensor(g.num_nodes, batch.node_features.cols());
    for (int i = 0; i < g.num_nodes; ++i)
      for (int k = 0; k < batch.node_features.cols(); ++k)
        g.node_features.at(i, k) = batch.node_features.at(node_offset + i, k);
    g.edges.reserve(static_cast<std::size_t>(m));
    for (int e = 0; e < m; ++e) {
      const Edge& be = batch.edges[static_cast<std::size_t>(edge_offset + e)];
      g.edges.emplace_back(be.first - node_offset, be.second - node_offset);
    }
    node_offset += g.num_nodes;
    edge_offset += m;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace xglad

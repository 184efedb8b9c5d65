#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "xglad/tensor.hpp"

namespace xglad {

using Edge = std::pair<int, int>;

// Node-attributed undirected simple graph. Edges are stored once as
// (min,max) pairs; an edge's position in the list is its stable index,
// which also names the corresponding dual node, entry of the edge
// probability vector, and line of a ground-truth edge mask.
struct Graph {
  int num_nodes = 0;
  std::vector<Edge> edges;
  Tensor node_features;                           // num_nodes x d_f
  std::optional<Tensor> edge_features;            // num_edges x d_e
  std::optional<int> label;                       // 0 normal, 1 anomaly
  std::optional<std::vector<std::uint8_t>> gt_node_mask;
  std::optional<std::vector<std::uint8_t>> gt_edge_mask;

  int num_edges() const { return static_cast<int>(edges.size()); }
  int feature_dim() const { return node_features.cols(); }
};

// Normalizes every pair to (min,max) in place, keeping list order.
void canonicalize_edges(std::vector<Edge>& edges);

// Checks all Graph invariants; throws with the index of the offending
// element on the first violation.
void validate_graph(const Graph& g);

// Dual hypergraph of a Graph: dual nodes are the original edges, hyperedges
// the original nodes, and the incidence is the transpose of the original
// node-edge incidence. The incidence is stored as the source edge list
// reinterpreted: dual node e is incident to hyperedges incidence[e].first
// and incidence[e].second.
struct DualHypergraph {
  int num_dual_nodes = 0;  // m of the source graph
  int num_hyperedges = 0;  // n of the source graph
  std::vector<Edge> incidence;
  Tensor dual_features;  // num_dual_nodes x d_f*
};

// Dual node features: the edge features when present (passed through
// unchanged), otherwise the elementwise sum of the two endpoint features.
Tensor build_dual_features(const Graph& g);

// Throws DegenerateInputError on an edgeless graph.
DualHypergraph dht_transform(const Graph& g);

// Contiguous concatenation of graphs with per-graph node offsets applied.
// Segment ids are sorted and contiguous per graph.
struct GraphBatch {
  int num_graphs = 0;
  Tensor node_features;  // (sum n) x d_f
  Tensor dual_features;  // (sum m) x d_f*
  std::vector<Edge> edges;
  std::vector<int> node_segments;
  std::vector<int> edge_segments;
  std::vector<int> nodes_per_graph;
  std::vector<int> edges_per_graph;

  int total_nodes() const { return node_features.rows(); }
  int total_edges() const { return static_cast<int>(edges.size()); }
};

GraphBatch batch_graphs(const std::vector<Graph>& gs);

// Inverse of batch_graphs on the structural fields (num_nodes, edges,
// node_features). Labels and masks are not part of a batch.
std::vector<Graph> unbatch_graphs(const GraphBatch& batch);

}  // namespace xglad

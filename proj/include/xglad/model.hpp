#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xglad/graph.hpp"
#include "xglad/tensor.hpp"

namespace xglad {

enum class ExtractorKind { mlp, gnn };

ExtractorKind parse_extractor_kind(const std::string& s);  // "mlp" | "gnn"
std::string extractor_kind_name(ExtractorKind k);

// y = x * W + b. Encoder layers run bias-free (bias left undefined): a
// constant offset would let an all-zero feature mask still produce aligned
// nonzero embeddings, which is a degenerate optimum of the contrastive
// objective. Extractor layers keep their biases.
struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out; undefined => no bias term
};

// GIN layer: h <- MLP(h + sum of neighbor h), with the layer perceptron a
// 2-layer MLP (linear, relu, linear) and the GIN epsilon fixed at 0.
struct GinLayer {
  Linear l1, l2;
};

// Hypergraph convolution: dual-node embeddings are averaged into incident
// hyperedges and back (degree-normalized at both hops), then mapped by a
// linear layer with relu.
struct HgnnLayer {
  Linear lin;
};

struct ModelConfig {
  int feat_dim = 0;       // d_f
  int dual_feat_dim = 0;  // d_f*
  int layers_enc = 5;
  int dim_enc = 16;
  ExtractorKind extractor = ExtractorKind::gnn;
  int layers_ext = 2;
  int dim_ext = 16;
  bool two_extractor = false;

  void validate() const;
};

// Bottleneck subgraph extractor over the original view; emits one logit per
// node, squashed to a probability.
struct Extractor {
  ExtractorKind kind = ExtractorKind::gnn;
  std::vector<GinLayer> gin_layers;  // gnn kind
  std::vector<Linear> mlp_layers;    // mlp kind
  Linear head;                       // width -> 1
};

// Second extractor of the two-extractor variant: a hypergraph-conv stack
// over the dual view emitting one logit per dual node.
struct DualExtractor {
  std::vector<HgnnLayer> layers;
  Linear head;
};

struct Model {
  ModelConfig cfg;
  Extractor extractor;
  std::optional<DualExtractor> dual_extractor;
  std::vector<GinLayer> gnn;    // original-view encoder
  std::vector<HgnnLayer> hgnn;  // dual-view encoder
};

// Allocates all parameter tensors (zero-filled, requires_grad) per config.
Model build_model(const ModelConfig& cfg);

// Visits every parameter tensor in a fixed canonical order. Names end in
// ".W" for weight matrices and ".b" for bias rows.
void visit_params(Model& m, const std::function<void(const std::string&, Tensor&)>& fn);
void visit_params(const Model& m,
                  const std::function<void(const std::string&, const Tensor&)>& fn);

// Message-routing index lists shared by all layers of one batch.
struct BatchIndex {
  std::vector<int> nbr_src, nbr_dst;    // node adjacency, both directions per edge
  std::vector<int> edge_src, edge_dst;  // endpoints per edge, canonical order
  std::vector<int> inc_dual, inc_hyper; // dual incidence pairs (edge k, endpoint)
};

BatchIndex build_batch_index(const GraphBatch& b);

// --- building blocks --------------------------------------------------------

Tensor apply_linear(const Linear& lin, const Tensor& x);

// Node embeddings after all GIN layers (no pooling).
Tensor gin_node_embeddings(const std::vector<GinLayer>& layers, const BatchIndex& idx,
                           int num_nodes, const Tensor& x);

// Dual-node embeddings after all hypergraph-conv layers (no pooling).
Tensor hgnn_dual_embeddings(const std::vector<HgnnLayer>& layers, const BatchIndex& idx,
                            int num_nodes, int num_edges, const Tensor& x);

// Per-graph embeddings: encoder stack followed by sum pooling.
Tensor gin_encode(const std::vector<GinLayer>& layers, const GraphBatch& b,
                  const BatchIndex& idx, const Tensor& x);
Tensor hgnn_encode(const std::vector<HgnnLayer>& layers, const GraphBatch& b,
                   const BatchIndex& idx, const Tensor& x);

// Node probability vector p in (0,1), one entry per batch node.
Tensor extract_node_probs(const Extractor& ex, const GraphBatch& b, const BatchIndex& idx);

// p*_e = p_i * p_j for edge e = (i,j). The raw variant returns the plain
// product (used for explanation ranking); the plain variant re-probabilizes
// by clamping into [1e-6, 1].
Tensor lift_edge_probs_raw(const Tensor& p, const std::vector<Edge>& edges);
Tensor lift_edge_probs(const Tensor& p, const std::vector<Edge>& edges);

inline constexpr double kLiftClampLo = 1e-6;

// Row-wise feature masking (structure untouched): X rows scaled by p,
// dual rows scaled by p*.
std::pair<Tensor, Tensor> mask_subgraphs(const Graph& g, const DualHypergraph& dual,
                                         const Tensor& p, const Tensor& p_star);

// --- full forward -----------------------------------------------------------

struct BatchForward {
  Tensor p;           // (sum n) x 1
  Tensor p_raw_lift;  // (sum m) x 1, pre-clamp products
  Tensor p_lifted;    // (sum m) x 1, clamped lift of p
  Tensor p_star;      // (sum m) x 1, the mask applied to the dual view
  Tensor h;           // B x D_enc
  Tensor h_star;      // B x D_enc
};

BatchForward forward_batch(const Model& m, const GraphBatch& b);

struct ForwardOutput {
  Tensor p;           // n x 1
  Tensor p_star;      // m x 1
  Tensor h_sub;       // 1 x D_enc
  Tensor h_dual_sub;  // 1 x D_enc
};

// Single-graph pass; propagates the dual transform's degenerate-input error
// on edgeless graphs.
ForwardOutput forward(const Model& m, const Graph& g);

}  // namespace xglad

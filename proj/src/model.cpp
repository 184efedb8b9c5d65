#include "xglad/model.hpp"

#include <string>

namespace xglad {

ExtractorKind parse_extractor_kind(const std::string& s) {
  if (s == "mlp") return ExtractorKind::mlp;
  if (s == "gnn") return ExtractorKind::gnn;
  throw ConfigError("unknown extractor kind '" + s + "' (expected mlp or gnn)");
}

std::string extractor_kind_name(ExtractorKind k) {
  return k == ExtractorKind::mlp ? "mlp" : "gnn";
}

void ModelConfig::validate() const {
  if (feat_dim <= 0 || dual_feat_dim <= 0)
    throw ConfigError("model: feature dimensions must be positive");
  if (layers_enc < 1 || dim_enc < 1 || layers_ext < 1 || dim_ext < 1)
    throw ConfigError("model: layer counts and widths must be >= 1");
}

namespace {

Linear make_linear(int in, int out, bool with_bias = true) {
  Linear lin;
  lin.weight = Tensor(in, out);
  lin.weight.set_requires_grad(true);
  if (with_bias) {
    lin.bias = Tensor(1, out);
    lin.bias.set_requires_grad(true);
  }
  return lin;
}

GinLayer make_gin_layer(int in, int dim, bool with_bias = true) {
  return GinLayer{make_linear(in, dim, with_bias), make_linear(dim, dim, with_bias)};
}

}  // namespace

Model build_model(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;

  m.extractor.kind = cfg.extractor;
  if (cfg.extractor == ExtractorKind::gnn) {
    for (int l = 0; l < cfg.layers_ext; ++l)
      m.extractor.gin_layers.push_back(make_gin_layer(l == 0 ? cfg.feat_dim : cfg.dim_ext,
                                                      cfg.dim_ext));
  } else {
    for (int l = 0; l < cfg.layers_ext; ++l)
      m.extractor.mlp_layers.push_back(make_linear(l == 0 ? cfg.feat_dim : cfg.dim_ext,
                                                   cfg.dim_ext));
  }
  m.extractor.head = make_linear(cfg.dim_ext, 1);

  if (cfg.two_extractor) {
    DualExtractor dual;
    for (int l = 0; l < cfg.layers_ext; ++l)
      dual.layers.push_back(HgnnLayer{make_linear(l == 0 ? cfg.dual_feat_dim : cfg.dim_ext,
                                                  cfg.dim_ext)});
    dual.head = make_linear(cfg.dim_ext, 1);
    m.dual_extractor = std::move(dual);
  }

  for (int l = 0; l < cfg.layers_enc; ++l)
    m.gnn.push_back(make_gin_layer(l == 0 ? cfg.feat_dim : cfg.dim_enc, cfg.dim_enc,
                                   /*with_bias=*/false));
  for (int l = 0; l < cfg.layers_enc; ++l)
    m.hgnn.push_back(HgnnLayer{make_linear(l == 0 ? cfg.dual_feat_dim : cfg.dim_enc, cfg.dim_enc,
                                           /*with_bias=*/false)});
  return m;
}

namespace {

template <typename Fn, typename TensorT>
void visit_if_defined(const Fn& fn, const std::string& name, TensorT& t) {
  if (t.defined()) fn(name, t);
}

template <typename ModelT, typename Fn>
void visit_params_impl(ModelT& m, const Fn& fn) {
  const std::string ext = "extractor.";
  if (m.extractor.kind == ExtractorKind::gnn) {
    for (std::size_t l = 0; l < m.extractor.gin_layers.size(); ++l) {
      auto& gl = m.extractor.gin_layers[l];
      const std::string p = ext + "gin" + std::to_string(l) + ".";
      fn(p + "l1.W", gl.l1.weight);
      fn(p + "l1.b", gl.l1.bias);
      fn(p + "l2.W", gl.l2.weight);
      fn(p + "l2.b", gl.l2.bias);
    }
  } else {
    for (std::size_t l = 0; l < m.extractor.mlp_layers.size(); ++l) {
      const std::string p = ext + "mlp" + std::to_string(l) + ".";
      fn(p + "W", m.extractor.mlp_layers[l].weight);
      fn(p + "b", m.extractor.mlp_layers[l].bias);
    }
  }
  fn(ext + "head.W", m.extractor.head.weight);
  fn(ext + "head.b", m.extractor.head.bias);

  if (m.dual_extractor) {
    for (std::size_t l = 0; l < m.dual_extractor->layers.size(); ++l) {
      const std::string p = "dual_extractor.h" + std::to_string(l) + ".";
      fn(p + "W", m.dual_extractor->layers[l].lin.weight);
      fn(p + "b", m.dual_extractor->layers[l].lin.bias);
    }
    fn("dual_extractor.head.W", m.dual_extractor->head.weight);
    fn("dual_extractor.head.b", m.dual_extractor->head.bias);
  }

  for (std::size_t l = 0; l < m.gnn.size(); ++l) {
    const std::string p = "gnn" + std::to_string(l) + ".";
    fn(p + "l1.W", m.gnn[l].l1.weight);
    visit_if_defined(fn, p + "l1.b", m.gnn[l].l1.bias);
    fn(p + "l2.W", m.gnn[l].l2.weight);
    visit_if_defined(fn, p + "l2.b", m.gnn[l].l2.bias);
  }
  for (std::size_t l = 0; l < m.hgnn.size(); ++l) {
    const std::string p = "hgnn" + std::to_string(l) + ".";
    fn(p + "W", m.hgnn[l].lin.weight);
    visit_if_defined(fn, p + "b", m.hgnn[l].lin.bias);
  }
}

}  // namespace

void visit_params(Model& m, const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_params_impl(m, fn);
}

void visit_params(const Model& m,
                  const std::function<void(const std::string&, const Tensor&)>& fn) {
  visit_params_impl(m, fn);
}

BatchIndex build_batch_index(const GraphBatch& b) {
  BatchIndex idx;
  const std::size_t m = b.edges.size();
  idx.nbr_src.reserve(2 * m);
  idx.nbr_dst.reserve(2 * m);
  idx.edge_src.reserve(m);
  idx.edge_dst.reserve(m);
  idx.inc_dual.reserve(2 * m);
  idx.inc_hyper.reserve(2 * m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto [u, v] = b.edges[k];
    idx.nbr_src.push_back(u);
    idx.nbr_dst.push_back(v);
    idx.nbr_src.push_back(v);
    idx.nbr_dst.push_back(u);
    idx.edge_src.push_back(u);
    idx.edge_dst.push_back(v);
    idx.inc_dual.push_back(static_cast<int>(k));
    idx.inc_hyper.push_back(u);
    idx.inc_dual.push_back(static_cast<int>(k));
    idx.inc_hyper.push_back(v);
  }
  return idx;
}

Tensor apply_linear(const Linear& lin, const Tensor& x) {
  const Tensor y = matmul(x, lin.weight);
  return lin.bias.defined() ? add(y, lin.bias) : y;
}

Tensor gin_node_embeddings(const std::vector<GinLayer>& layers, const BatchIndex& idx,
                           int num_nodes, const Tensor& x) {
  Tensor h = x;
  for (const GinLayer& layer : layers) {
    const Tensor agg =
        segment_reduce(gather_rows(h, idx.nbr_src), idx.nbr_dst, ReduceMode::sum, num_nodes);
    const Tensor z = add(h, agg);  // (1 + eps) h + sum of neighbors, eps = 0
    h = apply_linear(layer.l2, relu(apply_linear(layer.l1, z)));
  }
  return h;
}

Tensor hgnn_dual_embeddings(const std::vector<HgnnLayer>& layers, const BatchIndex& idx,
                            int num_nodes, int num_edges, const Tensor& x) {
  Tensor h = x;
  for (const HgnnLayer& layer : layers) {
    const Tensor to_hyper =
        segment_reduce(gather_rows(h, idx.inc_dual), idx.inc_hyper, ReduceMode::mean, num_nodes);
    const Tensor to_dual = segment_reduce(gather_rows(to_hyper, idx.inc_hyper), idx.inc_dual,
                                          ReduceMode::mean, num_edges);
    h = relu(apply_linear(layer.lin, to_dual));
  }
  return h;
}

Tensor gin_encode(const std::vector<GinLayer>& layers, const GraphBatch& b,
                  const BatchIndex& idx, const Tensor& x) {
  const Tensor h = gin_node_embeddings(layers, idx, b.total_nodes(), x);
  return segment_reduce(h, b.node_segments, ReduceMode::sum, b.num_graphs);
}

Tensor hgnn_encode(const std::vector<HgnnLayer>& layers, const GraphBatch& b,
                   const BatchIndex& idx, const Tensor& x) {
  const Tensor h = hgnn_dual_embeddings(layers, idx, b.total_nodes(), b.total_edges(), x);
  return segment_reduce(h, b.edge_segments, ReduceMode::sum, b.num_graphs);
}

namespace {

// Logits are centered within each graph before the squashing, so p expresses
// the relative importance of nodes inside their own graph. This keeps the
// sigmoids away from their saturated ends, where gradients vanish and the
// ranking can no longer move.
Tensor center_per_graph(const Tensor& logits, const std::vector<int>& segments, int num_graphs) {
  const Tensor means = segment_reduce(logits, segments, ReduceMode::mean, num_graphs);
  return sub(logits, gather_rows(means, segments));
}

}  // namespace

Tensor extract_node_probs(const Extractor& ex, const GraphBatch& b, const BatchIndex& idx) {
  Tensor h;
  if (ex.kind == ExtractorKind::gnn) {
    h = gin_node_embeddings(ex.gin_layers, idx, b.total_nodes(), b.node_features);
  } else {
    h = b.node_features;
    for (const Linear& lin : ex.mlp_layers) h = relu(apply_linear(lin, h));
  }
  const Tensor logits = apply_linear(ex.head, h);
  return sigmoid(center_per_graph(logits, b.node_segments, b.num_graphs));
}

Tensor lift_edge_probs_raw(const Tensor& p, const std::vector<Edge>& edges) {
  std::vector<int> src, dst;
  src.reserve(edges.size());
  dst.reserve(edges.size());
  for (const Edge& e : edges) {
    src.push_back(e.first);
    dst.push_back(e.second);
  }
  return mul(gather_rows(p, src), gather_rows(p, dst));
}

Tensor lift_edge_probs(const Tensor& p, const std::vector<Edge>& edges) {
  return clamp(lift_edge_probs_raw(p, edges), kLiftClampLo, 1.0);
}

std::pair<Tensor, Tensor> mask_subgraphs(const Graph& g, const DualHypergraph& dual,
                                         const Tensor& p, const Tensor& p_star) {
  if (p.rows() != g.num_nodes || p_star.rows() != dual.num_dual_nodes)
    throw DimensionError("mask_subgraphs: probability lengths disagree with graph sizes");
  return {scale_rows(g.node_features, p), scale_rows(dual.dual_features, p_star)};
}

BatchForward forward_batch(const Model& m, const GraphBatch& b) {
  const BatchIndex idx = build_batch_index(b);
  BatchForward out;
  out.p = extract_node_probs(m.extractor, b, idx);
  out.p_raw_lift = mul(gather_rows(out.p, idx.edge_src), gather_rows(out.p, idx.edge_dst));
  out.p_lifted = clamp(out.p_raw_lift, kLiftClampLo, 1.0);
  if (m.dual_extractor) {
    const Tensor hd = hgnn_dual_embeddings(m.dual_extractor->layers, idx, b.total_nodes(),
                                           b.total_edges(), b.dual_features);
    const Tensor logits = apply_linear(m.dual_extractor->head, hd);
    out.p_star = sigmoid(center_per_graph(logits, b.edge_segments, b.num_graphs));
  } else {
    out.p_star = out.p_lifted;
  }
  const Tensor masked_x = scale_rows(b.node_features, out.p);
  const Tensor masked_dual = scale_rows(b.dual_features, out.p_star);
  out.h = gin_encode(m.gnn, b, idx, masked_x);
  out.h_star = hgnn_encode(m.hgnn, b, idx, masked_dual);
  return out;
}

ForwardOutput forward(const Model& m, const Graph& g) {
  dht_transform(g);  // validates and rejects edgeless inputs
  const GraphBatch b = batch_graphs({g});
  const BatchForward bf = forward_batch(m, b);
  ForwardOutput out;
  out.p = bf.p;
  out.p_star = bf.p_star;
  out.h_sub = bf.h;
  out.h_dual_sub = bf.h_star;
  return out;
}

}  // namespace xglad

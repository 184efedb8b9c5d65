#include "xglad/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace xglad {

namespace {

// Salt constants for deriving independent rng streams from one bundle seed.
constexpr std::uint64_t kSaltTrain = 0x7261696e;
constexpr std::uint64_t kSaltTest = 0x74657374;
constexpr std::uint64_t kSaltOrder = 0x6f726465;
constexpr std::uint64_t kSaltSplitNorm = 0x6e6f726d;
constexpr std::uint64_t kSaltSplitAnom = 0x616e6f6d;

struct Motif {
  int num_nodes;
  std::vector<Edge> edges;
};

Motif house_motif() {
  // 4-cycle body with a roof node on top of one side: 5 nodes, 6 edges.
  return Motif{5, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 4}, {1, 4}}};
}

Motif cycle_motif(int size) {
  Motif m{size, {}};
  for (int i = 0; i < size; ++i) m.edges.emplace_back(std::min(i, (i + 1) % size),
                                                      std::max(i, (i + 1) % size));
  return m;
}

Tensor degree_onehot_features(int num_nodes, const std::vector<Edge>& edges) {
  std::vector<int> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const Edge& e : edges) {
    ++deg[static_cast<std::size_t>(e.first)];
    ++deg[static_cast<std::size_t>(e.second)];
  }
  Tensor x(num_nodes, kDegreeFeatureCap + 1);
  for (int i = 0; i < num_nodes; ++i)
    x.at(i, std::min(deg[static_cast<std::size_t>(i)], kDegreeFeatureCap)) = 1.0;
  return x;
}

}  // namespace

SyntheticVariant parse_variant(const std::string& name) {
  if (name == "BM-MT") return SyntheticVariant::bm_mt;
  if (name == "BM-MN") return SyntheticVariant::bm_mn;
  if (name == "BM-MS") return SyntheticVariant::bm_ms;
  throw ConfigError("unknown synthetic variant '" + name + "' (expected BM-MT, BM-MN, BM-MS)");
}

std::string variant_name(SyntheticVariant v) {
  switch (v) {
    case SyntheticVariant::bm_mt: return "BM-MT";
    case SyntheticVariant::bm_mn: return "BM-MN";
    case SyntheticVariant::bm_ms: return "BM-MS";
  }
  return "?";
}

Graph gen_base(BaseKind kind, int size_lo, int size_hi, Rng& rng) {
  Graph g;
  const int size = rng_int(rng, size_lo, size_hi);
  switch (kind) {
    case BaseKind::tree: {
      // Uniform random recursive tree: node i attaches to a uniform earlier node.
      g.num_nodes = size;
      for (int i = 1; i < size; ++i) {
        const int parent = static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(i)));
        g.edges.emplace_back(parent, i);
      }
      break;
    }
    case BaseKind::ladder: {
      // 2 x k ladder: two paths of k nodes joined by k rungs, 3k-2 edges.
      const int k = size;
      g.num_nodes = 2 * k;
      for (int i = 0; i + 1 < k; ++i) {
        g.edges.emplace_back(i, i + 1);
        g.edges.emplace_back(k + i, k + i + 1);
      }
      for (int i = 0; i < k; ++i) g.edges.emplace_back(i, k + i);
      break;
    }
    case BaseKind::wheel: {
      // Hub node 0 plus a rim cycle of `size` nodes: 2*size edges.
      const int rim = size;
      g.num_nodes = rim + 1;
      for (int i = 1; i <= rim; ++i) g.edges.emplace_back(0, i);
      for (int i = 1; i <= rim; ++i) g.edges.emplace_back(std::min(i, i % rim + 1),
                                                          std::max(i, i % rim + 1));
      break;
    }
  }
  canonicalize_edges(g.edges);
  g.node_features = degree_onehot_features(g.num_nodes, g.edges);
  return g;
}

Graph gen_motif_graph(const MotifSpec& motif, Rng& rng) {
  // Base size defaults are tuned once so BM-MT averages land near the
  // published statistics; see config docs.
  const BaseKind kind = static_cast<BaseKind>(rng_below(rng, 3));
  Graph g;
  switch (kind) {
    case BaseKind::tree: g = gen_base(BaseKind::tree, 5, 8, rng); break;
    case BaseKind::ladder: g = gen_base(BaseKind::ladder, 3, 4, rng); break;
    case BaseKind::wheel: g = gen_base(BaseKind::wheel, 5, 7, rng); break;
  }
  const int base_nodes = g.num_nodes;
  std::vector<std::uint8_t> node_mask(static_cast<std::size_t>(base_nodes), 0);
  std::vector<std::uint8_t> edge_mask(g.edges.size(), 0);

  for (int copy = 0; copy < motif.count; ++copy) {
    const Motif m = motif.kind == MotifSpec::Kind::house ? house_motif()
                                                         : cycle_motif(motif.size);
    const int offset = g.num_nodes;
    g.num_nodes += m.num_nodes;
    node_mask.insert(node_mask.end(), static_cast<std::size_t>(m.num_nodes), 1);
    for (const Edge& e : m.edges) {
      g.edges.emplace_back(e.first + offset, e.second + offset);
      edge_mask.push_back(1);
    }
    // One bridge from a random motif node to a random base node; the bridge
    // is neither base- nor motif-internal, so it stays out of both masks.
    const int motif_node = offset + static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(m.num_nodes)));
    const int base_node = static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(base_nodes)));
    g.edges.emplace_back(std::min(base_node, motif_node), std::max(base_node, motif_node));
    edge_mask.push_back(0);
  }

  canonicalize_edges(g.edges);
  g.node_features = degree_onehot_features(g.num_nodes, g.edges);
  g.gt_node_mask = std::move(node_mask);
  g.gt_edge_mask = std::move(edge_mask);
  return g;
}

namespace {

MotifSpec variant_motif(SyntheticVariant variant, bool anomalous, Rng& rng) {
  MotifSpec spec;
  switch (variant) {
    case SyntheticVariant::bm_mt:
      if (anomalous) {
        spec.kind = MotifSpec::Kind::cycle;
        spec.size = 5;
      } else {
        spec.kind = MotifSpec::Kind::house;
      }
      spec.count = 1;
      break;
    case SyntheticVariant::bm_mn:
      spec.kind = MotifSpec::Kind::house;
      spec.count = anomalous ? rng_int(rng, 3, 4) : rng_int(rng, 1, 2);
      break;
    case SyntheticVariant::bm_ms:
      spec.kind = MotifSpec::Kind::cycle;
      spec.size = anomalous ? rng_int(rng, 6, 9) : rng_int(rng, 3, 5);
      spec.count = 1;
      break;
  }
  return spec;
}

Graph gen_variant_graph(SyntheticVariant variant, bool anomalous, std::uint64_t graph_seed) {
  Rng rng(graph_seed);
  const MotifSpec spec = variant_motif(variant, anomalous, rng);
  Graph g = gen_motif_graph(spec, rng);
  g.label = anomalous ? 1 : 0;
  return g;
}

}  // namespace

DatasetBundle gen_synthetic(SyntheticVariant variant, int n_train, int n_test,
                            double anomaly_ratio, std::uint64_t seed) {
  if (n_train < 1 || n_test < 1)
    throw UsageError("gen_synthetic: n_train and n_test must be >= 1");
  if (!(anomaly_ratio > 0.0 && anomaly_ratio < 1.0))
    throw UsageError("gen_synthetic: anomaly_ratio must lie in (0, 1)");

  DatasetBundle bundle;
  bundle.name = variant_name(variant);
  bundle.seed = seed;
  bundle.train.reserve(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i)
    bundle.train.push_back(
        gen_variant_graph(variant, false, mix_seed(seed, kSaltTrain + static_cast<std::uint64_t>(i))));

  const int n_anom = static_cast<int>(std::ceil(anomaly_ratio * n_test));
  std::vector<std::uint8_t> anomalous(static_cast<std::size_t>(n_test), 0);
  std::fill(anomalous.begin(), anomalous.begin() + n_anom, std::uint8_t{1});
  Rng order_rng(mix_seed(seed, kSaltOrder));
  rng_shuffle(anomalous, order_rng);

  bundle.test.reserve(static_cast<std::size_t>(n_test));
  for (int i = 0; i < n_test; ++i)
    bundle.test.push_back(gen_variant_graph(
        variant, anomalous[static_cast<std::size_t>(i)] != 0,
        mix_seed(seed, kSaltTest + static_cast<std::uint64_t>(i))));
  return bundle;
}

// --- TU text format ---------------------------------------------------------

namespace {

namespace fs = std::filesystem;

std::vector<std::string> read_lines(const fs::path& path, bool mandatory) {
  std::ifstream in(path);
  if (!in) {
    if (mandatory) throw DataError("missing dataset file: " + path.string());
    return {};
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<double> parse_csv_doubles(const std::string& line, const fs::path& file, int lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": cannot parse '" + cell +
                      "'");
    }
  }
  return out;
}

long parse_long(const std::string& s, const fs::path& file, int lineno) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    return v;
  } catch (const std::exception&) {
    throw DataError(file.string() + ":" + std::to_string(lineno) + ": cannot parse '" + s + "'");
  }
}

}  // namespace

std::vector<Graph> load_tu_graphs(const std::string& dir, const std::string& name) {
  const fs::path base = fs::path(dir);
  const fs::path f_adj = base / (name + "_A.txt");
  const fs::path f_ind = base / (name + "_graph_indicator.txt");
  const fs::path f_lab = base / (name + "_graph_labels.txt");

  const auto indicator_lines = read_lines(f_ind, true);
  const auto label_lines = read_lines(f_lab, true);
  const auto adj_lines = read_lines(f_adj, true);

  const int total_nodes = static_cast<int>(indicator_lines.size());
  const int num_graphs = static_cast<int>(label_lines.size());

  // graph id per node, rebased to 0; node id within its graph
  std::vector<int> node_graph(static_cast<std::size_t>(total_nodes));
  std::vector<int> node_local(static_cast<std::size_t>(total_nodes));
  std::vector<int> graph_sizes(static_cast<std::size_t>(num_graphs), 0);
  for (int i = 0; i < total_nodes; ++i) {
    const long gid = parse_long(indicator_lines[static_cast<std::size_t>(i)], f_ind, i + 1);
    if (gid < 1 || gid > num_graphs)
      throw DataError(f_ind.string() + ":" + std::to_string(i + 1) + ": graph id " +
                      std::to_string(gid) + " out of range");
    node_graph[static_cast<std::size_t>(i)] = static_cast<int>(gid - 1);
    node_local[static_cast<std::size_t>(i)] = graph_sizes[static_cast<std::size_t>(gid - 1)]++;
  }

  std::vector<Graph> graphs(static_cast<std::size_t>(num_graphs));
  for (int gi = 0; gi < num_graphs; ++gi) {
    graphs[static_cast<std::size_t>(gi)].num_nodes = graph_sizes[static_cast<std::size_t>(gi)];
    graphs[static_cast<std::size_t>(gi)].label =
        static_cast<int>(parse_long(label_lines[static_cast<std::size_t>(gi)], f_lab, gi + 1));
  }

  // Undirected edges with stable first-appearance indexing; reversed or
  // duplicated lines collapse onto the same edge. Self-loop lines are
  // dropped (simple-graph model).
  std::vector<std::map<Edge, int>> edge_index(static_cast<std::size_t>(num_graphs));
  std::vector<int> edge_line_graph;  // per adj line owning graph (or -1 for skipped)
  std::vector<int> edge_line_index;  // per adj line edge index within the graph
  for (int ln = 0; ln < static_cast<int>(adj_lines.size()); ++ln) {
    if (adj_lines[static_cast<std::size_t>(ln)].empty()) {
      edge_line_graph.push_back(-1);
      edge_line_index.push_back(-1);
      continue;
    }
    const auto cells = parse_csv_doubles(adj_lines[static_cast<std::size_t>(ln)], f_adj, ln + 1);
    if (cells.size() != 2)
      throw DataError(f_adj.string() + ":" + std::to_string(ln + 1) + ": expected 'i, j'");
    const long ui = static_cast<long>(cells[0]), vi = static_cast<long>(cells[1]);
    if (ui < 1 || ui > total_nodes || vi < 1 || vi > total_nodes)
      throw DataError(f_adj.string() + ":" + std::to_string(ln + 1) + ": node index out of range");
    const int u = static_cast<int>(ui - 1), v = static_cast<int>(vi - 1);
    if (node_graph[static_cast<std::size_t>(u)] != node_graph[static_cast<std::size_t>(v)])
      throw DataError(f_adj.string() + ":" + std::to_string(ln + 1) +
                      ": edge endpoints belong to different graphs");
    const int gi = node_graph[static_cast<std::size_t>(u)];
    if (u == v) {
      edge_line_graph.push_back(-1);
      edge_line_index.push_back(-1);
      continue;
    }
    Graph& g = graphs[static_cast<std::size_t>(gi)];
    const Edge canon{std::min(node_local[static_cast<std::size_t>(u)],
                              node_local[static_cast<std::size_t>(v)]),
                     std::max(node_local[static_cast<std::size_t>(u)],
                              node_local[static_cast<std::size_t>(v)])};
    auto [it, inserted] =
        edge_index[static_cast<std::size_t>(gi)].emplace(canon, g.num_edges());
    if (inserted) g.edges.push_back(canon);
    edge_line_graph.push_back(gi);
    edge_line_index.push_back(it->second);
  }

  // Node features: one-hot node labels and/or raw attributes, concatenated.
  const auto nlabel_lines = read_lines(base / (name + "_node_labels.txt"), false);
  const auto nattr_lines = read_lines(base / (name + "_node_attributes.txt"), false);
  std::vector<int> nlabels;
  int label_lo = 0, label_hi = -1;
  if (!nlabel_lines.empty()) {
    if (static_cast<int>(nlabel_lines.size()) != total_nodes)
      throw DataError(name + "_node_labels.txt: expected " + std::to_string(total_nodes) +
                      " lines");
    nlabels.reserve(static_cast<std::size_t>(total_nodes));
    for (int i = 0; i < total_nodes; ++i)
      nlabels.push_back(static_cast<int>(
          parse_long(nlabel_lines[static_cast<std::size_t>(i)], base / (name + "_node_labels.txt"),
                     i + 1)));
    label_lo = *std::min_element(nlabels.begin(), nlabels.end());
    label_hi = *std::max_element(nlabels.begin(), nlabels.end());
  }
  std::vector<std::vector<double>> nattrs;
  if (!nattr_lines.empty()) {
    if (static_cast<int>(nattr_lines.size()) != total_nodes)
      throw DataError(name + "_node_attributes.txt: expected " + std::to_string(total_nodes) +
                      " lines");
    nattrs.reserve(static_cast<std::size_t>(total_nodes));
    for (int i = 0; i < total_nodes; ++i)
      nattrs.push_back(parse_csv_doubles(nattr_lines[static_cast<std::size_t>(i)],
                                         base / (name + "_node_attributes.txt"), i + 1));
  }
  const int onehot_dim = nlabels.empty() ? 0 : label_hi - label_lo + 1;
  const int attr_dim = nattrs.empty() ? 0 : static_cast<int>(nattrs[0].size());
  const int d_f = std::max(onehot_dim + attr_dim, 1);  // constant-1 feature fallback

  for (int gi = 0; gi < num_graphs; ++gi)
    graphs[static_cast<std::size_t>(gi)].node_features =
        Tensor(graphs[static_cast<std::size_t>(gi)].num_nodes, d_f);
  for (int i = 0; i < total_nodes; ++i) {
    Graph& g = graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(i)])];
    const int row = node_local[static_cast<std::size_t>(i)];
    int col = 0;
    if (onehot_dim > 0) g.node_features.at(row, nlabels[static_cast<std::size_t>(i)] - label_lo) = 1.0;
    col = onehot_dim;
    if (attr_dim > 0) {
      if (static_cast<int>(nattrs[static_cast<std::size_t>(i)].size()) != attr_dim)
        throw DataError(name + "_node_attributes.txt: ragged attribute row " +
                        std::to_string(i + 1));
      for (int k = 0; k < attr_dim; ++k)
        g.node_features.at(row, col + k) = nattrs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    if (onehot_dim == 0 && attr_dim == 0) g.node_features.at(row, 0) = 1.0;
  }

  // Optional ground-truth masks (this artifact's extension of the layout).
  const auto nmask_lines = read_lines(base / (name + "_gt_node_mask.txt"), false);
  if (!nmask_lines.empty()) {
    if (static_cast<int>(nmask_lines.size()) != total_nodes)
      throw DataError(name + "_gt_node_mask.txt: expected " + std::to_string(total_nodes) +
                      " lines");
    for (auto& g : graphs) g.gt_node_mask = std::vector<std::uint8_t>(
        static_cast<std::size_t>(g.num_nodes), 0);
    for (int i = 0; i < total_nodes; ++i) {
      const long v = parse_long(nmask_lines[static_cast<std::size_t>(i)],
                                base / (name + "_gt_node_mask.txt"), i + 1);
      (*graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(i)])].gt_node_mask)
          [static_cast<std::size_t>(node_local[static_cast<std::size_t>(i)])] =
          static_cast<std::uint8_t>(v != 0);
    }
  }
  const auto emask_lines = read_lines(base / (name + "_gt_edge_mask.txt"), false);
  if (!emask_lines.empty()) {
    for (auto& g : graphs)
      g.gt_edge_mask = std::vector<std::uint8_t>(g.edges.size(), 0);
    int mask_ln = 0;
    for (std::size_t ln = 0; ln < edge_line_graph.size(); ++ln) {
      if (edge_line_graph[ln] < 0) continue;  // skipped line owns no mask entry
      if (mask_ln >= static_cast<int>(emask_lines.size()))
        throw DataError(name + "_gt_edge_mask.txt: fewer lines than edges");
      const long v = parse_long(emask_lines[static_cast<std::size_t>(mask_ln)],
                                base / (name + "_gt_edge_mask.txt"), mask_ln + 1);
      auto& mask = *graphs[static_cast<std::size_t>(edge_line_graph[ln])].gt_edge_mask;
      if (v != 0) mask[static_cast<std::size_t>(edge_line_index[ln])] = 1;
      ++mask_ln;
    }
  }

  for (const Graph& g : graphs) validate_graph(g);
  return graphs;
}

void save_tu_graphs(const std::vector<Graph>& graphs, const std::string& dir,
                    const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base = fs::path(dir);

  std::ofstream adj(base / (name + "_A.txt"));
  std::ofstream ind(base / (name + "_graph_indicator.txt"));
  std::ofstream lab(base / (name + "_graph_labels.txt"));
  std::ofstream attr(base / (name + "_node_attributes.txt"));
  if (!adj || !ind || !lab || !attr) throw DataError("cannot write TU files under " + dir);

  const bool all_masks = std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) {
    return g.gt_node_mask.has_value() && g.gt_edge_mask.has_value();
  });
  std::ofstream nmask, emask;
  if (all_masks) {
    nmask.open(base / (name + "_gt_node_mask.txt"));
    emask.open(base / (name + "_gt_edge_mask.txt"));
  }

  char buf[64];
  int node_offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = graphs[gi];
    lab << (g.label ? *g.label : 0) << "\n";
    for (int i = 0; i < g.num_nodes; ++i) {
      ind << (gi + 1) << "\n";
      for (int k = 0; k < g.feature_dim(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", g.node_features.at(i, k));
        attr << (k ? ", " : "") << buf;
      }
      attr << "\n";
      if (all_masks) nmask << static_cast<int>((*g.gt_node_mask)[static_cast<std::size_t>(i)]) << "\n";
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      adj << (g.edges[e].first + node_offset + 1) << ", " << (g.edges[e].second + node_offset + 1)
          << "\n";
      if (all_masks) emask << static_cast<int>((*g.gt_edge_mask)[e]) << "\n";
    }
    node_offset += g.num_nodes;
  }
}

DatasetBundle make_split(const std::vector<Graph>& graphs, int normal_class,
                         double test_fraction, int anomaly_count, std::uint64_t seed) {
  std::vector<int> normals, anomalies;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (!graphs[i].label) throw DataError("make_split: graph " + std::to_string(i) + " has no label");
    (*graphs[i].label == normal_class ? normals : anomalies).push_back(static_cast<int>(i));
  }
  if (normals.empty() || anomalies.empty())
    throw UsageError("make_split: need at least one graph of each class");
  if (anomaly_count > static_cast<int>(anomalies.size()))
    throw UsageError("make_split: anomaly_count " + std::to_string(anomaly_count) +
                     " exceeds available " + std::to_string(anomalies.size()));

  Rng norm_rng(mix_seed(seed, kSaltSplitNorm));
  Rng anom_rng(mix_seed(seed, kSaltSplitAnom));
  rng_shuffle(normals, norm_rng);
  rng_shuffle(anomalies, anom_rng);

  const int n_test_norm = static_cast<int>(std::llround(test_fraction * normals.size()));
  DatasetBundle bundle;
  bundle.seed = seed;
  for (std::size_t k = 0; k < normals.size(); ++k) {
    Graph g = graphs[static_cast<std::size_t>(normals[k])];
    g.label = 0;
    if (static_cast<int>(k) < static_cast<int>(normals.size()) - n_test_norm)
      bundle.train.push_back(std::move(g));
    else
      bundle.test.push_back(std::move(g));
  }
  for (int k = 0; k < anomaly_count; ++k) {
    Graph g = graphs[static_cast<std::size_t>(anomalies[static_cast<std::size_t>(k)])];
    g.label = 1;
    bundle.test.push_back(std::move(g));
  }
  return bundle;
}

DatasetBundle load_tu_dataset(const std::string& dir, const std::string& name, int normal_class,
                              double test_fraction, double anomaly_fraction, std::uint64_t seed) {
  const std::vector<Graph> graphs = load_tu_graphs(dir, name);
  int num_anom = 0;
  for (const Graph& g : graphs)
    if (g.label && *g.label != normal_class) ++num_anom;
  const int anomaly_count = static_cast<int>(std::floor(anomaly_fraction * num_anom));
  DatasetBundle bundle =
      make_split(graphs, normal_class, test_fraction, std::max(anomaly_count, 1), seed);
  bundle.name = name;
  return bundle;
}

}  // namespace xglad

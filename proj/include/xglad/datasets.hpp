#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xglad/graph.hpp"
#include "xglad/rng.hpp"

namespace xglad {

// A prepared train/test pair. Training graphs are all normal; every test
// graph carries a label, and synthetic bundles carry ground-truth
// explanation masks on test graphs as well.
struct DatasetBundle {
  std::vector<Graph> train;
  std::vector<Graph> test;
  std::string name;
  std::uint64_t seed = 0;
};

enum class SyntheticVariant { bm_mt, bm_mn, bm_ms };

SyntheticVariant parse_variant(const std::string& name);  // "BM-MT" etc.
std::string variant_name(SyntheticVariant v);

enum class BaseKind { tree, ladder, wheel };

struct MotifSpec {
  enum class Kind { house, cycle } kind = Kind::house;
  int size = 0;   // cycle length; houses are fixed at 5 nodes / 6 edges
  int count = 1;  // number of motif copies
};

// Label-irrelevant scaffold: uniform random recursive tree, 2xk ladder, or
// hub-plus-rim wheel. Node features are attached later by the caller.
Graph gen_base(BaseKind kind, int size_lo, int size_hi, Rng& rng);

// One synthetic benchmark graph: a random base plus motifs, each attached by
// a single random bridge edge. gt masks mark exactly the motif nodes/edges;
// bridge edges are in neither mask. Features are one-hot degree, capped.
Graph gen_motif_graph(const MotifSpec& motif, Rng& rng);

// Degree cap for the one-hot degree features of synthetic graphs (d_f = 11).
inline constexpr int kDegreeFeatureCap = 10;

// Synthetic benchmark: variant rules select the motif content.
//   BM-MT  normal: 1 house        anomaly: one 5-cycle
//   BM-MN  normal: 1-2 houses     anomaly: 3-4 houses
//   BM-MS  normal: cycle of 3-5   anomaly: cycle of 6-9
// The test set holds ceil(anomaly_ratio * n_test) anomalies in a shuffled
// order; generation is a pure function of its arguments.
DatasetBundle gen_synthetic(SyntheticVariant variant, int n_train, int n_test,
                            double anomaly_ratio, std::uint64_t seed);

// --- TU text format ---------------------------------------------------------

// Loads <name>_A.txt (1-indexed "i, j" lines), <name>_graph_indicator.txt,
// <name>_graph_labels.txt and optional node labels / attributes /
// gt_node_mask / gt_edge_mask files. Node features are the one-hot node
// labels and raw attributes concatenated. Duplicate and reversed edge lines
// collapse onto one undirected edge; the first appearance fixes its index.
std::vector<Graph> load_tu_graphs(const std::string& dir, const std::string& name);

// Writes the TU layout for a list of graphs. Each undirected edge appears
// once as "i, j" with i < j; features go to <name>_node_attributes.txt;
// masks, when present on every graph, go to <name>_gt_node_mask.txt /
// <name>_gt_edge_mask.txt with one 0/1 line per node/edge.
void save_tu_graphs(const std::vector<Graph>& graphs, const std::string& dir,
                    const std::string& name);

// One-class split: train = the normal class minus a held-out test_fraction;
// test = held-out normals plus anomaly_count anomalies. Deterministic under
// a fixed seed.
DatasetBundle make_split(const std::vector<Graph>& graphs, int normal_class,
                         double test_fraction, int anomaly_count, std::uint64_t seed);

// load_tu_graphs followed by make_split with anomaly_count =
// floor(anomaly_fraction * |anomaly class|).
DatasetBundle load_tu_dataset(const std::string& dir, const std::string& name,
                              int normal_class = 0, double test_fraction = 0.2,
                              double anomaly_fraction = 0.2, std::uint64_t seed = 0);

}  // namespace xglad

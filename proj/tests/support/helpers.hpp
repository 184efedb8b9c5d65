#pragma once

#include <set>
#include <vector>

#include "xglad/graph.hpp"
#include "xglad/rng.hpp"
#include "xglad/tensor.hpp"

namespace xglad::testsupport {

inline Tensor random_tensor(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng_uniform(rng, lo, hi);
  return t;
}

inline Graph make_graph(int n, std::vector<Edge> edges, int feat_dim = 2) {
  Graph g;
  g.num_nodes = n;
  canonicalize_edges(edges);
  g.edges = std::move(edges);
  g.node_features = Tensor(n, feat_dim);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < feat_dim; ++k) g.node_features.at(i, k) = 0.1 * (i + 1) + 0.01 * k;
  return g;
}

// Connected random graph: a random spanning tree plus extra random edges.
inline Graph random_connected_graph(Rng& rng, int n_lo, int n_hi, int feat_dim = 3) {
  const int n = rng_int(rng, n_lo, n_hi);
  std::set<Edge> edges;
  for (int i = 1; i < n; ++i) {
    const int parent = static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(i)));
    edges.insert({std::min(parent, i), std::max(parent, i)});
  }
  const int extra = rng_int(rng, 0, n);
  for (int k = 0; k < extra; ++k) {
    const int a = rng_int(rng, 0, n - 1);
    const int b = rng_int(rng, 0, n - 1);
    if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
  }
  Graph g;
  g.num_nodes = n;
  g.edges.assign(edges.begin(), edges.end());
  g.node_features = random_tensor(n, feat_dim, rng);
  return g;
}

}  // namespace xglad::testsupport

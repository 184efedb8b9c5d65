#include <doctest.h>

#include <vector>

#include "support/helpers.hpp"
#include "xglad/graph.hpp"

using namespace xglad;
using testsupport::make_graph;
using testsupport::random_connected_graph;

TEST_CASE("validate_graph catches violations") {
  CHECK_THROWS_AS(validate_graph(make_graph(3, {{0, 0}})), UsageError);  // self-loop
  CHECK_THROWS_AS(validate_graph(make_graph(3, {{1, 2}, {2, 1}})), UsageError);  // duplicate
  CHECK_THROWS_AS(validate_graph(make_graph(3, {{0, 5}})), IndexError);

  // house motif: 4-cycle plus roof
  const Graph house = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {0, 4}, {1, 4}});
  CHECK_NOTHROW(validate_graph(house));
}

TEST_CASE("dht on a path") {
  const Graph path = make_graph(3, {{0, 1}, {1, 2}});
  const DualHypergraph dual = dht_transform(path);
  CHECK(dual.num_dual_nodes == 2);
  CHECK(dual.num_hyperedges == 3);
  // hyperedge of the middle node contains both dual nodes
  int b_degree = 0;
  for (const Edge& inc : dual.incidence) b_degree += (inc.first == 1) + (inc.second == 1);
  CHECK(b_degree == 2);
}

TEST_CASE("dht on a triangle") {
  const Graph tri = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  const DualHypergraph dual = dht_transform(tri);
  CHECK(dual.num_dual_nodes == 3);
  CHECK(dual.num_hyperedges == 3);
  std::vector<int> hyperedge_size(3, 0);
  for (const Edge& inc : dual.incidence) {
    ++hyperedge_size[static_cast<std::size_t>(inc.first)];
    ++hyperedge_size[static_cast<std::size_t>(inc.second)];
  }
  for (int s : hyperedge_size) CHECK(s == 2);
}

TEST_CASE("dht rejects edgeless graphs") {
  CHECK_THROWS_AS(dht_transform(make_graph(4, {})), DegenerateInputError);
}

TEST_CASE("dual features") {
  Graph g = make_graph(2, {{0, 1}});
  g.node_features = Tensor::from_rows({{1, 0}, {0, 1}});
  const Tensor d = build_dual_features(g);
  CHECK(d.at(0, 0) == 1.0);
  CHECK(d.at(0, 1) == 1.0);

  // explicit edge features pass through bit-identically
  g.edge_features = Tensor::from_rows({{0.25, -3.5, 7.0}});
  const Tensor e = build_dual_features(g);
  CHECK(e.same_storage(*g.edge_features));
  CHECK(e.at(0, 2) == 7.0);
}

TEST_CASE("dual features are endpoint-order invariant") {
  Graph a = make_graph(3, {{0, 2}});
  Graph b = make_graph(3, {{2, 0}});  // canonicalized to the same pair
  a.node_features = b.node_features;
  const Tensor da = build_dual_features(a);
  const Tensor db = build_dual_features(b);
  for (std::size_t i = 0; i < da.size(); ++i) CHECK(da.values()[i] == db.values()[i]);
}

TEST_CASE("dht properties on random graphs") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const Graph g = random_connected_graph(rng, 2, 14);
    const DualHypergraph dual = dht_transform(g);
    CHECK(dual.num_dual_nodes == g.num_edges());   // |V*| == |E|
    CHECK(dual.num_hyperedges == g.num_nodes);     // |E*| == |V|

    // incidence transpose roundtrip against the original node-edge incidence
    std::vector<std::vector<int>> orig(static_cast<std::size_t>(g.num_nodes),
                                       std::vector<int>(g.edges.size(), 0));
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      orig[static_cast<std::size_t>(g.edges[e].first)][e] = 1;
      orig[static_cast<std::size_t>(g.edges[e].second)][e] = 1;
    }
    std::vector<std::vector<int>> dual_inc(static_cast<std::size_t>(dual.num_dual_nodes),
                                           std::vector<int>(static_cast<std::size_t>(dual.num_hyperedges), 0));
    for (std::size_t e = 0; e < dual.incidence.size(); ++e) {
      dual_inc[e][static_cast<std::size_t>(dual.incidence[e].first)] = 1;
      dual_inc[e][static_cast<std::size_t>(dual.incidence[e].second)] = 1;
    }
    for (int v = 0; v < g.num_nodes; ++v)
      for (std::size_t e = 0; e < g.edges.size(); ++e)
        CHECK(orig[static_cast<std::size_t>(v)][e] == dual_inc[e][static_cast<std::size_t>(v)]);

    // every dual node touches exactly 2 hyperedges; hyperedge degree matches deg(v)
    std::vector<int> hyper_deg(static_cast<std::size_t>(g.num_nodes), 0);
    for (const Edge& inc : dual.incidence) {
      CHECK(inc.first != inc.second);
      ++hyper_deg[static_cast<std::size_t>(inc.first)];
      ++hyper_deg[static_cast<std::size_t>(inc.second)];
    }
    std::vector<int> deg(static_cast<std::size_t>(g.num_nodes), 0);
    for (const Edge& e : g.edges) {
      ++deg[static_cast<std::size_t>(e.first)];
      ++deg[static_cast<std::size_t>(e.second)];
    }
    for (int v = 0; v < g.num_nodes; ++v)
      CHECK(hyper_deg[static_cast<std::size_t>(v)] == deg[static_cast<std::size_t>(v)]);
  }
}

TEST_CASE("batching two paths") {
  const Graph p3 = make_graph(3, {{0, 1}, {1, 2}});
  const GraphBatch b = batch_graphs({p3, p3});
  CHECK(b.total_nodes() == 6);
  CHECK(b.total_edges() == 4);
  CHECK(b.node_segments == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(b.edge_segments == std::vector<int>{0, 0, 1, 1});
  CHECK(b.edges[2] == Edge{3, 4});
}

TEST_CASE("single-graph batch applies zero offset") {
  const Graph g = make_graph(4, {{0, 1}, {2, 3}});
  const GraphBatch b = batch_graphs({g});
  CHECK(b.edges == g.edges);
  for (std::size_t i = 0; i < g.node_features.size(); ++i)
    CHECK(b.node_features.values()[i] == g.node_features.values()[i]);
}

TEST_CASE("batch/unbatch roundtrip is exact") {
  Rng rng(555);
  std::vector<Graph> gs;
  for (int i = 0; i < 50; ++i) gs.push_back(random_connected_graph(rng, 2, 10));
  const std::vector<Graph> back = unbatch_graphs(batch_graphs(gs));
  REQUIRE(back.size() == gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    CHECK(back[i].num_nodes == gs[i].num_nodes);
    CHECK(back[i].edges == gs[i].edges);
    REQUIRE(back[i].node_features.size() == gs[i].node_features.size());
    for (std::size_t k = 0; k < gs[i].node_features.size(); ++k)
      CHECK(back[i].node_features.values()[k] == gs[i].node_features.values()[k]);
  }
}

TEST_CASE("batch rejects mixed feature dims") {
  const Graph a = make_graph(2, {{0, 1}}, 2);
  const Graph b = make_graph(2, {{0, 1}}, 3);
  CHECK_THROWS_AS(batch_graphs({a, b}), DimensionError);
}

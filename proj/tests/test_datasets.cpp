#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>

#include "support/helpers.hpp"
#include "xglad/datasets.hpp"

using namespace xglad;

namespace {

bool connected(const Graph& g) {
  if (g.num_nodes == 0) return false;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.num_nodes));
  for (const Edge& e : g.edges) {
    adj[static_cast<std::size_t>(e.first)].push_back(e.second);
    adj[static_cast<std::size_t>(e.second)].push_back(e.first);
  }
  std::vector<bool> seen(static_cast<std::size_t>(g.num_nodes), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int visited = 0;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    ++visited;
    for (int u : adj[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = true;
        q.push(u);
      }
  }
  return visited == g.num_nodes;
}

int mask_count(const std::vector<std::uint8_t>& mask) {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

bool graphs_equal(const Graph& a, const Graph& b) {
  if (a.num_nodes != b.num_nodes || a.edges != b.edges) return false;
  if (a.node_features.size() != b.node_features.size()) return false;
  for (std::size_t i = 0; i < a.node_features.size(); ++i)
    if (a.node_features.values()[i] != b.node_features.values()[i]) return false;
  if (a.label != b.label) return false;
  if (a.gt_node_mask != b.gt_node_mask || a.gt_edge_mask != b.gt_edge_mask) return false;
  return true;
}

}  // namespace

TEST_CASE("base graph shapes") {
  Rng rng(1);
  const Graph ladder = gen_base(BaseKind::ladder, 3, 3, rng);
  CHECK(ladder.num_nodes == 6);
  CHECK(ladder.num_edges() == 7);  // 3k - 2

  const Graph wheel = gen_base(BaseKind::wheel, 5, 5, rng);
  CHECK(wheel.num_nodes == 6);
  CHECK(wheel.num_edges() == 10);  // 2k

  for (int trial = 0; trial < 20; ++trial) {
    const Graph tree = gen_base(BaseKind::tree, 4, 12, rng);
    CHECK(tree.num_edges() == tree.num_nodes - 1);
    CHECK(connected(tree));
  }
  CHECK_NOTHROW(validate_graph(ladder));
  CHECK_NOTHROW(validate_graph(wheel));
}

TEST_CASE("BM-MT bundle shape and masks") {
  const DatasetBundle bundle = gen_synthetic(SyntheticVariant::bm_mt, 500, 200, 0.1, 42);
  CHECK(bundle.train.size() == 500);
  CHECK(bundle.test.size() == 200);

  int anomalies = 0;
  for (const Graph& g : bundle.test) anomalies += (*g.label == 1);
  CHECK(anomalies == 20);  // ceil(0.1 * 200)

  for (const Graph& g : bundle.train) {
    CHECK(*g.label == 0);
    REQUIRE(g.gt_node_mask.has_value());
    REQUIRE(g.gt_edge_mask.has_value());
    CHECK(mask_count(*g.gt_node_mask) == 5);  // house
    CHECK(mask_count(*g.gt_edge_mask) == 6);
  }
  for (const Graph& g : bundle.test) {
    // house and 5-cycle both have 5 nodes; edges differ (6 vs 5)
    CHECK(mask_count(*g.gt_node_mask) == 5);
    CHECK(mask_count(*g.gt_edge_mask) == (*g.label == 1 ? 5 : 6));
  }

  double mean_nodes = 0.0;
  for (const Graph& g : bundle.train) mean_nodes += g.num_nodes;
  mean_nodes /= static_cast<double>(bundle.train.size());
  CHECK(mean_nodes > 14.3 * 0.7);
  CHECK(mean_nodes < 14.3 * 1.3);
}

TEST_CASE("BM-MN anomaly motif arithmetic") {
  const DatasetBundle bundle = gen_synthetic(SyntheticVariant::bm_mn, 30, 40, 0.5, 7);
  for (const Graph& g : bundle.test) {
    const int nodes_marked = mask_count(*g.gt_node_mask);
    if (*g.label == 1)
      CHECK((nodes_marked == 15 || nodes_marked == 20));  // 3 or 4 houses
    else
      CHECK((nodes_marked == 5 || nodes_marked == 10));  // 1 or 2 houses
  }
}

TEST_CASE("BM-MS motif sizes") {
  const DatasetBundle bundle = gen_synthetic(SyntheticVariant::bm_ms, 20, 40, 0.5, 9);
  for (const Graph& g : bundle.test) {
    const int nodes_marked = mask_count(*g.gt_node_mask);
    const int edges_marked = mask_count(*g.gt_edge_mask);
    CHECK(nodes_marked == edges_marked);  // cycles
    if (*g.label == 1) {
      CHECK(nodes_marked >= 6);
      CHECK(nodes_marked <= 9);
    } else {
      CHECK(nodes_marked >= 3);
      CHECK(nodes_marked <= 5);
    }
  }
}

TEST_CASE("synthetic graphs are connected, valid, mask-consistent") {
  for (const SyntheticVariant v :
       {SyntheticVariant::bm_mt, SyntheticVariant::bm_mn, SyntheticVariant::bm_ms}) {
    const DatasetBundle bundle = gen_synthetic(v, 25, 25, 0.2, 123);
    std::vector<Graph> all = bundle.train;
    all.insert(all.end(), bundle.test.begin(), bundle.test.end());
    for (const Graph& g : all) {
      CHECK_NOTHROW(validate_graph(g));
      CHECK(connected(g));
      // every marked edge joins two marked nodes; bridges stay unmarked
      for (std::size_t e = 0; e < g.edges.size(); ++e)
        if ((*g.gt_edge_mask)[e]) {
          CHECK((*g.gt_node_mask)[static_cast<std::size_t>(g.edges[e].first)] == 1);
          CHECK((*g.gt_node_mask)[static_cast<std::size_t>(g.edges[e].second)] == 1);
        }
      CHECK(g.feature_dim() == kDegreeFeatureCap + 1);
    }
  }
}

TEST_CASE("generation is a pure function of the seed") {
  const DatasetBundle a = gen_synthetic(SyntheticVariant::bm_mt, 12, 8, 0.25, 99);
  const DatasetBundle b = gen_synthetic(SyntheticVariant::bm_mt, 12, 8, 0.25, 99);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(graphs_equal(a.train[i], b.train[i]));
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(graphs_equal(a.test[i], b.test[i]));

  const DatasetBundle c = gen_synthetic(SyntheticVariant::bm_mt, 12, 8, 0.25, 100);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train.size(); ++i)
    if (!graphs_equal(a.train[i], c.train[i])) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("TU write-then-read roundtrip") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "xglad_tu_roundtrip").string();
  fs::remove_all(dir);

  SUBCASE("one-graph toy directory") {
    Graph g = testsupport::make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 2}});
    g.label = 1;
    g.gt_node_mask = std::vector<std::uint8_t>{1, 1, 0, 0};
    g.gt_edge_mask = std::vector<std::uint8_t>{1, 0, 0, 0};
    save_tu_graphs({g}, dir, "toy");
    const std::vector<Graph> back = load_tu_graphs(dir, "toy");
    REQUIRE(back.size() == 1);
    CHECK(graphs_equal(back[0], g));
  }

  SUBCASE("synthetic bundle roundtrip with masks") {
    const DatasetBundle bundle = gen_synthetic(SyntheticVariant::bm_ms, 6, 5, 0.3, 4);
    save_tu_graphs(bundle.test, dir, "BM-MS_test");
    const std::vector<Graph> back = load_tu_graphs(dir, "BM-MS_test");
    REQUIRE(back.size() == bundle.test.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(graphs_equal(back[i], bundle.test[i]));
  }

  fs::remove_all(dir);
}

TEST_CASE("TU loader error reporting") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "xglad_tu_errors").string();
  fs::remove_all(dir);
  fs::create_directories(dir);

  CHECK_THROWS_WITH_AS(load_tu_graphs(dir, "nope"),
                       doctest::Contains("nope_graph_indicator.txt"), DataError);

  {
    std::ofstream(dir + "/bad_graph_indicator.txt") << "1\n1\n";
    std::ofstream(dir + "/bad_graph_labels.txt") << "0\n";
    std::ofstream(dir + "/bad_A.txt") << "1, 7\n";  // dangling node index
  }
  CHECK_THROWS_WITH_AS(load_tu_graphs(dir, "bad"), doctest::Contains("bad_A.txt:1"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("make_split counting and determinism") {
  std::vector<Graph> graphs;
  for (int i = 0; i < 12; ++i) {
    Graph g = testsupport::make_graph(3, {{0, 1}, {1, 2}});
    g.label = i < 10 ? 0 : 1;
    graphs.push_back(std::move(g));
  }

  const DatasetBundle split = make_split(graphs, 0, 0.5, 2, 77);
  CHECK(split.train.size() == 5);
  CHECK(split.test.size() == 7);
  int anomalies = 0;
  for (const Graph& g : split.test) anomalies += (*g.label == 1);
  CHECK(anomalies == 2);
  for (const Graph& g : split.train) CHECK(*g.label == 0);

  CHECK_THROWS_AS(make_split(graphs, 0, 0.5, 3, 77), UsageError);  // only 2 anomalies exist

  // membership identical under the same seed: compare via feature pointers
  const DatasetBundle again = make_split(graphs, 0, 0.5, 2, 77);
  for (std::size_t i = 0; i < split.train.size(); ++i)
    CHECK(split.train[i].node_features.same_storage(again.train[i].node_features));

  // different seeds shuffle membership at least once across 20 trials
  bool any_diff = false;
  for (int s = 0; s < 20 && !any_diff; ++s) {
    const DatasetBundle other = make_split(graphs, 0, 0.5, 2, 1000 + static_cast<std::uint64_t>(s));
    for (std::size_t i = 0; i < split.train.size(); ++i)
      if (!split.train[i].node_features.same_storage(other.train[i].node_features)) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("gen_synthetic rejects bad arguments") {
  CHECK_THROWS_AS(gen_synthetic(SyntheticVariant::bm_mt, 0, 5, 0.1, 1), UsageError);
  CHECK_THROWS_AS(gen_synthetic(SyntheticVariant::bm_mt, 5, 5, 0.0, 1), UsageError);
  CHECK_THROWS_AS(gen_synthetic(SyntheticVariant::bm_mt, 5, 5, 1.0, 1), UsageError);
  CHECK_THROWS_AS(parse_variant("BM-XX"), ConfigError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "qising/graph.hpp"
#include "qising/oracles.hpp"
#include "qising/rng.hpp"

using namespace qising;

namespace {

Graph path3() { return Graph(3, {{0, 1}, {1, 2}}); }
Graph triangle() { return Graph(3, {{0, 1}, {1, 2}, {0, 2}}); }
Graph star5() { return Graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}); }

Graph clique(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Graph(n, e);
}

Graph two_cliques_bridge() {
  std::vector<Edge> e;
  for (int base : {0, 5})
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) e.emplace_back(base + i, base + j);
  e.emplace_back(4, 5);
  return Graph(10, e);
}

LoadedGraph load(const std::string& text) {
  std::istringstream in(text);
  return load_edge_list(in);
}

}  // namespace

TEST_CASE("gen_sbm sizes and extremes") {
  const std::vector<int> full{187, 187, 63, 63};
  const auto sbm = gen_sbm(full, 0.1, 0.01, 11);
  CHECK(sbm.graph.node_count() == 500);
  CHECK(sbm.blocks.bin_count() == 4);
  CHECK(sbm.blocks.bin_size(0) == 187);
  CHECK(sbm.blocks.bin_size(3) == 63);

  const std::vector<int> one{3};
  const auto tri = gen_sbm(one, 1.0, 0.0, 1);
  CHECK(tri.graph.edge_count() == 3);

  const std::vector<int> two{2, 2};
  const auto empty = gen_sbm(two, 0.0, 0.0, 1);
  CHECK(empty.graph.node_count() == 4);
  CHECK(empty.graph.edge_count() == 0);
}

TEST_CASE("gen_sbm is bit-identical for a seed") {
  const std::vector<int> blocks{20, 20, 10};
  const auto a = gen_sbm(blocks, 0.3, 0.05, 99);
  const auto b = gen_sbm(blocks, 0.3, 0.05, 99);
  CHECK(a.graph.edges() == b.graph.edges());
  CHECK(a.blocks == b.blocks);
  const auto c = gen_sbm(blocks, 0.3, 0.05, 100);
  CHECK(a.graph.edges() != c.graph.edges());
}

TEST_CASE("load_edge_list examples") {
  auto g = load("0,1\n1,0\n1,2");
  CHECK(g.graph.node_count() == 3);
  CHECK(g.graph.edges() == std::vector<Edge>{{0, 1}, {1, 2}});

  g = load("5,7");
  CHECK(g.graph.node_count() == 2);
  CHECK(g.graph.edge_count() == 1);
  CHECK(g.original_ids == std::vector<long long>{5, 7});

  g = load("0,0\n0,1");
  CHECK(g.graph.node_count() == 2);
  CHECK(g.graph.edge_count() == 1);
  CHECK(g.dropped_self_loops == 1);

  g = load("# header\n\n3,4 # trailing\n");
  CHECK(g.graph.edge_count() == 1);
}

TEST_CASE("load_edge_list reports the malformed line") {
  try {
    load("0,1\nfoo\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load("0,1,2"), ParseError);
  CHECK_THROWS_AS(load("1,x"), ParseError);
}

TEST_CASE("edge list and partition round trip") {
  const std::vector<int> blocks{8, 8};
  const auto sbm = gen_sbm(blocks, 0.5, 0.1, 5);
  std::ostringstream out;
  write_edge_list(out, sbm.graph);
  std::istringstream in(out.str());
  const auto back = load_edge_list(in);
  std::set<std::pair<long long, long long>> original, reloaded;
  for (auto [u, v] : sbm.graph.edges()) original.emplace(u, v);
  for (auto [u, v] : back.graph.edges()) {
    long long a = back.original_ids[u], b = back.original_ids[v];
    reloaded.emplace(std::min(a, b), std::max(a, b));
  }
  CHECK(original == reloaded);

  std::ostringstream pout;
  write_partition(pout, sbm.blocks);
  std::istringstream pin(pout.str());
  CHECK(load_partition(pin, 16) == sbm.blocks);

  std::istringstream missing("0,0\n");
  CHECK_THROWS(load_partition(missing, 2));
}

TEST_CASE("edge_betweenness examples") {
  auto b = edge_betweenness(path3());
  CHECK(b.at({0, 1}) == doctest::Approx(2.0));
  CHECK(b.at({1, 2}) == doctest::Approx(2.0));

  b = edge_betweenness(Graph(2, {{0, 1}}));
  CHECK(b.at({0, 1}) == doctest::Approx(1.0));

  for (const auto& [e, v] : edge_betweenness(triangle())) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("edge_betweenness matches the brute-force oracle on small graphs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const int n = 2 + static_cast<int>(rng.below(7));
    const double p = 0.2 + 0.6 * rng.uniform();
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.bernoulli(p)) edges.emplace_back(i, j);
    const Graph g(n, edges);
    const auto fast = edge_betweenness(g);
    const auto slow = oracle::betweenness(g);
    REQUIRE(fast.size() == slow.size());
    for (const auto& [e, v] : slow) CHECK(fast.at(e) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("modularity examples") {
  const Graph two_triangles(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  CHECK(modularity(two_triangles, BinPartition({0, 0, 0, 1, 1, 1})) == doctest::Approx(0.5));
  CHECK(modularity(two_triangles, BinPartition({0, 0, 0, 0, 0, 0})) == doctest::Approx(0.0));
  CHECK(modularity(clique(4), BinPartition({0, 0, 1, 1})) == doctest::Approx(-1.0 / 6.0));
  CHECK_THROWS(modularity(Graph(3, {}), BinPartition({0, 0, 1})));
}

TEST_CASE("modularity stays in range and matches the pairwise formula") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const int n = 4 + static_cast<int>(rng.below(6));
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.bernoulli(0.5)) edges.emplace_back(i, j);
    if (edges.empty()) continue;
    const Graph g(n, edges);
    const int k = 1 + static_cast<int>(rng.below(3));
    std::vector<int> bins(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) bins[i] = i < k ? i : static_cast<int>(rng.below(k));
    const double q = modularity(g, BinPartition(bins));
    CHECK(q >= -0.5);
    CHECK(q <= 1.0);
    CHECK(q == doctest::Approx(oracle::modularity(g, bins)).epsilon(1e-12));
  }
}

TEST_CASE("detect_communities examples") {
  const auto two = detect_communities(two_cliques_bridge(), 1);
  REQUIRE(two.partition.bin_count() == 2);
  for (int v = 0; v < 5; ++v) CHECK(two.partition.bin_of(v) == two.partition.bin_of(0));
  for (int v = 5; v < 10; ++v) CHECK(two.partition.bin_of(v) == two.partition.bin_of(5));
  CHECK(two.partition.bin_of(0) != two.partition.bin_of(5));
  CHECK(two.best_modularity == doctest::Approx(oracle::exhaustive_modularity(two_cliques_bridge()).modularity));

  CHECK(detect_communities(clique(5), 1).partition.bin_count() == 1);
  CHECK(detect_communities(two_cliques_bridge(), 6).partition.bin_count() == 1);
  CHECK_THROWS(detect_communities(Graph(0, {}), 1));
}

TEST_CASE("detect_communities covers every node and respects min_size") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<int> blocks{6, 6, 3};
    const auto sbm = gen_sbm(blocks, 0.7, 0.05, seed);
    for (int min_size : {1, 4}) {
      const auto res = detect_communities(sbm.graph, min_size);
      CHECK(res.partition.node_count() == 15);
      if (res.partition.bin_count() > 1)
        for (int b = 0; b < res.partition.bin_count(); ++b) CHECK(res.partition.bin_size(b) >= min_size);
      for (int b = 1; b < res.partition.bin_count(); ++b)
        CHECK(res.partition.bin_size(b) <= res.partition.bin_size(b - 1));
    }
  }
}

TEST_CASE("degree examples") {
  CHECK(degree(star5(), 0) == 4);
  CHECK(degree(Graph(2, {}), 1) == 0);
  CHECK(degree(triangle(), 2) == 2);
  CHECK_THROWS(degree(triangle(), 3));
}

TEST_CASE("graph construction rejects bad edges") {
  CHECK_THROWS(Graph(2, {{0, 0}}));
  CHECK_THROWS(Graph(2, {{0, 1}, {1, 0}}));
  CHECK_THROWS(Graph(2, {{0, 2}}));
}

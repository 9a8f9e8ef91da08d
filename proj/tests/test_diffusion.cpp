#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "qising/diffusion.hpp"
#include "qising/oracles.hpp"

using namespace qising;

namespace {

SisConfig uniform_config(Graph g, int k, double spread, double churn) {
  std::vector<int> bins(static_cast<std::size_t>(g.node_count()));
  for (int i = 0; i < g.node_count(); ++i) bins[i] = i % k;
  return SisConfig(std::move(g), BinPartition(bins), std::vector<double>(k, spread), std::vector<double>(k, churn));
}

Graph path(int n) {
  std::vector<Edge> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph(n, e);
}

Controller random_bin(int k) {
  return [k](const Adoption&, int, Rng& rng) { return Treatment::in_bin(static_cast<int>(rng.below(k))); };
}

int adopted(const Adoption& y) { return std::accumulate(y.begin(), y.end(), 0); }

}  // namespace

TEST_CASE("step examples") {
  const auto config = uniform_config(path(4), 2, 0.5, 0.5);
  const SisState empty{Adoption(4, 0), 0};
  const auto r = step(empty, config, Treatment::none(), Rng(1));
  CHECK(r.state.adopted == empty.adopted);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.seeded);
  CHECK(r.state.t == 1);

  const auto certain_churn = uniform_config(path(4), 2, 0.0, 1.0);
  const auto c = step({Adoption{1, 1, 1, 1}, 0}, certain_churn, Treatment::none(), Rng(2));
  CHECK(adopted(c.state.adopted) == 0);
}

TEST_CASE("two adopted neighbours at spread 0.5 give adoption probability 0.75") {
  // Node 1 between adopted nodes 0 and 2; churn zero.
  const auto config = uniform_config(path(3), 1, 0.5, 0.0);
  const std::vector<double> rates{0.5, 0.5};
  const double expected = oracle::adoption_probability(rates);
  CHECK(expected == doctest::Approx(0.75));
  int hits = 0;
  const int runs = 40000;
  for (int s = 0; s < runs; ++s) hits += step({Adoption{1, 0, 1}, 0}, config, Treatment::none(), Rng(s)).state.adopted[1];
  const double freq = static_cast<double>(hits) / runs;
  CHECK(std::abs(freq - expected) < 4.0 * std::sqrt(expected * (1 - expected) / runs));
}

TEST_CASE("reward examples") {
  CHECK(reward(Adoption{1, 0, 1, 0}) == 0.5);
  CHECK(reward(Adoption{1, 1, 1}) == 1.0);
  CHECK(reward(Adoption{0, 0}) == 0.0);
  CHECK_THROWS(reward(Adoption{}));
}

TEST_CASE("step keeps length and binary entries") {
  const auto config = uniform_config(path(10), 3, 0.4, 0.3);
  SisState s{Adoption(10, 0), 0};
  Rng root(5);
  for (int t = 0; t < 50; ++t) {
    s = step(s, config, Treatment::in_bin(t % 3), root).state;
    REQUIRE(s.adopted.size() == 10);
    for (auto v : s.adopted) CHECK(v <= 1);
  }
}

TEST_CASE("without spread or churn only the seed is added") {
  const auto config = uniform_config(path(6), 2, 0.0, 0.0);
  const auto panel = generate_panel(config, random_bin(2), 5, 3);
  Adoption expect(6, 0);
  for (const auto& rec : panel.records) {
    const int before = adopted(expect);
    if (rec.action) expect[*rec.action] = 1;
    CHECK(rec.y == expect);
    CHECK(adopted(rec.y) <= before + 1);
  }
}

TEST_CASE("certain spread reaches everyone within the diameter") {
  const auto config = uniform_config(path(6), 1, 1.0, 0.0);
  SisState s{Adoption(6, 0), 0};
  s = step(s, config, Treatment{0, 0}, Rng(0)).state;  // seeds node 0 and spreads once
  for (int t = 1; t < 5; ++t) s = step(s, config, Treatment::none(), Rng(t)).state;
  CHECK(adopted(s.adopted) == 6);
}

TEST_CASE("a seeded node spreads in the same period") {
  const auto config = uniform_config(Graph(2, {{0, 1}}), 1, 1.0, 0.0);
  const auto r = step({Adoption{0, 0}, 0}, config, Treatment{0, 0}, Rng(9));
  CHECK(r.seeded == 0);
  CHECK(r.state.adopted == Adoption{1, 1});
}

TEST_CASE("forced nodes and full bins") {
  const auto config = uniform_config(path(4), 2, 0.0, 0.0);
  // Node 0 already adopted: forcing it seeds nothing.
  auto r = step({Adoption{1, 0, 0, 0}, 0}, config, Treatment{0, 0}, Rng(1));
  CHECK_FALSE(r.seeded);
  // Bin 0 = {0, 2} fully adopted: no seed.
  r = step({Adoption{1, 0, 1, 0}, 0}, config, Treatment::in_bin(0), Rng(1));
  CHECK_FALSE(r.seeded);
  CHECK_THROWS(step({Adoption(4, 0), 0}, config, Treatment::in_bin(2), Rng(1)));
  CHECK_THROWS(step({Adoption(4, 0), 0}, config, Treatment{1, 0}, Rng(1)));
  CHECK_THROWS(step({Adoption(3, 0), 0}, config, Treatment::none(), Rng(1)));
}

TEST_CASE("generate_panel is reproducible") {
  const auto config = uniform_config(path(8), 2, 0.3, 0.2);
  const auto a = generate_panel(config, random_bin(2), 1, 77);
  CHECK(a.periods() == 1);
  CHECK(a == generate_panel(config, random_bin(2), 1, 77));
  const auto b = generate_panel(config, random_bin(2), 40, 77);
  CHECK(b == generate_panel(config, random_bin(2), 40, 77));
  CHECK_FALSE(b == generate_panel(config, random_bin(2), 40, 78));
  CHECK_THROWS(generate_panel(config, random_bin(2), 0, 1));
}

TEST_CASE("panel rewards stay in range on an SBM") {
  const std::vector<int> blocks{20, 20, 10, 10};
  const auto sbm = gen_sbm(blocks, 0.1, 0.01, 4);
  const SisConfig config(sbm.graph, sbm.blocks, {0.010, 0.012, 0.1, 0.12}, {0.4, 0.4, 0.2, 0.2});
  const auto panel = generate_panel(config, random_bin(4), 100, 8);
  double mean = 0;
  for (int t = 1; t <= panel.periods(); ++t) mean += reward(panel.y(t));
  mean /= panel.periods();
  CHECK(mean > 0.0);
  CHECK(mean < 1.0);
}

TEST_CASE("panel JSONL round trip and errors") {
  const auto config = uniform_config(path(5), 2, 0.3, 0.2);
  const auto panel = generate_panel(config, random_bin(2), 12, 3);
  std::ostringstream out;
  write_panel(out, panel);
  std::istringstream in(out.str());
  CHECK(read_panel(in) == panel);

  auto bad = [](const std::string& text) {
    std::istringstream s(text);
    return read_panel(s);
  };
  CHECK_THROWS_AS(bad(""), ParseError);
  CHECK_THROWS_AS(bad("{\"t\":1,\"a\":null,\"y\":[0]}"), ParseError);
  CHECK_THROWS_AS(bad("{\"t\":0,\"y0\":[0,0]}\n{\"t\":1,\"a\":null,\"y\":[0]}"), ParseError);
  CHECK_THROWS_AS(bad("{\"t\":0,\"y0\":[0,0]}\n{\"t\":2,\"a\":null,\"y\":[0,0]}"), ParseError);
  CHECK_THROWS_AS(bad("{\"t\":0,\"y0\":[0,0]}\n{\"t\":1,\"a\":5,\"y\":[0,0]}"), ParseError);
  CHECK_THROWS_AS(bad("{\"t\":0,\"y0\":[0,0]}\nnot json"), ParseError);
}

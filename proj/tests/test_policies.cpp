#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "qising/policies.hpp"

using namespace qising;

namespace {

class FixedBin final : public Policy {
 public:
  explicit FixedBin(int bin) : bin_(bin) {}
  std::string kind() const override { return "fixed"; }
  Decision act(const Observation&, const Graph&, const BinPartition&, Rng&) const override { return {bin_, {}}; }

 private:
  int bin_;
};

Graph star5() { return Graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}); }

Graph cycle(int n) {
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i) e.emplace_back(std::min(i, (i + 1) % n), std::max(i, (i + 1) % n));
  return Graph(n, e);
}

}  // namespace

TEST_CASE("degree picks the star center") {
  const Graph g = star5();
  const BinPartition p({0, 1, 1, 0, 1});
  const Adoption none(5, 0);
  Rng rng(1);
  const auto d = DegreePolicy().act({none, 1, std::nullopt}, g, p, rng);
  CHECK(d.node == 0);
  CHECK(d.bin == 0);
  // Center adopted: falls to the lowest-id susceptible leaf.
  const Adoption center{1, 0, 0, 0, 0};
  CHECK(DegreePolicy().act({center, 1, std::nullopt}, g, p, rng).node == 1);
}

TEST_CASE("degree_bin rotates bins and treats the best susceptible member") {
  const Graph g = star5();
  const BinPartition p({0, 1, 1, 0, 1});
  const Adoption none(5, 0);
  Rng rng(1);
  const DegreeBinPolicy policy;
  for (int t = 1; t <= 4; ++t) {
    const auto d = policy.act({none, t, std::nullopt}, g, p, rng);
    CHECK(d.bin == (t - 1) % 2);
    REQUIRE(d.node);
    CHECK(p.bin_of(*d.node) == d.bin);
  }
  const Adoption center{1, 0, 0, 0, 0};
  CHECK(policy.act({center, 1, std::nullopt}, g, p, rng).node == 3);
}

TEST_CASE("lir_index examples") {
  CHECK(lir_index(star5()) == std::vector<int>{0, 1, 1, 1, 1});
  for (int v : lir_index(cycle(6))) CHECK(v == 0);
  CHECK(lir_index(Graph(3, {{0, 1}, {1, 2}})) == std::vector<int>{1, 0, 1});
}

TEST_CASE("lir schedule puts local leaders first") {
  const Graph g(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {3, 5}});
  const LirPolicy lir(g);
  const auto li = lir_index(g);
  const auto& order = lir.schedule();
  REQUIRE(order.size() == 6);
  CHECK(order.front() == 3);
  bool seen_follower = false;
  for (NodeId v : order) {
    if (li[v] > 0) seen_follower = true;
    else CHECK_FALSE(seen_follower);
  }
}

TEST_CASE("ensemble majority vote") {
  const Graph g = cycle(6);
  const BinPartition p({0, 1, 2, 0, 1, 2});
  const Adoption none(6, 0);
  Rng rng(2);
  const Observation obs{none, 1, std::nullopt};
  const EnsemblePolicy vote({std::make_shared<FixedBin>(2), std::make_shared<FixedBin>(2),
                             std::make_shared<FixedBin>(0)});
  CHECK(vote.votes(obs, g, p, rng) == std::vector<int>{1, 0, 2});
  CHECK(vote.act(obs, g, p, rng).bin == 2);

  const EnsemblePolicy tie({std::make_shared<FixedBin>(2), std::make_shared<FixedBin>(1)});
  CHECK(tie.act(obs, g, p, rng).bin == 1);

  std::vector<PolicyPtr> members{std::make_shared<FixedBin>(1), std::make_shared<FixedBin>(0),
                                 std::make_shared<FixedBin>(2), std::make_shared<FixedBin>(1),
                                 std::make_shared<FixedBin>(0)};
  const int expected = EnsemblePolicy(members).act(obs, g, p, rng).bin;
  std::sort(members.begin(), members.end());
  do {
    CHECK(EnsemblePolicy(members).act(obs, g, p, rng).bin == expected);
  } while (std::next_permutation(members.begin(), members.end()));
  CHECK_THROWS(EnsemblePolicy({}));
}

TEST_CASE("a one-member ensemble matches its member everywhere") {
  const std::vector<int> blocks{6, 6, 4};
  const auto sbm = gen_sbm(blocks, 0.5, 0.1, 3);
  const auto member = std::make_shared<DegreeBinPolicy>();
  const EnsemblePolicy solo({member});
  Rng data(4);
  for (int trial = 0; trial < 50; ++trial) {
    Adoption y(16);
    for (auto& v : y) v = data.bernoulli(0.3);
    const Observation obs{y, 1 + trial, std::nullopt};
    Rng r1(trial), r2(trial);
    CHECK(solo.act(obs, sbm.graph, sbm.blocks, r1).bin == member->act(obs, sbm.graph, sbm.blocks, r2).bin);
  }
}

TEST_CASE("baseline decisions are valid and avoid adopted nodes") {
  const std::vector<int> blocks{8, 8, 4};
  const auto sbm = gen_sbm(blocks, 0.4, 0.05, 7);
  const std::vector<PolicyPtr> policies{std::make_shared<RandomBinPolicy>(), std::make_shared<DegreePolicy>(),
                                        std::make_shared<DegreeBinPolicy>(), std::make_shared<LirPolicy>(sbm.graph)};
  Rng data(8);
  for (int trial = 0; trial < 100; ++trial) {
    Adoption y(20);
    for (auto& v : y) v = data.bernoulli(0.5);
    const Observation obs{y, 1 + trial, std::nullopt};
    for (const auto& policy : policies) {
      Rng a(trial), b(trial);
      const auto d = policy->act(obs, sbm.graph, sbm.blocks, a);
      CHECK(d.bin >= 0);
      CHECK(d.bin < 3);
      if (d.node) {
        CHECK(sbm.blocks.bin_of(*d.node) == d.bin);
        CHECK(y[*d.node] == 0);
      }
      const auto again = policy->act(obs, sbm.graph, sbm.blocks, b);
      CHECK(again.bin == d.bin);
      CHECK(again.node == d.node);
    }
  }
}

TEST_CASE("load_policy resolves baseline kinds") {
  const Graph g = star5();
  for (const char* kind : {"random_bin", "degree", "degree_bin", "lir"})
    CHECK(load_policy(Json{{"kind", kind}}, g)->kind() == kind);
  CHECK_THROWS(load_policy(Json{{"kind", "nope"}}, g));
  CHECK_THROWS(load_policy(Json{{"kind", "greedy_myopic"}}, g));
}

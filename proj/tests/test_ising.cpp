#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "qising/ising.hpp"
#include "qising/oracles.hpp"

using namespace qising;

namespace {

Graph star(int leaves) {
  std::vector<Edge> e;
  for (int i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return Graph(leaves + 1, e);
}

double normal_pdf(double x, double var) { return std::exp(-x * x / (2 * var)) / std::sqrt(2 * M_PI * var); }

struct Setup {
  Graph graph;
  BinPartition partition;
  IsingParams truth;
};

// K=2, 30 nodes, dense-ish ring lattice so couplings are identifiable.
Setup recovery_setup() {
  const int n = 30;
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int d = 1; d <= 2; ++d) e.emplace_back(std::min(i, (i + d) % n), std::max(i, (i + d) % n));
  std::vector<int> bins(n);
  for (int i = 0; i < n; ++i) bins[i] = i < n / 2 ? 0 : 1;
  IsingParams p(2);
  p.beta0 = {-2.0, -1.5};
  p.beta1 = {3.0, 3.0};
  p.beta2 = {1.5, 1.0};
  p.beta3 = {0.0, 0.0};
  p.gamma << 0.8, 0.0, 0.0, -0.7;
  return {Graph(n, e), BinPartition(bins), p};
}

}  // namespace

TEST_CASE("linear_predictor examples") {
  const Graph g = star(3);
  const BinPartition one({0, 0, 0, 0});
  const Adoption none(4, 0);
  IsingParams zero(1);
  CHECK(linear_predictor(zero, g, one, none, std::nullopt, 0) == 0.0);
  CHECK(sigmoid(0.0) == 0.5);

  IsingParams p(1);
  p.beta0 = {-1.0};
  p.beta1 = {2.0};
  CHECK(linear_predictor(p, g, one, none, NodeId{2}, 2) == doctest::Approx(1.0));

  // Center with three adopted leaves in bin 1.
  const BinPartition two({0, 1, 1, 1});
  IsingParams c(2);
  c.gamma(0, 1) = 0.4;
  CHECK(linear_predictor(c, g, two, Adoption{0, 1, 1, 1}, std::nullopt, 0) == doctest::Approx(1.2));
}

TEST_CASE("linear_predictor agrees with the loop oracle") {
  const auto s = recovery_setup();
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Adoption y(30);
    for (auto& v : y) v = rng.bernoulli(0.4);
    const std::optional<NodeId> action =
        trial % 3 == 0 ? std::nullopt : std::optional<NodeId>(static_cast<int>(rng.below(30)));
    const NodeId node = static_cast<int>(rng.below(30));
    CHECK(linear_predictor(s.truth, s.graph, s.partition, y, action, node) ==
          doctest::Approx(oracle::linear_predictor(s.truth, s.graph, s.partition, y, action, node)));
  }
}

TEST_CASE("log_likelihood examples") {
  const auto s = recovery_setup();
  const auto panel = simulate_ising_panel(s.truth, s.graph, s.partition, 7, 1);
  CHECK(log_likelihood(IsingParams(2), panel, s.graph, s.partition) == doctest::Approx(-30.0 * 7 * std::log(2.0)));

  // Single node adopting under a very large intercept: the term tends to 0.
  const Graph lone(1, {});
  const BinPartition p1({0});
  Panel single;
  single.y0 = {0};
  single.records.push_back({std::nullopt, {1}});
  IsingParams big(1);
  big.beta0 = {60.0};
  CHECK(std::abs(log_likelihood(big, single, lone, p1)) < 1e-20);

  // Two nodes, three periods, hand-set parameters against a term-by-term oracle.
  const Graph edge(2, {{0, 1}});
  const BinPartition p2({0, 1});
  Panel hand;
  hand.y0 = {0, 0};
  hand.records = {{NodeId{0}, {1, 0}}, {std::nullopt, {1, 1}}, {NodeId{1}, {0, 1}}};
  IsingParams h(2);
  h.beta0 = {-0.5, 0.3};
  h.beta1 = {1.2, 0.7};
  h.beta2 = {0.4, -0.2};
  h.beta3 = {0.1, 0.6};
  h.gamma << 0.2, -0.3, 0.5, 0.9;
  CHECK(log_likelihood(h, hand, edge, p2) == doctest::Approx(oracle::log_likelihood(h, hand, edge, p2)).epsilon(1e-13));
}

TEST_CASE("log_likelihood is invariant to node relabeling") {
  const auto s = recovery_setup();
  const auto panel = simulate_ising_panel(s.truth, s.graph, s.partition, 20, 2);
  const int n = 30;
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = (7 * i + 3) % n;
  std::vector<Edge> e;
  for (auto [u, v] : s.graph.edges()) e.emplace_back(perm[u], perm[v]);
  std::vector<int> bins(n);
  for (int i = 0; i < n; ++i) bins[perm[i]] = s.partition.bin_of(i);
  Panel q;
  auto relabel = [&](const Adoption& y) {
    Adoption out(n);
    for (int i = 0; i < n; ++i) out[perm[i]] = y[i];
    return out;
  };
  q.y0 = relabel(panel.y0);
  for (const auto& r : panel.records)
    q.records.push_back({r.action ? std::optional<NodeId>(perm[*r.action]) : std::nullopt, relabel(r.y)});
  CHECK(log_likelihood(s.truth, q, Graph(n, e), BinPartition(bins)) ==
        doctest::Approx(log_likelihood(s.truth, panel, s.graph, s.partition)).epsilon(1e-12));
}

TEST_CASE("aggregated likelihood equals the direct sum") {
  const auto s = recovery_setup();
  const auto panel = simulate_ising_panel(s.truth, s.graph, s.partition, 30, 4);
  const IsingData data(panel, s.graph, s.partition);
  CHECK(data.observation_count() == 30u * 30u);
  CHECK(data.log_likelihood(s.truth.flatten()) ==
        doctest::Approx(log_likelihood(s.truth, panel, s.graph, s.partition)).epsilon(1e-12));
  CHECK(IsingParams::unflatten(s.truth.flatten(), 2) == s.truth);
}

TEST_CASE("inclusion probability") {
  const double w = PriorSpec{}.inclusion_rate(50);
  CHECK(w == doctest::Approx(0.02));
  const double expected = w * normal_pdf(0, 10) / (w * normal_pdf(0, 10) + (1 - w) * normal_pdf(0, 0.01));
  CHECK(inclusion_probability(0.0, 0.01, 10.0, w) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(inclusion_probability(0.0, 0.01, 10.0, w) == doctest::Approx(6.45e-4).epsilon(1e-3));
  double prev = 0;
  for (double g = 0; g <= 0.9; g += 0.05) {
    const double p = inclusion_probability(g, 0.01, 10.0, w);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p >= prev);
    CHECK(p == doctest::Approx(inclusion_probability(-g, 0.01, 10.0, w)));
    prev = p;
  }
  CHECK(PriorSpec{}.inclusion_rate(1) == 1.0);
}

TEST_CASE("fit_emvs recovers signs of strong coefficients") {
  const auto s = recovery_setup();
  const auto panel = simulate_ising_panel(s.truth, s.graph, s.partition, 400, 11);
  const auto fit = fit_emvs(panel, s.graph, s.partition, PriorSpec{});
  CHECK(fit.converged);
  const auto& est = fit.params;
  for (int k = 0; k < 2; ++k) {
    CHECK(est.beta0[k] < 0);
    CHECK(est.beta1[k] > 0);
    CHECK(est.beta2[k] > 0);
  }
  CHECK(est.gamma(0, 0) > 0);
  CHECK(est.gamma(1, 1) < 0);
  for (std::size_t i = 0; i < fit.penalized_trace.size(); ++i)
    CHECK(fit.penalized_trace[i] >= fit.penalized_start_trace[i] - 1e-8);
  for (std::size_t i = 1; i < fit.log_posterior_trace.size(); ++i)
    CHECK(fit.log_posterior_trace[i] >= fit.log_posterior_trace[i - 1] - 1e-8);
  CHECK(fit.inclusion.minCoeff() > 0.0);
  CHECK(fit.inclusion.maxCoeff() <= 1.0);
}

TEST_CASE("fit_emvs shrinks toward zero without information") {
  const auto s = recovery_setup();
  Panel flat;
  flat.y0 = Adoption(30, 0);
  for (int t = 0; t < 5; ++t) flat.records.push_back({std::nullopt, Adoption(30, 0)});
  const auto fit = fit_emvs(flat, s.graph, s.partition, PriorSpec{});
  CHECK(fit.params.gamma.cwiseAbs().maxCoeff() < 1e-6);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(fit.params.beta1[k]) < 1e-6);
    CHECK(std::abs(fit.params.beta2[k]) < 1e-6);
  }
  CHECK_THROWS(fit_emvs(Panel{Adoption(30, 0), {{std::nullopt, Adoption(30, 0)}}}, s.graph, s.partition, PriorSpec{}));
}

TEST_CASE("log posterior gradient matches finite differences") {
  const auto s = recovery_setup();
  const auto panel = simulate_ising_panel(s.truth, s.graph, s.partition, 40, 5);
  const IsingData data(panel, s.graph, s.partition);
  const LogPosterior post(data, PriorSpec{});
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd theta(post.dimension());
    for (auto& v : theta) v = 0.8 * rng.normal();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    post.value_grad(theta, grad);
    const auto fd = oracle::central_difference([&](const Eigen::VectorXd& x) { return post.value(x); }, theta);
    CHECK((grad - fd).norm() / std::max(1.0, fd.norm()) < 1e-5);
  }
}

TEST_CASE("HMC recovers the prior when the likelihood is flat") {
  // Untreated, nobody adopted before: beta1..3 and gamma multiply zero covariates.
  const Graph g(2, {{0, 1}});
  const BinPartition p({0, 1});
  Panel panel;
  panel.y0 = {0, 0};
  panel.records.push_back({std::nullopt, {0, 1}});
  const PriorSpec priors;
  const auto draws = sample_posterior(panel, g, p, priors, 2000, 300, 21);
  CHECK_FALSE(draws.flagged);
  for (auto field : {&IsingParams::beta1, &IsingParams::beta2, &IsingParams::beta3}) {
    for (int k = 0; k < 2; ++k) {
      double mean = 0, sq = 0;
      for (const auto& d : draws.draws) mean += (d.*field)[k];
      mean /= draws.draws.size();
      for (const auto& d : draws.draws) sq += std::pow((d.*field)[k] - mean, 2);
      const double var = sq / (draws.draws.size() - 1);
      CHECK(std::abs(var - priors.tau2) < 0.3 * priors.tau2);
    }
  }
}

TEST_CASE("HMC is deterministic given the seed") {
  const auto s = recovery_setup();
  const auto panel = simulate_ising_panel(s.truth, s.graph, s.partition, 60, 6);
  const auto a = sample_posterior(panel, s.graph, s.partition, PriorSpec{}, 20, 50, 4);
  const auto b = sample_posterior(panel, s.graph, s.partition, PriorSpec{}, 20, 50, 4);
  REQUIRE(a.draws.size() == 20);
  for (std::size_t i = 0; i < a.draws.size(); ++i) CHECK(a.draws[i] == b.draws[i]);
  CHECK(a.step_size == b.step_size);
  CHECK_THROWS(sample_posterior(panel, s.graph, s.partition, PriorSpec{}, 0, 10, 4));
}

TEST_CASE("belief_no_intervention") {
  const auto s = recovery_setup();
  const Adoption none(30, 0);
  for (double v : belief_no_intervention(IsingParams(2), s.graph, s.partition, none)) CHECK(v == 0.5);
  IsingParams low(2);
  low.beta0 = {-10.0, -10.0};
  low.beta1 = {50.0, 50.0};
  for (double v : belief_no_intervention(low, s.graph, s.partition, none))
    CHECK(v == doctest::Approx(1.0 / (1.0 + std::exp(10.0))));
  CHECK(1.0 / (1.0 + std::exp(10.0)) == doctest::Approx(4.54e-5).epsilon(1e-3));
  Rng rng(2);
  Adoption y(30);
  for (auto& v : y) v = rng.bernoulli(0.5);
  for (double v : belief_no_intervention(s.truth, s.graph, s.partition, y)) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("build_state examples") {
  const BinPartition one({0, 0, 0});
  const std::vector<double> l0{0.2, 0.4, 0.6};
  auto st = build_state(l0, Adoption{1, 0, 0}, one);
  CHECK(st.l0_bar[0] == doctest::Approx(0.4));
  CHECK(st.y_bar[0] == doctest::Approx(1.0 / 3.0));

  const BinPartition singles({0, 1, 2});
  st = build_state(l0, Adoption{1, 0, 1}, singles);
  CHECK(st.l0_bar == l0);
  CHECK(st.y_bar == std::vector<double>{1, 0, 1});

  const BinPartition two({0, 1, 0, 1});
  st = build_state(std::vector<double>{0.1, 0.2, 0.3, 0.6}, Adoption{1, 1, 0, 1}, two);
  const auto v = st.concat();
  REQUIRE(v.size() == 4);
  CHECK(v[0] == doctest::Approx(0.2));
  CHECK(v[1] == doctest::Approx(0.4));
  CHECK(v[2] == doctest::Approx(0.5));
  CHECK(v[3] == doctest::Approx(1.0));
}

TEST_CASE("auc examples") {
  const std::vector<std::uint8_t> labels{1, 0, 1, 0};
  CHECK(auc(std::vector<double>{1, 0, 1, 0}, labels) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, labels) == 0.5);
  const std::vector<double> scores{0.9, 0.4, 0.35, 0.8};
  CHECK(auc(scores, labels) == doctest::Approx(oracle::pairwise_auc(scores, labels)));
  CHECK(auc(scores, labels) == doctest::Approx(0.5));
  CHECK_THROWS(auc(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{1, 1}));
}

TEST_CASE("one_step_auc is high for the true parameters") {
  const auto s = recovery_setup();
  const auto holdout = simulate_ising_panel(s.truth, s.graph, s.partition, 100, 12);
  CHECK(one_step_auc(s.truth, holdout, s.graph, s.partition) > 0.8);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qising/oracles.hpp"
#include "qising/pevi.hpp"
#include "qising/qnetwork.hpp"
#include "qising/transitions.hpp"

using namespace qising;

namespace {

QIsingState state(std::vector<double> l0, std::vector<double> y) { return {std::move(l0), std::move(y)}; }

/// Sets every weight and bias to zero so Q is identically zero.
QFunction zero_q(int dim, int actions) {
  QFunction q(dim, {4}, actions, 1);
  std::vector<double> flat(q.parameter_count(), 0.0);
  q.set_parameters(flat);
  return q;
}

/// One state, two actions: action 0 pays 1, action 1 pays 0; terminal-like self loop.
std::vector<Transition> bandit_dataset() {
  const auto s = state({0.5, 0.5}, {0.5, 0.5});
  std::vector<Transition> data;
  for (int i = 0; i < 32; ++i) data.push_back({s, i % 2, i % 2 == 0 ? 1.0 : 0.0, s});
  return data;
}

CqlHyper small_hyper() {
  CqlHyper h;
  h.hidden = {16, 16};
  h.batch_size = 16;
  h.learning_rate = 1e-2;
  h.dropout = 0.0;
  h.max_steps = 1500;
  h.steps_per_epoch = 100;
  return h;
}

}  // namespace

TEST_CASE("build_transitions length and reward range") {
  const Graph g(3, {{0, 1}, {1, 2}});
  const BinPartition p({0, 0, 1});
  Panel panel;
  panel.y0 = {0, 0, 0};
  panel.records = {{NodeId{0}, {1, 0, 0}}, {NodeId{2}, {1, 1, 1}}, {std::nullopt, {0, 1, 1}}};
  const auto set = build_transitions(panel, IsingParams(2), g, p);
  CHECK(set.transitions.size() + set.skipped_no_action <= 2);
  for (const auto& tr : set.transitions) {
    CHECK(tr.r >= 0.0);
    CHECK(tr.r <= 1.0);
    for (double v : tr.s.l0_bar) CHECK(v == 0.5);
  }
}

TEST_CASE("build_transitions on a hand panel") {
  const Graph g(2, {{0, 1}});
  const BinPartition p({0, 1});
  Panel panel;
  panel.y0 = {0, 0};
  panel.records = {{NodeId{0}, {1, 0}}, {NodeId{1}, {1, 1}}, {NodeId{0}, {0, 1}}};
  IsingParams h(2);
  h.beta0 = {-1.0, -0.5};
  h.beta2 = {0.8, 0.3};
  h.gamma << 0.0, 0.6, 1.1, 0.0;
  const auto set = build_transitions(panel, h, g, p);
  REQUIRE(set.transitions.size() == 2);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  // t = 1: state from y0 = (0,0), action in bin 0, reward y_1, next from y_1 = (1,0).
  const auto& t1 = set.transitions[0];
  CHECK(t1.b == 0);
  CHECK(t1.r == doctest::Approx(0.5));
  CHECK(t1.s.l0_bar[0] == doctest::Approx(sig(-1.0)));
  CHECK(t1.s.l0_bar[1] == doctest::Approx(sig(-0.5)));
  CHECK(t1.s_next.l0_bar[0] == doctest::Approx(sig(-1.0 + 0.8)));
  CHECK(t1.s_next.l0_bar[1] == doctest::Approx(sig(-0.5 + 1.1)));
  CHECK(t1.s_next.y_bar == std::vector<double>{1.0, 0.0});
  const auto& t2 = set.transitions[1];
  CHECK(t2.b == 1);
  CHECK(t2.r == doctest::Approx(1.0));
  CHECK(t2.s == t1.s_next);
  CHECK(t2.s_next.l0_bar[0] == doctest::Approx(sig(-1.0 + 0.8 + 0.6)));
  CHECK(t2.s_next.l0_bar[1] == doctest::Approx(sig(-0.5 + 0.3 + 1.1)));

  const auto plain = build_transitions(panel, StateBuilder::plain(), g, p);
  CHECK(plain.transitions[0].s_next.l0_bar == plain.transitions[0].s_next.y_bar);
}

TEST_CASE("cql_loss examples") {
  const auto q0 = zero_q(2, 3);
  const std::vector<Transition> one{{state({0.1}, {0.2}), 1, 0.5, state({0.3}, {0.4})}};
  const Batch batch = make_batch(one);
  const auto parts = cql_loss(q0, batch, q0, 0.0, 0.8);
  CHECK(parts.bellman == doctest::Approx(0.25));
  CHECK(parts.total == doctest::Approx(0.25));
  CHECK(parts.penalty == doctest::Approx(std::log(3.0)));
  CHECK(cql_loss(q0, batch, q0, 2.0, 0.8).total == doctest::Approx(0.25 + 2.0 * std::log(3.0)));

  QFunction q(2, {8}, 3, 5), target(2, {8}, 3, 6);
  std::vector<Transition> data;
  Rng rng(1);
  for (int i = 0; i < 10; ++i)
    data.push_back({state({rng.uniform()}, {rng.uniform()}), static_cast<int>(rng.below(3)), rng.uniform(),
                    state({rng.uniform()}, {rng.uniform()})});
  const Batch b = make_batch(data);
  const auto a0 = cql_loss(q, b, target, 0.0, 0.8);
  CHECK(a0.total == doctest::Approx(a0.bellman));
  CHECK(a0.penalty >= 0.0);
}

TEST_CASE("Q-network gradient matches finite differences") {
  QFunction q(4, {6, 5}, 2, 3), target(4, {6, 5}, 2, 4);
  std::vector<Transition> data;
  Rng rng(2);
  for (int i = 0; i < 8; ++i)
    data.push_back({state({rng.uniform(), rng.uniform()}, {rng.uniform(), rng.uniform()}),
                    static_cast<int>(rng.below(2)), rng.uniform(),
                    state({rng.uniform(), rng.uniform()}, {rng.uniform(), rng.uniform()})});
  const Batch b = make_batch(data);
  std::vector<DenseLayer> grads;
  cql_loss_grad(q, b, target, 0.5, 0.8, grads);
  Eigen::VectorXd analytic(static_cast<Eigen::Index>(q.parameter_count()));
  Eigen::Index at = 0;
  for (const auto& layer : grads) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) analytic(at++) = layer.weight(r, c);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) analytic(at++) = layer.bias(r);
  }
  const auto flat = q.parameters();
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  const auto fd = oracle::central_difference(
      [&](const Eigen::VectorXd& theta) {
        QFunction probe = q;
        probe.set_parameters(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
        return cql_loss(probe, b, target, 0.5, 0.8).total;
      },
      x, 1e-6);
  CHECK((analytic - fd).norm() / fd.norm() < 1e-4);
}

TEST_CASE("train_cql prefers the paying action and is deterministic") {
  const auto data = bandit_dataset();
  const auto hyper = small_hyper();
  CqlReport report;
  const auto q = train_cql(data, hyper, 9, &report);
  const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
  CHECK(q.greedy_action(s) == 0);
  CHECK(report.steps > 0);
  const auto again = train_cql(data, hyper, 9);
  CHECK(q == again);
  CHECK_THROWS(train_cql(std::vector<Transition>{}, hyper, 1));
}

TEST_CASE("feature_map examples") {
  const auto zero = state({0.0, 0.0}, {0.0, 0.0});
  const auto phi = feature_map(zero, 0);
  REQUIRE(phi.size() == feature_dim(2));
  CHECK(phi(0) == doctest::Approx(1.0 / std::sqrt(5.0)));
  CHECK(phi.tail(phi.size() - 1).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto s = state({rng.uniform(), rng.uniform()}, {rng.uniform(), rng.uniform()});
    CHECK(feature_map(s, 0).norm() <= 1.0 + 1e-12);
    CHECK(feature_map(s, 0).dot(feature_map(s, 1)) == 0.0);
  }
  CHECK(feature_map(state({1, 1}, {1, 1}), 1).norm() == doctest::Approx(1.0));
}

TEST_CASE("train_pevi examples") {
  const int d = 3;
  const std::vector<std::vector<StageSample>> empty(2);
  const auto none = train_pevi(empty, d, 1.0, 0.7);
  Eigen::VectorXd e0 = Eigen::VectorXd::Unit(d, 0);
  CHECK(none.q_value(1, e0) == 0.0);
  CHECK(none.q_value(2, e0) == 0.0);

  StageSample sample{e0, 1.0, {}};
  const auto single = train_pevi({{sample}}, d, 1.0, 0.0);
  CHECK(single.weights()[0](0) == doctest::Approx(0.5));
  CHECK(single.weights()[0].tail(d - 1).norm() == 0.0);
  CHECK_THROWS(train_pevi(empty, d, 0.0, 0.7));
}

TEST_CASE("PEVI clipping and pessimism monotonicity") {
  Rng rng(4);
  const int H = 3, d = 6;
  std::vector<std::vector<StageSample>> stages(H);
  for (int h = 0; h < H; ++h) {
    for (int i = 0; i < 40; ++i) {
      Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
      phi(static_cast<Eigen::Index>(rng.below(d))) = 1.0;
      StageSample s{phi, 3.0 * rng.uniform(), {}};
      if (h + 1 < H) s.next_phis = {Eigen::VectorXd::Unit(d, 0), Eigen::VectorXd::Unit(d, 1)};
      stages[h].push_back(s);
    }
  }
  std::vector<PeviPolicy> policies;
  for (double beta : {0.0, 0.5, 2.0, 10.0}) policies.push_back(train_pevi(stages, d, 1.0, beta));
  for (int h = 1; h <= H; ++h) {
    for (int i = 0; i < d; ++i) {
      const Eigen::VectorXd phi = Eigen::VectorXd::Unit(d, i);
      double prev = INFINITY;
      for (const auto& p : policies) {
        const double q = p.q_value(h, phi);
        CHECK(q >= 0.0);
        CHECK(q <= H - h + 1);
        CHECK(q <= prev + 1e-12);
        prev = q;
      }
    }
  }
}

TEST_CASE("pevi_bonus examples") {
  Eigen::VectorXd phi = Eigen::VectorXd::Unit(3, 1);
  CHECK(pevi_bonus(phi, Eigen::MatrixXd::Identity(3, 3), 2.5) == doctest::Approx(2.5));
  CHECK(pevi_bonus(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 2.5) == 0.0);
  CHECK(pevi_bonus(phi, 4.0 * Eigen::MatrixXd::Identity(3, 3), 2.5) == doctest::Approx(1.25));
}

TEST_CASE("pevi_uncertainty examples") {
  const int d = 2;
  const double lambda = 4.0;
  const std::vector<Eigen::MatrixXd> iso(2, lambda * Eigen::MatrixXd::Identity(d, d));
  Eigen::VectorXd a(d), b(d);
  a << 0.6, 0.8;
  b << 0.3, 0.0;
  const std::vector<std::vector<Eigen::VectorXd>> trajs{{a, b}, {b, b}};
  const double expected = ((a.norm() + b.norm()) + (b.norm() + b.norm())) / 2.0 / std::sqrt(lambda);
  CHECK(pevi_uncertainty(trajs, iso) == doctest::Approx(expected));

  // Richer data never increases the uncertainty.
  std::vector<Eigen::MatrixXd> grown = iso;
  grown[0] += a * a.transpose();
  grown[1] += 3.0 * b * b.transpose();
  CHECK(pevi_uncertainty(trajs, grown) <= pevi_uncertainty(trajs, iso));

  const std::vector<Eigen::MatrixXd> one{Eigen::MatrixXd::Identity(d, d)};
  CHECK(pevi_uncertainty({{a}}, one) == doctest::Approx(1.0));
}

TEST_CASE("bonus_beta_from_radius examples") {
  CHECK(bonus_beta_from_radius(1, 1, 0, 1, 0.5, 0, 1) == doctest::Approx(std::sqrt(std::log(2.0))));
  const double delta = 0.2, W = 3.0;
  CHECK(bonus_beta_from_radius(1, 1, 0, 1, delta, W, 2.0) ==
        doctest::Approx(2.0 * (std::sqrt(std::log(1 / delta)) + W)));
  double prev = 0;
  for (double n : {0.0, 1.0, 10.0, 1000.0}) {
    const double b = bonus_beta_from_radius(5, 6, n, 1, 0.05, 1, 1);
    CHECK(b >= prev);
    prev = b;
  }
  CHECK_THROWS(bonus_beta_from_radius(1, 1, 0, 1, 1.0, 0, 1));
  CHECK_THROWS(bonus_beta_from_radius(1, 1, 0, 1, 0.0, 0, 1));
}

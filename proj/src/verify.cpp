#include "qising/verify.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "qising/diffusion.hpp"
#include "qising/graph.hpp"
#include "qising/ising.hpp"
#include "qising/oracles.hpp"
#include "qising/pevi.hpp"
#include "qising/policies.hpp"
#include "qising/qnetwork.hpp"
#include "qising/theory.hpp"
#include "qising/tiny_mdp.hpp"

namespace qising {

namespace {

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && passed) {
      passed = false;
      detail << "FAILED: " << what << "; ";
    }
  }
};

using CheckFn = void (*)(Outcome&, std::uint64_t seed);

Graph random_graph(Rng& rng, int n, double p) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  return Graph(n, std::move(edges));
}

BinPartition random_partition(Rng& rng, int n, int k) {
  std::vector<int> bins(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) bins[static_cast<std::size_t>(i)] = i < k ? i : static_cast<int>(rng.below(k));
  return BinPartition(std::move(bins));
}

IsingParams random_params(Rng& rng, int k, double scale) {
  IsingParams p(k);
  for (int b = 0; b < k; ++b) {
    const auto bb = static_cast<std::size_t>(b);
    p.beta0[bb] = scale * (2.0 * rng.uniform() - 1.0) - 1.0;
    p.beta1[bb] = scale * (2.0 * rng.uniform() - 1.0);
    p.beta2[bb] = scale * (2.0 * rng.uniform() - 1.0);
    p.beta3[bb] = scale * (2.0 * rng.uniform() - 1.0);
    for (int m = 0; m < k; ++m) p.gamma(b, m) = scale * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

/// A small simulated Ising panel shared by the inference checks.
struct IsingFixture {
  Graph graph;
  BinPartition partition;
  IsingParams truth;
  Panel panel;
};

IsingFixture ising_fixture(std::uint64_t seed, int periods) {
  const std::vector<int> blocks{10, 10, 10};
  auto sbm = gen_sbm(blocks, 0.3, 0.05, seed);
  IsingParams truth(3);
  for (int b = 0; b < 3; ++b) {
    const auto bb = static_cast<std::size_t>(b);
    truth.beta0[bb] = -2.0;
    truth.beta1[bb] = 3.0;
    truth.beta2[bb] = 1.5;
    truth.beta3[bb] = 0.5;
    truth.gamma(b, b) = 0.8;
  }
  truth.gamma(0, 1) = -0.6;
  truth.gamma(2, 0) = 0.6;
  Panel panel = simulate_ising_panel(truth, sbm.graph, sbm.blocks, periods, derive_seed(seed, "panel"));
  return {std::move(sbm.graph), std::move(sbm.blocks), std::move(truth), std::move(panel)};
}

// ---------------------------------------------------------------------------
// Theory oracles

void check_greedy_counterexample(Outcome& out, std::uint64_t) {
  for (double rho : {0.0, 0.25, 0.5, 0.9}) {
    const TinyMdp mdp = greedy_counterexample_mdp(rho);
    const auto best = solve_optimal(mdp);
    const StageRule treat_c_then_a = [](int h, int) { return h == 1 ? 2 : 0; };
    const StageRule greedy = [&](int, int s) {
      int arg = 0;
      for (int a = 1; a < mdp.action_count(s); ++a) {
        if (mdp.rewards[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] >
            mdp.rewards[static_cast<std::size_t>(s)][static_cast<std::size_t>(arg)]) {
          arg = a;
        }
      }
      return arg;
    };
    const double v_opt = exact_policy_value(mdp, treat_c_then_a);
    const double v_greedy = exact_policy_value(mdp, greedy);
    out.require(std::abs(best.value() - (3.0 + rho)) < 1e-12, "optimal value 3+rho");
    out.require(std::abs(v_opt - (3.0 + rho)) < 1e-12, "treat C then A gives 3+rho");
    out.require(std::abs(v_greedy - (2.0 + 2.0 * rho)) < 1e-12, "greedy gives 2+2rho");
    out.require(std::abs((v_opt - v_greedy) - (1.0 - rho)) < 1e-12, "gap 1-rho");
    out.detail << "rho=" << rho << " opt=" << v_opt << " greedy=" << v_greedy << "; ";
  }
}

void check_counterexample_monte_carlo(Outcome& out, std::uint64_t seed) {
  for (double rho : {0.0, 0.25, 0.5, 0.9}) {
    const NodeRule optimal = [](int h, const Adoption&) { return h == 1 ? 2 : 0; };
    const NodeRule greedy = [](int h, const Adoption&) { return h == 1 ? 0 : 1; };
    const auto mc_opt = counterexample_rollout(rho, optimal, 100000, derive_seed(seed, "optimal"));
    const auto mc_greedy = counterexample_rollout(rho, greedy, 100000, derive_seed(seed, "greedy"));
    auto within = [](const MonteCarloEstimate& e, double exact) {
      return std::abs(e.mean - exact) <= 3.0 * e.std_error + 1e-12;
    };
    out.require(within(mc_opt, 3.0 + rho), "Monte Carlo optimal within 3 SE");
    out.require(within(mc_greedy, 2.0 + 2.0 * rho), "Monte Carlo greedy within 3 SE");
    out.detail << "rho=" << rho << " mc_opt=" << mc_opt.mean << " mc_greedy=" << mc_greedy.mean << "; ";
  }
}

void check_stationary(Outcome& out, std::uint64_t) {
  const auto res = synchronous_stationary(4, 1.0, 0.0);
  const double expected[] = {1.860, 2.247, 2.549, 2.765};
  const double diffs[] = {0.387, 0.302, 0.216};
  for (int m = 0; m < 4; ++m) {
    out.require(std::abs(res.delta[static_cast<std::size_t>(m)] - expected[m]) < 5e-4, "delta to 3 decimals");
  }
  for (int m = 0; m < 3; ++m) {
    const double d = res.delta[static_cast<std::size_t>(m + 1)] - res.delta[static_cast<std::size_t>(m)];
    out.require(std::abs(d - diffs[m]) < 5e-4, "successive difference to 3 decimals");
  }
  out.require(res.residual < 1e-10, "stationary residual");
  for (Eigen::Index r = 0; r < res.kernel.rows(); ++r) {
    out.require(std::abs(res.kernel.row(r).sum() - 1.0) < 1e-12, "kernel rows sum to 1");
  }
  out.require(std::abs(res.distribution.sum() - 1.0) < 1e-12, "mu sums to 1");
  for (int s = 0; s < 16; ++s) {
    for (int u = 0; u < 16; ++u) {
      if (std::popcount(static_cast<unsigned>(s)) == std::popcount(static_cast<unsigned>(u))) {
        out.require(std::abs(res.distribution(s) - res.distribution(u)) < 1e-12, "mu is permutation symmetric");
      }
    }
  }
  out.detail << "delta=(" << res.delta[0] << ", " << res.delta[1] << ", " << res.delta[2] << ", " << res.delta[3]
             << ") residual=" << res.residual;
}

void check_self_normalized(Outcome& out, std::uint64_t seed) {
  CoverageConfig cfg;
  cfg.seed = derive_seed(seed, "coverage");
  const auto rep = self_normalized_coverage(cfg);
  out.require(rep.rate() >= 0.95, "coverage >= 95%");
  out.detail << "coverage=" << rep.rate() << " C=" << rep.constant << " radius=" << rep.radius
             << " max_norm=" << rep.max_norm;
}

void check_pevi_suboptimality(Outcome& out, std::uint64_t seed) {
  SuboptimalityConfig cfg;
  cfg.seed = derive_seed(seed, "suboptimality");
  const auto rep = pevi_suboptimality(cfg);
  out.require(rep.rate() >= 0.95, "bound holds in >= 95% of trials");
  double worst = 0.0;
  for (const auto& t : rep.trials) worst = std::max(worst, t.suboptimality);
  out.detail << "holding=" << rep.holding() << "/" << rep.trials.size() << " worst_gap=" << worst
             << " beta=" << rep.trials.front().bonus_beta;
}

void check_simulation_lemma(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "simulation-lemma"));
  for (int trial = 0; trial < 50; ++trial) {
    const TinyMdp a = random_tabular_mdp(4, 3, 5, rng);
    const TinyMdp same = a;
    TinyMdp shifted = a;
    const double eps = 0.1 * rng.uniform();
    for (auto& row : shifted.rewards) {
      for (auto& r : row) r += (rng.bernoulli(0.5) ? 1.0 : -1.0) * eps * rng.uniform();
    }
    const StageRule rule = [trial](int h, int s) { return (h + s + trial) % 3; };
    const double va = exact_policy_value(a, rule);
    out.require(std::abs(va - exact_policy_value(same, rule)) == 0.0, "identical MDPs give equal values");
    out.require(std::abs(va - exact_policy_value(shifted, rule)) <= a.horizon * eps + 1e-12, "reward shift <= H eps");
  }
}

// ---------------------------------------------------------------------------
// graph

void check_betweenness(Outcome& out, std::uint64_t seed) {
  const Rng root(derive_seed(seed, "betweenness"));
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = root.child(static_cast<std::uint64_t>(trial));
    const int n = 2 + static_cast<int>(rng.below(7));
    const Graph g = random_graph(rng, n, 0.2 + 0.6 * rng.uniform());
    const auto fast = edge_betweenness(g);
    const auto slow = oracle::betweenness(g);
    out.require(fast.size() == slow.size(), "edge sets agree");
    for (const auto& [e, v] : slow) out.require(std::abs(fast.at(e) - v) < 1e-12, "betweenness matches brute force");
  }
}

void check_modularity_and_communities(Outcome& out, std::uint64_t seed) {
  const Rng root(derive_seed(seed, "modularity"));
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng = root.child(static_cast<std::uint64_t>(trial));
    const int n = 3 + static_cast<int>(rng.below(10));
    const Graph g = random_graph(rng, n, 0.15 + 0.5 * rng.uniform());
    if (g.edge_count() == 0) continue;
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const BinPartition part = random_partition(rng, n, k);
    const double q = modularity(g, part);
    std::vector<int> bins(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) bins[static_cast<std::size_t>(v)] = part.bin_of(v);
    out.require(std::abs(q - oracle::modularity(g, bins)) < 1e-12, "modularity matches pairwise formula");
    out.require(q >= -0.5 - 1e-12 && q <= 1.0, "modularity in [-0.5, 1]");
    out.require(std::abs(modularity(g, BinPartition(std::vector<int>(static_cast<std::size_t>(n), 0)))) < 1e-12,
                "one community has modularity 0");
    const int min_size = 1 + static_cast<int>(rng.below(3));
    const auto found = detect_communities(g, min_size);
    out.require(found.partition.node_count() == n, "communities cover all nodes");
    if (found.partition.bin_count() > 1) {
      for (int b = 0; b < found.partition.bin_count(); ++b) {
        out.require(found.partition.bin_size(b) >= min_size, "no bin below min_size unless K=1");
      }
    }
  }
  // Two 5-cliques joined by a bridge: the exhaustive optimum is the split.
  std::vector<Edge> edges;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) edges.emplace_back(5 * c + i, 5 * c + j);
    }
  }
  edges.emplace_back(4, 5);
  const Graph cliques(10, edges);
  const auto best = oracle::exhaustive_modularity(cliques);
  const auto gn = detect_communities(cliques, 1);
  out.require(std::abs(gn.best_modularity - best.modularity) < 1e-12, "GN reaches exhaustive optimum on two cliques");
  out.require(gn.partition.bin_count() == 2, "two cliques give K=2");
}

void check_graph_roundtrip(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "roundtrip"));
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(rng, 2 + static_cast<int>(rng.below(20)), 0.3);
    std::stringstream buf;
    write_edge_list(buf, g);
    const auto loaded = load_edge_list(buf);
    std::set<Edge> original, reloaded;
    for (const auto& [u, v] : g.edges()) original.insert({u, v});
    for (const auto& [u, v] : loaded.graph.edges()) {
      const NodeId a = loaded.original_ids[static_cast<std::size_t>(u)];
      const NodeId b = loaded.original_ids[static_cast<std::size_t>(v)];
      reloaded.insert({std::min(a, b), std::max(a, b)});
    }
    out.require(original == reloaded, "edge list round trip preserves edges");
  }
  const std::vector<int> blocks{7, 5, 3};
  const auto a = gen_sbm(blocks, 0.4, 0.1, seed);
  const auto b = gen_sbm(blocks, 0.4, 0.1, seed);
  out.require(a.graph.edges() == b.graph.edges(), "gen_sbm deterministic");
}

// ---------------------------------------------------------------------------
// diffusion

void check_diffusion(Outcome& out, std::uint64_t seed) {
  const Rng root(derive_seed(seed, "diffusion"));
  for (int trial = 0; trial < 30; ++trial) {
    Rng rng = root.child(static_cast<std::uint64_t>(trial));
    const int n = 4 + static_cast<int>(rng.below(20));
    const int k = 1 + static_cast<int>(rng.below(4));
    const Graph g = random_graph(rng, n, 0.25);
    const BinPartition part = random_partition(rng, n, std::min(k, n));
    const int kk = part.bin_count();

    std::vector<double> spread(static_cast<std::size_t>(kk)), churn(static_cast<std::size_t>(kk));
    for (auto& s : spread) s = rng.uniform();
    for (auto& c : churn) c = rng.uniform();
    const SisConfig random_cfg(g, part, spread, churn);
    const SisConfig frozen(g, part, std::vector<double>(static_cast<std::size_t>(kk), 0.0),
                           std::vector<double>(static_cast<std::size_t>(kk), 0.0));

    SisState s1{Adoption(static_cast<std::size_t>(n), 0), 0};
    SisState s2 = s1;
    const Rng dyn = rng.child("dyn");
    for (int t = 0; t < 15; ++t) {
      const int bin = static_cast<int>(rng.below(static_cast<std::uint64_t>(kk)));
      const auto r1 = step(s1, random_cfg, Treatment::in_bin(bin), dyn);
      out.require(r1.state.adopted.size() == static_cast<std::size_t>(n), "step keeps length");
      out.require(std::all_of(r1.state.adopted.begin(), r1.state.adopted.end(), [](auto v) { return v <= 1; }),
                  "entries stay binary");
      out.require(r1.reward >= 0.0 && r1.reward <= 1.0, "reward in [0,1]");
      s1 = r1.state;
      const auto r2 = step(s2, frozen, Treatment::in_bin(bin), dyn);
      const auto before = std::accumulate(s2.adopted.begin(), s2.adopted.end(), 0);
      const auto after = std::accumulate(r2.state.adopted.begin(), r2.state.adopted.end(), 0);
      out.require(after - before <= 1 && after >= before, "zero rates grow by at most the seed");
      s2 = r2.state;
    }

    const auto logging = [kk](const Adoption&, int, Rng& r) {
      return Treatment::in_bin(static_cast<int>(r.below(static_cast<std::uint64_t>(kk))));
    };
    out.require(generate_panel(random_cfg, logging, 10, seed + static_cast<std::uint64_t>(trial)) ==
                    generate_panel(random_cfg, logging, 10, seed + static_cast<std::uint64_t>(trial)),
                "identical seeds give identical panels");
  }

  // Path graph with certain spread: one seed saturates within the diameter.
  const int n = 7;
  std::vector<Edge> path;
  for (int i = 0; i + 1 < n; ++i) path.emplace_back(i, i + 1);
  const SisConfig full(Graph(n, path), BinPartition(std::vector<int>(n, 0)), {1.0}, {0.0});
  SisState s{Adoption(n, 0), 0};
  s = step(s, full, Treatment{0, 3}, Rng(seed)).state;
  out.require(s.adopted[2] && s.adopted[4], "seed spreads in the same period");
  for (int t = 0; t < n && reward(s.adopted) < 1.0; ++t) s = step(s, full, Treatment::none(), Rng(seed)).state;
  out.require(reward(s.adopted) == 1.0, "full adoption within the diameter");
}

// ---------------------------------------------------------------------------
// ising

void check_inclusion(Outcome& out, std::uint64_t) {
  const PriorSpec priors;
  const double w = priors.inclusion_rate(50);
  const double p = inclusion_probability(0.0, priors.v0, priors.v1, w);
  out.require(std::abs(p - 6.45e-4) < 5e-7, "inclusion at 0 matches 6.45e-4 to 3 s.f.");
  out.require(std::abs(p - oracle::inclusion_probability(0.0, priors.v0, priors.v1, w)) < 1e-15,
              "matches density-ratio oracle");
  double prev = 0.0;
  for (double g = 0.0; g <= 3.0; g += 0.05) {
    const double q = inclusion_probability(g, priors.v0, priors.v1, w);
    // Beyond |gamma| ~ 0.94 the spike density is below double resolution
    // relative to the slab and q rounds to 1.
    if (g <= 0.9) out.require(q > 0.0 && q < 1.0, "inclusion in (0,1)");
    out.require(q > 0.0 && q <= 1.0, "inclusion in (0,1]");
    out.require(q >= prev, "inclusion monotone in |gamma|");
    out.require(std::abs(q - inclusion_probability(-g, priors.v0, priors.v1, w)) < 1e-15, "symmetric in gamma");
    prev = q;
  }
  out.detail << "p=" << p;
}

void check_emvs_monotone(Outcome& out, std::uint64_t seed) {
  const auto fx = ising_fixture(derive_seed(seed, "emvs"), 200);
  const auto fit = fit_emvs(fx.panel, fx.graph, fx.partition, PriorSpec{});
  for (std::size_t i = 0; i < fit.penalized_trace.size(); ++i) {
    out.require(fit.penalized_trace[i] >= fit.penalized_start_trace[i] - 1e-8,
                "M-step does not decrease the penalized objective");
  }
  for (std::size_t i = 1; i < fit.log_posterior_trace.size(); ++i) {
    out.require(fit.log_posterior_trace[i] >= fit.log_posterior_trace[i - 1] - 1e-8,
                "log posterior non-decreasing across iterations");
  }
  out.require(fit.converged, "EMVS converged");
  out.detail << "iterations=" << fit.iterations;
}

void check_posterior_gradient(Outcome& out, std::uint64_t seed) {
  const auto fx = ising_fixture(derive_seed(seed, "gradient"), 40);
  const IsingData data(fx.panel, fx.graph, fx.partition);
  const LogPosterior target(data, PriorSpec{});
  Rng rng(derive_seed(seed, "points"));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd theta = random_params(rng, 3, 1.5).flatten();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    target.value_grad(theta, grad);
    const Eigen::VectorXd fd =
        oracle::central_difference([&](const Eigen::VectorXd& x) { return target.value(x); }, theta, 1e-5);
    const double rel = (grad - fd).norm() / std::max(1.0, fd.norm());
    worst = std::max(worst, rel);
  }
  out.require(worst < 1e-5, "gradient matches finite differences");
  out.detail << "worst_rel_error=" << worst;
}

void check_likelihood(Outcome& out, std::uint64_t seed) {
  const auto fx = ising_fixture(derive_seed(seed, "likelihood"), 20);
  const IsingData data(fx.panel, fx.graph, fx.partition);
  Rng rng(derive_seed(seed, "params"));
  for (int trial = 0; trial < 10; ++trial) {
    const IsingParams p = random_params(rng, 3, 1.0);
    const double direct = log_likelihood(p, fx.panel, fx.graph, fx.partition);
    const double slow = oracle::log_likelihood(p, fx.panel, fx.graph, fx.partition);
    const double fast = data.log_likelihood(p.flatten());
    out.require(std::abs(direct - slow) < 1e-8 * std::abs(slow), "direct likelihood matches oracle");
    out.require(std::abs(fast - slow) < 1e-8 * std::abs(slow), "aggregated likelihood matches oracle");

    // Relabel nodes consistently.
    const int n = fx.graph.node_count();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(i + 1)]);
    std::vector<Edge> edges;
    for (const auto& [u, v] : fx.graph.edges()) edges.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
    std::vector<int> bins(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) bins[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = fx.partition.bin_of(v);
    auto relabel = [&](const Adoption& y) {
      Adoption z(y.size());
      for (int v = 0; v < n; ++v) z[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] = y[static_cast<std::size_t>(v)];
      return z;
    };
    Panel panel2{relabel(fx.panel.y0), {}};
    for (const auto& rec : fx.panel.records) {
      std::optional<NodeId> a;
      if (rec.action) a = perm[static_cast<std::size_t>(*rec.action)];
      panel2.records.push_back({a, relabel(rec.y)});
    }
    const double permuted = log_likelihood(p, panel2, Graph(n, edges), BinPartition(bins));
    out.require(std::abs(permuted - direct) < 1e-9 * std::abs(direct), "likelihood invariant to relabeling");
  }
}

void check_leapfrog(Outcome& out, std::uint64_t seed) {
  const auto fx = ising_fixture(derive_seed(seed, "leapfrog"), 40);
  const IsingData data(fx.panel, fx.graph, fx.partition);
  const LogPosterior target(data, PriorSpec{});
  const Eigen::VectorXd start = fx.truth.flatten();
  const Eigen::VectorXd inv_mass = Eigen::VectorXd::Constant(start.size(), 1e-2);
  Rng rng(derive_seed(seed, "momentum"));
  Eigen::VectorXd p0(start.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) p0(i) = rng.normal() / std::sqrt(inv_mass(i));
  const double h0 = hamiltonian(target, start, p0, inv_mass);
  std::vector<double> errors;
  const double length = 0.2;
  for (double eps : {0.02, 0.01, 0.005}) {
    Eigen::VectorXd q = start, p = p0;
    leapfrog(target, q, p, inv_mass, eps, static_cast<int>(std::lround(length / eps)));
    errors.push_back(std::abs(hamiltonian(target, q, p, inv_mass) - h0));
  }
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double ratio = errors[i - 1] / errors[i];
    out.require(ratio > 3.0 && ratio < 5.5, "energy error shrinks quadratically");
  }
  out.detail << "errors=" << errors[0] << "," << errors[1] << "," << errors[2];
}

void check_state_bounds(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "state"));
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(20));
    const Graph g = random_graph(rng, n, 0.3);
    const BinPartition part = random_partition(rng, n, 1 + static_cast<int>(rng.below(4)));
    const IsingParams p = random_params(rng, part.bin_count(), 20.0);
    Adoption y(static_cast<std::size_t>(n));
    for (auto& v : y) v = rng.bernoulli(0.5);
    const auto l0 = belief_no_intervention(p, g, part, y);
    for (double v : l0) out.require(v > 0.0 && v < 1.0, "belief strictly inside (0,1)");
    const auto s = build_state(l0, y, part);
    for (double v : s.concat()) out.require(v >= 0.0 && v <= 1.0, "state in [0,1]^{2K}");
    out.require(static_cast<int>(s.concat().size()) == 2 * part.bin_count(), "state length 2K");
  }
}

void check_auc(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "auc"));
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(40));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] = std::floor(rng.uniform() * 5.0) / 5.0;  // force ties
      labels[static_cast<std::size_t>(i)] = i < 2 ? static_cast<std::uint8_t>(i) : rng.bernoulli(0.4);
    }
    out.require(std::abs(auc(scores, labels) - oracle::pairwise_auc(scores, labels)) < 1e-12,
                "rank AUC matches pairwise count");
  }
}

// ---------------------------------------------------------------------------
// rl

Batch random_batch(Rng& rng, int k, int size) {
  std::vector<Transition> ts;
  for (int i = 0; i < size; ++i) {
    QIsingState s, s2;
    for (int b = 0; b < k; ++b) {
      s.l0_bar.push_back(rng.uniform());
      s.y_bar.push_back(rng.uniform());
      s2.l0_bar.push_back(rng.uniform());
      s2.y_bar.push_back(rng.uniform());
    }
    ts.push_back({s, static_cast<int>(rng.below(k)), rng.uniform(), s2});
  }
  return make_batch(ts);
}

void check_qnetwork_gradient(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "qgrad"));
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(3));
    QFunction q(2 * k, {8, 6}, k, derive_seed(seed, static_cast<std::uint64_t>(trial)));
    const QFunction target(2 * k, {8, 6}, k, derive_seed(seed, static_cast<std::uint64_t>(trial + 100)));
    const Batch batch = random_batch(rng, k, 12);
    const double alpha = 0.5 * rng.uniform();
    std::vector<DenseLayer> grads;
    cql_loss_grad(q, batch, target, alpha, 0.8, grads);
    Eigen::VectorXd analytic(static_cast<Eigen::Index>(q.parameter_count()));
    Eigen::Index idx = 0;
    for (const auto& l : grads) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j) analytic(idx++) = l.weight(i, j);
      }
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) analytic(idx++) = l.bias(i);
    }
    const auto flat = q.parameters();
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
    QFunction probe = q;
    const auto fd = oracle::central_difference(
        [&](const Eigen::VectorXd& v) {
          probe.set_parameters(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
          return cql_loss(probe, batch, target, alpha, 0.8).total;
        },
        x, 1e-6);
    worst = std::max(worst, (analytic - fd).norm() / std::max(1e-8, fd.norm()));
  }
  out.require(worst < 1e-4, "Q-network gradient matches finite differences");
  out.detail << "worst_rel_error=" << worst;
}

void check_cql_penalty(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "penalty"));
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(4));
    const QFunction q(2 * k, {16}, k, derive_seed(seed, static_cast<std::uint64_t>(trial)));
    const Batch batch = random_batch(rng, k, 8);
    const auto parts = cql_loss(q, batch, q, 1.0, 0.8);
    out.require(parts.penalty >= 0.0, "penalty non-negative");
    out.require(parts.bellman >= 0.0, "Bellman term non-negative");
  }
}

void check_pevi(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "pevi"));
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(2));
    const int horizon = 2 + static_cast<int>(rng.below(4));
    const int d = feature_dim(k);
    auto random_state = [&] {
      QIsingState s;
      for (int b = 0; b < k; ++b) {
        s.l0_bar.push_back(rng.uniform());
        s.y_bar.push_back(rng.uniform());
      }
      return s;
    };
    std::vector<std::vector<StageSample>> stages(static_cast<std::size_t>(horizon));
    for (int h = 1; h <= horizon; ++h) {
      const int count = static_cast<int>(rng.below(30));
      for (int i = 0; i < count; ++i) {
        StageSample sample{feature_map(random_state(), static_cast<int>(rng.below(k))), rng.uniform(), {}};
        if (h < horizon) {
          const auto next = random_state();
          for (int b = 0; b < k; ++b) sample.next_phis.push_back(feature_map(next, b));
        }
        stages[static_cast<std::size_t>(h - 1)].push_back(std::move(sample));
      }
    }
    const PeviPolicy low = train_pevi(stages, d, 1.0, 0.1);
    const PeviPolicy high = train_pevi(stages, d, 1.0, 0.5);
    for (int probe = 0; probe < 20; ++probe) {
      const auto s = random_state();
      for (int b = 0; b < k; ++b) {
        const auto phi = feature_map(s, b);
        out.require(phi.norm() <= 1.0 + 1e-12, "feature norm <= 1");
        for (int c = b + 1; c < k; ++c) out.require(phi.dot(feature_map(s, c)) == 0.0, "feature blocks disjoint");
        for (int h = 1; h <= horizon; ++h) {
          const double ql = low.q_value(h, phi);
          out.require(ql >= 0.0 && ql <= horizon - h + 1, "Q clipped to [0, H-h+1]");
          out.require(high.q_value(h, phi) <= ql + 1e-12, "larger bonus never raises Q");
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// policies

void check_policies(Outcome& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "policies"));
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6 + static_cast<int>(rng.below(20));
    const Graph g = random_graph(rng, n, 0.25);
    const BinPartition part = random_partition(rng, n, 1 + static_cast<int>(rng.below(4)));
    const int k = part.bin_count();
    const SisConfig cfg(g, part, std::vector<double>(static_cast<std::size_t>(k), 0.1),
                        std::vector<double>(static_cast<std::size_t>(k), 0.2));
    std::vector<PolicyPtr> all{std::make_shared<RandomBinPolicy>(), std::make_shared<DegreePolicy>(),
                               std::make_shared<DegreeBinPolicy>(), std::make_shared<LirPolicy>(g),
                               std::make_shared<GreedyMyopicPolicy>(cfg)};
    Adoption y(static_cast<std::size_t>(n));
    for (auto& v : y) v = rng.bernoulli(0.3);
    const int t = 1 + static_cast<int>(rng.below(10));
    const Observation obs{y, t, std::nullopt};
    for (const auto& p : all) {
      Rng a = rng.child(p->kind()), b = a;
      const Decision d = p->act(obs, g, part, a);
      out.require(d.bin >= 0 && d.bin < k, p->kind() + " returns a valid bin");
      if (d.node) out.require(part.bin_of(*d.node) == d.bin, p->kind() + " forces a node of its bin");
      const Decision again = p->act(obs, g, part, b);
      out.require(again.bin == d.bin && again.node == d.node, p->kind() + " deterministic given rng");
    }
    // degree never forces an adopted node while a susceptible one exists.
    Rng r0 = rng.child("degree");
    const Decision dd = DegreePolicy().act(obs, g, part, r0);
    if (std::find(y.begin(), y.end(), 0) != y.end()) {
      out.require(dd.node && !y[static_cast<std::size_t>(*dd.node)], "degree forces a susceptible node");
    }
    // Ensemble vote is invariant to member order.
    std::vector<PolicyPtr> members{all[1], all[2], all[3], all[4], all[2]};
    std::vector<PolicyPtr> reversed(members.rbegin(), members.rend());
    Rng e1 = rng.child("ensemble"), e2 = e1;
    out.require(EnsemblePolicy(members).act(obs, g, part, e1).bin == EnsemblePolicy(reversed).act(obs, g, part, e2).bin,
                "ensemble vote permutation invariant");
  }
}

struct NamedCheck {
  const char* name;
  CheckFn fn;
};

const std::vector<NamedCheck>& checks() {
  static const std::vector<NamedCheck> list{
      {"greedy-counterexample-exact", check_greedy_counterexample},
      {"greedy-counterexample-monte-carlo", check_counterexample_monte_carlo},
      {"synchronous-stationary-constants", check_stationary},
      {"self-normalized-coverage", check_self_normalized},
      {"pevi-suboptimality-bound", check_pevi_suboptimality},
      {"simulation-lemma", check_simulation_lemma},
      {"graph-betweenness-brute-force", check_betweenness},
      {"graph-modularity-and-communities", check_modularity_and_communities},
      {"graph-roundtrip-and-determinism", check_graph_roundtrip},
      {"diffusion-invariants", check_diffusion},
      {"ising-inclusion-probability", check_inclusion},
      {"ising-emvs-monotonicity", check_emvs_monotone},
      {"ising-posterior-gradient", check_posterior_gradient},
      {"ising-likelihood-oracle-and-relabeling", check_likelihood},
      {"ising-leapfrog-energy", check_leapfrog},
      {"ising-state-bounds", check_state_bounds},
      {"ising-auc-oracle", check_auc},
      {"rl-qnetwork-gradient", check_qnetwork_gradient},
      {"rl-cql-penalty", check_cql_penalty},
      {"rl-pevi-norm-clipping-pessimism", check_pevi},
      {"policies-invariants", check_policies},
  };
  return list;
}

}  // namespace

std::vector<std::string> verify_check_names() {
  std::vector<std::string> names;
  for (const auto& c : checks()) names.emplace_back(c.name);
  return names;
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  std::vector<CheckResult> results;
  for (const auto& c : checks()) {
    Outcome outcome;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.fn(outcome, derive_seed(options.seed, c.name));
    } catch (const std::exception& e) {
      outcome.passed = false;
      outcome.detail << "exception: " << e.what();
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    CheckResult r{c.name, outcome.passed, outcome.detail.str(), elapsed.count()};
    if (options.on_result) options.on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

bool cmd_verify(std::uint64_t seed, std::ostream& log) {
  VerifyOptions options;
  options.seed = seed;
  options.on_result = [&log](const CheckResult& r) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.seconds << " s)";
    if (!r.detail.empty()) log << "  " << r.detail;
    log << std::endl;
  };
  bool all = true;
  for (const auto& r : run_verify(options)) all = all && r.passed;
  log << (all ? "verify: all checks passed" : "verify: FAILURES") << std::endl;
  return all;
}

}  // namespace qising

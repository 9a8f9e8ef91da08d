#include "qising/theory.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "qising/ising.hpp"
#include "qising/pevi.hpp"

namespace qising {

StationaryResult synchronous_stationary(int n, double coupling, double intercept, double tol, int max_iters) {
  if (n < 1 || n > 12) throw std::invalid_argument("synchronous_stationary: n must be in [1, 12]");
  const int states = 1 << n;
  StationaryResult out;
  out.kernel = Eigen::MatrixXd::Zero(states, states);
  for (int from = 0; from < states; ++from) {
    const int total = std::popcount(static_cast<unsigned>(from));
    Eigen::VectorXd on(n);
    for (int i = 0; i < n; ++i) {
      const int others = total - ((from >> i) & 1);
      on(i) = sigmoid(intercept + coupling * others);
    }
    for (int to = 0; to < states; ++to) {
      double p = 1.0;
      for (int i = 0; i < n; ++i) p *= ((to >> i) & 1) ? on(i) : 1.0 - on(i);
      out.kernel(from, to) = p;
    }
  }

  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(states, 1.0 / states);
  for (out.iterations = 1; out.iterations <= max_iters; ++out.iterations) {
    Eigen::RowVectorXd next = mu * out.kernel;
    next /= next.sum();
    const double change = (next - mu).cwiseAbs().maxCoeff();
    mu = next;
    if (change < tol) break;
  }
  out.residual = (mu * out.kernel - mu).cwiseAbs().maxCoeff();
  if (out.iterations > max_iters) throw std::runtime_error("synchronous_stationary: power iteration did not converge");
  out.distribution = mu.transpose();
  for (int m = 0; m < n; ++m) {
    const int lower = (1 << m) - 1;
    const int upper = (1 << (m + 1)) - 1;
    out.delta.push_back(std::log(out.distribution(upper) / out.distribution(lower)));
  }
  return out;
}

MonteCarloEstimate counterexample_rollout(double rho, const NodeRule& rule, int runs, std::uint64_t seed) {
  if (runs < 2) throw std::invalid_argument("counterexample_rollout: need at least 2 runs");
  const SisConfig config = greedy_counterexample_config(rho);
  const int horizon = 2;
  const Rng root(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    const Rng stream = root.child(static_cast<std::uint64_t>(r));
    SisState state{Adoption(3, 0), 0};
    double total = 0.0;
    for (int h = 1; h <= horizon; ++h) {
      const NodeId node = rule(h, state.adopted);
      auto result = step(state, config, Treatment{config.partition.bin_of(node), node}, stream);
      total += 3.0 * result.reward;
      state = std::move(result.state);
    }
    sum += total;
    sum_sq += total * total;
  }
  MonteCarloEstimate est;
  est.runs = runs;
  est.mean = sum / runs;
  const double var = std::max(0.0, (sum_sq - runs * est.mean * est.mean) / (runs - 1));
  est.std_error = std::sqrt(var / runs);
  return est;
}

double self_normalized_radius(int horizon, int dim, double n, double ridge, double delta) {
  return horizon * std::sqrt(dim * std::log(horizon * (1.0 + n / ridge) / delta));
}

double self_normalized_radius_explicit(int horizon, int dim, double n, double ridge, double delta) {
  return horizon * std::sqrt(dim * std::log(1.0 + n / (ridge * dim)) + 2.0 * std::log(horizon / delta));
}

namespace {

Eigen::VectorXd unit_ball_point(Rng& rng, int dim) {
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = rng.normal();
  const double radius = std::pow(rng.uniform(), 1.0 / dim);
  return x * (radius / x.norm());
}

std::vector<double> dirichlet_one(Rng& rng, int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (auto& x : w) {
    x = -std::log1p(-rng.uniform());
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

int sample_index(Rng& rng, const std::vector<TinyMdp::Outcome>& outcomes) {
  double u = rng.uniform();
  for (const auto& o : outcomes) {
    if (u < o.prob) return o.next;
    u -= o.prob;
  }
  return outcomes.back().next;
}

}  // namespace

CoverageReport self_normalized_coverage(const CoverageConfig& config) {
  if (config.horizon < 1 || config.dim < 1 || config.samples < 0 || config.trials < 1) {
    throw std::invalid_argument("self_normalized_coverage: bad configuration");
  }
  CoverageReport report;
  report.trials = config.trials;
  const double simplified =
      self_normalized_radius(config.horizon, config.dim, config.samples, config.ridge, config.delta);
  const double explicit_radius =
      self_normalized_radius_explicit(config.horizon, config.dim, config.samples, config.ridge, config.delta);
  report.constant = std::max(1.0, explicit_radius / simplified);
  report.radius = report.constant * simplified;

  const Rng root(config.seed);
  const double sigma = config.horizon;
  for (int trial = 0; trial < config.trials; ++trial) {
    Rng rng = root.child(static_cast<std::uint64_t>(trial));
    bool inside = true;
    for (int h = 0; h < config.horizon; ++h) {
      Eigen::MatrixXd lambda = config.ridge * Eigen::MatrixXd::Identity(config.dim, config.dim);
      Eigen::VectorXd s = Eigen::VectorXd::Zero(config.dim);
      for (int i = 0; i < config.samples; ++i) {
        const Eigen::VectorXd x = unit_ball_point(rng, config.dim);
        lambda.noalias() += x * x.transpose();
        s += x * (sigma * rng.normal());
      }
      const double norm = std::sqrt(s.dot(lambda.ldlt().solve(s)));
      report.max_norm = std::max(report.max_norm, norm);
      if (norm > report.radius) inside = false;
    }
    if (inside) ++report.covered;
  }
  return report;
}

TinyMdp random_tabular_mdp(int states, int actions, int horizon, Rng& rng) {
  TinyMdp mdp;
  mdp.horizon = horizon;
  mdp.initial_state = 0;
  mdp.transitions.resize(static_cast<std::size_t>(states));
  mdp.rewards.resize(static_cast<std::size_t>(states));
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      const auto w = dirichlet_one(rng, states);
      std::vector<TinyMdp::Outcome> row;
      for (int t = 0; t < states; ++t) row.push_back({t, w[static_cast<std::size_t>(t)]});
      mdp.transitions[static_cast<std::size_t>(s)].push_back(std::move(row));
      mdp.rewards[static_cast<std::size_t>(s)].push_back(rng.uniform());
    }
  }
  return mdp;
}

int SuboptimalityReport::holding() const {
  int n = 0;
  for (const auto& t : trials) n += t.holds ? 1 : 0;
  return n;
}

double SuboptimalityReport::rate() const {
  return trials.empty() ? 0.0 : static_cast<double>(holding()) / static_cast<double>(trials.size());
}

SuboptimalityReport pevi_suboptimality(const SuboptimalityConfig& config) {
  const int d = config.states * config.actions;
  const int horizon = config.horizon;
  auto one_hot = [&](int s, int a) {
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
    phi(s * config.actions + a) = 1.0;
    return phi;
  };
  auto action_phis = [&](int s) {
    std::vector<Eigen::VectorXd> phis;
    for (int a = 0; a < config.actions; ++a) phis.push_back(one_hot(s, a));
    return phis;
  };

  SuboptimalityReport report;
  const Rng root(config.seed);
  for (int trial = 0; trial < config.trials; ++trial) {
    const Rng stream = root.child(static_cast<std::uint64_t>(trial));
    Rng mdp_rng = stream.child("mdp");
    Rng data_rng = stream.child("data");
    const TinyMdp mdp = random_tabular_mdp(config.states, config.actions, horizon, mdp_rng);

    std::vector<std::vector<StageSample>> stages(static_cast<std::size_t>(horizon));
    for (int e = 0; e < config.episodes; ++e) {
      int s = mdp.initial_state;
      for (int h = 1; h <= horizon; ++h) {
        const int a = static_cast<int>(data_rng.below(static_cast<std::uint64_t>(config.actions)));
        const double r = data_rng.bernoulli(mdp.rewards[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]) ? 1.0 : 0.0;
        const int next = sample_index(data_rng, mdp.transitions[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]);
        StageSample sample{one_hot(s, a), r, {}};
        if (h < horizon) sample.next_phis = action_phis(next);
        stages[static_cast<std::size_t>(h - 1)].push_back(std::move(sample));
        s = next;
      }
    }

    SuboptimalityTrial result;
    const double w_bound = horizon * std::sqrt(static_cast<double>(d));
    result.bonus_beta =
        bonus_beta_from_radius(horizon, d, config.episodes, config.ridge, config.delta, w_bound, config.c_beta);
    const PeviPolicy policy = train_pevi(stages, d, config.ridge, result.bonus_beta);
    const StageRule learned = [&](int h, int s) {
      const auto phis = action_phis(s);
      return policy.greedy(h, phis);
    };

    const OptimalSolution best = solve_optimal(mdp);
    const StageRule best_rule = best.rule();
    result.suboptimality = best.value() - exact_policy_value(mdp, learned);
    const auto dist = state_distributions(mdp, best_rule);
    for (int h = 1; h <= horizon; ++h) {
      for (int s = 0; s < config.states; ++s) {
        const double mass = dist[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s)];
        if (mass > 0.0) result.uncertainty += mass * policy.width(h, one_hot(s, best_rule(h, s)));
      }
    }
    result.bound = 2.0 * result.bonus_beta * result.uncertainty;
    result.holds = result.suboptimality <= result.bound + config.tolerance;
    report.trials.push_back(result);
  }
  return report;
}

}  // namespace qising

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "qising/diffusion.hpp"
#include "qising/rng.hpp"
#include "qising/tiny_mdp.hpp"

namespace qising {

struct StationaryResult {
  Eigen::MatrixXd kernel;          // 2^n x 2^n, rows indexed by bitmask
  Eigen::VectorXd distribution;    // mu with mu K = mu
  std::vector<double> delta;       // log(mu_{m+1} / mu_m), m = 0..n-1
  double residual = 0.0;           // ||mu K - mu||_inf
  int iterations = 0;
};

/// Synchronous Ising chain on the complete graph of n nodes: every node
/// updates to 1 with probability sigma(intercept + coupling * sum_{j != i} y_j).
/// mu_m is the mass of one configuration with m adopted nodes.
StationaryResult synchronous_stationary(int n = 4, double coupling = 1.0, double intercept = 0.0,
                                        double tol = 1e-12, int max_iters = 1'000'000);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int runs = 0;
};

/// Node to force at stage h given the current adoption vector.
using NodeRule = std::function<NodeId(int h, const Adoption& y)>;

/// Cumulative reward of `rule` on the greedy counterexample, estimated by
/// running `step` `runs` times. Rewards count adopted nodes.
MonteCarloEstimate counterexample_rollout(double rho, const NodeRule& rule, int runs, std::uint64_t seed);

/// Radius of the self-normalized bound in its simplified form,
/// H sqrt(d log(H (1 + n/lambda) / delta)).
double self_normalized_radius(int horizon, int dim, double n, double ridge, double delta);
/// The explicit determinant form before simplification,
/// H sqrt(d log(1 + n/(lambda d)) + 2 log(H/delta)).
double self_normalized_radius_explicit(int horizon, int dim, double n, double ridge, double delta);

struct CoverageConfig {
  int horizon = 3;
  int dim = 6;
  int samples = 200;  // per stage
  double ridge = 1.0;
  double delta = 0.05;
  int trials = 1000;
  std::uint64_t seed = 0;
};

struct CoverageReport {
  double constant = 1.0;       // calibrated C
  double radius = 0.0;         // C times the simplified radius
  int covered = 0;             // trials where every stage is inside the radius
  int trials = 0;
  double max_norm = 0.0;       // largest ||S_h||_{Lambda^{-1}} seen
  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(covered) / trials; }
};

/// Each stage draws features uniformly from the unit ball and Gaussian
/// noise with standard deviation H. C is the ratio of the explicit radius to
/// the simplified one, floored at 1.
CoverageReport self_normalized_coverage(const CoverageConfig& config);

/// Random tabular MDP with uniform-random rewards in [0,1] and Dirichlet(1)
/// transition rows.
TinyMdp random_tabular_mdp(int states, int actions, int horizon, Rng& rng);

struct SuboptimalityConfig {
  int states = 3;
  int actions = 2;
  int horizon = 3;
  int episodes = 50;
  double ridge = 1.0;
  double delta = 0.05;
  double c_beta = 1.0;
  double tolerance = 1e-6;
  int trials = 200;
  std::uint64_t seed = 0;
};

struct SuboptimalityTrial {
  double suboptimality = 0.0;  // V^{pi*} - V^{pi_hat}
  double bound = 0.0;          // 2 beta U(pi*)
  double bonus_beta = 0.0;
  double uncertainty = 0.0;
  bool holds = false;
};

struct SuboptimalityReport {
  std::vector<SuboptimalityTrial> trials;
  int holding() const;
  double rate() const;
};

/// Tabular PEVI with one-hot features on random MDPs, logged by a uniform
/// behavior policy from the initial state; W = H sqrt(d).
SuboptimalityReport pevi_suboptimality(const SuboptimalityConfig& config);

}  // namespace qising

#pragma once

// Brute-force reference computations. Each one is written from the defining
// formula and shares no code path with the library routine it checks.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qising/diffusion.hpp"
#include "qising/graph.hpp"
#include "qising/ising.hpp"

namespace qising::oracle {

/// Enumerates every shortest path of every ordered pair; each edge gets the
/// fraction of paths through it, halved for the undirected convention.
std::map<Edge, double> betweenness(const Graph& graph);

/// (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j).
double modularity(const Graph& graph, std::span<const int> bin_of);

struct BestPartition {
  std::vector<int> bin_of;
  double modularity = 0.0;
};
/// Maximum modularity over every set partition of the nodes (n <= 10).
BestPartition exhaustive_modularity(const Graph& graph);

/// Central differences of `f` at `x` with step `h`.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-5);

/// Fraction of (positive, negative) pairs ranked correctly, ties counting 1/2.
double pairwise_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// w N(g; 0, v1) / [w N(g; 0, v1) + (1 - w) N(g; 0, v0)] from the densities.
double inclusion_probability(double gamma, double v0, double v1, double w);

/// The linear predictor by explicit neighbor loops.
double linear_predictor(const IsingParams& params, const Graph& graph, const BinPartition& partition,
                        std::span<const std::uint8_t> y_prev, std::optional<NodeId> action, NodeId node);

/// sum_t sum_i [y eta - log(1 + e^eta)], term by term.
double log_likelihood(const IsingParams& params, const Panel& panel, const Graph& graph,
                      const BinPartition& partition);

/// Adoption probability of a susceptible node from its adopted neighbors'
/// spread rates by the product formula.
double adoption_probability(std::span<const double> neighbor_spread);

}  // namespace qising::oracle

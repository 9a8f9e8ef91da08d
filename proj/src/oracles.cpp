#include "qising/oracles.hpp"

#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

namespace qising::oracle {

namespace {

std::vector<int> bfs_distances(const Graph& graph, NodeId source) {
  std::vector<int> dist(static_cast<std::size_t>(graph.node_count()), -1);
  std::deque<NodeId> queue{source};
  dist[static_cast<std::size_t>(source)] = 0;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : graph.neighbors(u)) {
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

void enumerate_paths(const Graph& graph, const std::vector<int>& dist, NodeId target, std::vector<NodeId>& path,
                     std::vector<std::vector<NodeId>>& out) {
  const NodeId u = path.back();
  if (u == target) {
    out.push_back(path);
    return;
  }
  for (NodeId v : graph.neighbors(u)) {
    if (dist[static_cast<std::size_t>(v)] == dist[static_cast<std::size_t>(u)] + 1) {
      path.push_back(v);
      enumerate_paths(graph, dist, target, path, out);
      path.pop_back();
    }
  }
}

double normal_density(double x, double variance) {
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

}  // namespace

std::map<Edge, double> betweenness(const Graph& graph) {
  std::map<Edge, double> out;
  for (const Edge& e : graph.edges()) out[e] = 0.0;
  const int n = graph.node_count();
  for (NodeId s = 0; s < n; ++s) {
    const auto dist = bfs_distances(graph, s);
    for (NodeId t = 0; t < n; ++t) {
      if (t == s || dist[static_cast<std::size_t>(t)] < 0) continue;
      std::vector<std::vector<NodeId>> paths;
      std::vector<NodeId> path{s};
      enumerate_paths(graph, dist, t, path, paths);
      for (const auto& p : paths) {
        for (std::size_t i = 0; i + 1 < p.size(); ++i) {
          out[{std::min(p[i], p[i + 1]), std::max(p[i], p[i + 1])}] += 1.0 / static_cast<double>(paths.size());
        }
      }
    }
  }
  for (auto& [edge, value] : out) value /= 2.0;
  return out;
}

double modularity(const Graph& graph, std::span<const int> bin_of) {
  const int n = graph.node_count();
  const double two_m = 2.0 * static_cast<double>(graph.edges().size());
  if (two_m == 0.0) throw std::domain_error("modularity undefined without edges");
  double q = 0.0;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (bin_of[static_cast<std::size_t>(i)] != bin_of[static_cast<std::size_t>(j)]) continue;
      const double a = graph.has_edge(i, j) ? 1.0 : 0.0;
      q += a - static_cast<double>(graph.degree(i)) * graph.degree(j) / two_m;
    }
  }
  return q / two_m;
}

BestPartition exhaustive_modularity(const Graph& graph) {
  const int n = graph.node_count();
  if (n < 1 || n > 10) throw std::invalid_argument("exhaustive_modularity: need 1 <= n <= 10");
  // Restricted growth strings enumerate each set partition exactly once.
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::vector<int> max_prefix(static_cast<std::size_t>(n), 0);
  BestPartition best{a, modularity(graph, a)};
  while (true) {
    int i = n - 1;
    while (i > 0 && a[static_cast<std::size_t>(i)] > max_prefix[static_cast<std::size_t>(i - 1)]) --i;
    if (i == 0) break;
    ++a[static_cast<std::size_t>(i)];
    max_prefix[static_cast<std::size_t>(i)] =
        std::max(max_prefix[static_cast<std::size_t>(i - 1)], a[static_cast<std::size_t>(i)]);
    for (int j = i + 1; j < n; ++j) {
      a[static_cast<std::size_t>(j)] = 0;
      max_prefix[static_cast<std::size_t>(j)] = max_prefix[static_cast<std::size_t>(i)];
    }
    const double q = modularity(graph, a);
    if (q > best.modularity + 1e-12) best = {a, q};
  }
  return best;
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

double pairwise_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  double concordant = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  if (pairs == 0) throw std::domain_error("pairwise_auc: one class is absent");
  return concordant / static_cast<double>(pairs);
}

double inclusion_probability(double gamma, double v0, double v1, double w) {
  const double slab = w * normal_density(gamma, v1);
  const double spike = (1.0 - w) * normal_density(gamma, v0);
  return slab / (slab + spike);
}

double linear_predictor(const IsingParams& params, const Graph& graph, const BinPartition& partition,
                        std::span<const std::uint8_t> y_prev, std::optional<NodeId> action, NodeId node) {
  const int k = partition.bin_of(node);
  const auto kk = static_cast<std::size_t>(k);
  double eta = params.beta0[kk] + params.beta2[kk] * y_prev[static_cast<std::size_t>(node)];
  if (action && *action == node) eta += params.beta1[kk];
  for (NodeId j = 0; j < graph.node_count(); ++j) {
    if (!graph.has_edge(node, j)) continue;
    if (action && *action == j) eta += params.beta3[kk];
    if (y_prev[static_cast<std::size_t>(j)]) eta += params.gamma(k, partition.bin_of(j));
  }
  return eta;
}

double log_likelihood(const IsingParams& params, const Panel& panel, const Graph& graph,
                      const BinPartition& partition) {
  double total = 0.0;
  for (int t = 1; t <= panel.periods(); ++t) {
    const auto& rec = panel.records[static_cast<std::size_t>(t - 1)];
    const auto& y_prev = panel.y(t - 1);
    for (NodeId i = 0; i < graph.node_count(); ++i) {
      const double eta = oracle::linear_predictor(params, graph, partition, y_prev, rec.action, i);
      const double log1pexp = std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
      total += (rec.y[static_cast<std::size_t>(i)] ? eta : 0.0) - log1pexp;
    }
  }
  return total;
}

double adoption_probability(std::span<const double> neighbor_spread) {
  double stay = 1.0;
  for (double b : neighbor_spread) stay *= 1.0 - b;
  return 1.0 - stay;
}

}  // namespace qising::oracle

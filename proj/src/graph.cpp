#include "qising/graph.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <queue>
#include <unordered_map>

#include "qising/rng.hpp"

namespace qising {

namespace {

Edge ordered(NodeId u, NodeId v) { return u < v ? Edge{u, v} : Edge{v, u}; }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
bool parse_int(std::string_view field, Int& out) {
  field = trim(field);
  if (field.empty()) return false;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

/// Splits a non-comment line into two integer fields or throws.
template <typename Int>
std::pair<Int, Int> parse_pair(std::string_view line, std::size_t line_no) {
  const auto comma = line.find(',');
  if (comma == std::string_view::npos) throw ParseError(line_no, "expected two comma-separated integers");
  Int a{}, b{};
  if (!parse_int(line.substr(0, comma), a) || !parse_int(line.substr(comma + 1), b)) {
    throw ParseError(line_no, "malformed integer field");
  }
  return {a, b};
}

using AdjList = std::vector<std::vector<NodeId>>;

/// Brandes edge accumulation on an adjacency list; returns raw sums over
/// ordered (s, t) pairs, i.e. twice the undirected value.
std::map<Edge, double> brandes_edges(const AdjList& adj) {
  const int n = static_cast<int>(adj.size());
  std::map<Edge, double> score;
  for (int v = 0; v < n; ++v) {
    for (NodeId w : adj[static_cast<std::size_t>(v)]) {
      if (v < w) score[{v, w}] = 0.0;
    }
  }
  std::vector<double> sigma(static_cast<std::size_t>(n));
  std::vector<double> delta(static_cast<std::size_t>(n));
  std::vector<int> dist(static_cast<std::size_t>(n));
  std::vector<NodeId> order;
  order.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    order.clear();
    sigma[static_cast<std::size_t>(s)] = 1.0;
    dist[static_cast<std::size_t>(s)] = 0;
    std::queue<NodeId> queue;
    queue.push(s);
    while (!queue.empty()) {
      const NodeId v = queue.front();
      queue.pop();
      order.push_back(v);
      for (NodeId w : adj[static_cast<std::size_t>(v)]) {
        auto& dw = dist[static_cast<std::size_t>(w)];
        if (dw < 0) {
          dw = dist[static_cast<std::size_t>(v)] + 1;
          queue.push(w);
        }
        if (dw == dist[static_cast<std::size_t>(v)] + 1) sigma[static_cast<std::size_t>(w)] += sigma[static_cast<std::size_t>(v)];
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeId w = *it;
      for (NodeId v : adj[static_cast<std::size_t>(w)]) {
        if (dist[static_cast<std::size_t>(v)] == dist[static_cast<std::size_t>(w)] - 1) {
          const double c = sigma[static_cast<std::size_t>(v)] / sigma[static_cast<std::size_t>(w)] *
                           (1.0 + delta[static_cast<std::size_t>(w)]);
          score[ordered(v, w)] += c;
          delta[static_cast<std::size_t>(v)] += c;
        }
      }
    }
  }
  return score;
}

AdjList adjacency_of(const Graph& g) {
  AdjList adj(static_cast<std::size_t>(g.node_count()));
  for (int v = 0; v < g.node_count(); ++v) {
    const auto nb = g.neighbors(v);
    adj[static_cast<std::size_t>(v)].assign(nb.begin(), nb.end());
  }
  return adj;
}

std::vector<int> component_labels(const AdjList& adj) {
  std::vector<int> label(adj.size(), -1);
  int next = 0;
  for (std::size_t s = 0; s < adj.size(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    std::vector<NodeId> stack{static_cast<NodeId>(s)};
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      for (NodeId w : adj[static_cast<std::size_t>(v)]) {
        if (label[static_cast<std::size_t>(w)] < 0) {
          label[static_cast<std::size_t>(w)] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

// ---------------------------------------------------------------- Graph

Graph::Graph(int n, std::vector<Edge> edges) : n_(n) {
  if (n < 0) throw std::invalid_argument("negative node count");
  for (auto& e : edges) {
    if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (e.first == e.second) throw std::invalid_argument("self-loop at node " + std::to_string(e.first));
    e = ordered(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("duplicate edge");
  }
  edges_ = std::move(edges);

  std::vector<std::size_t> deg(static_cast<std::size_t>(n), 0);
  for (const auto& [u, v] : edges_) {
    ++deg[static_cast<std::size_t>(u)];
    ++deg[static_cast<std::size_t>(v)];
  }
  offset_.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int v = 0; v < n; ++v) offset_[static_cast<std::size_t>(v) + 1] = offset_[static_cast<std::size_t>(v)] + deg[static_cast<std::size_t>(v)];
  adj_.resize(offset_.back());
  std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
  for (const auto& [u, v] : edges_) {
    adj_[fill[static_cast<std::size_t>(u)]++] = v;
    adj_[fill[static_cast<std::size_t>(v)]++] = u;
  }
  for (int v = 0; v < n; ++v) {
    std::sort(adj_.begin() + static_cast<std::ptrdiff_t>(offset_[static_cast<std::size_t>(v)]),
              adj_.begin() + static_cast<std::ptrdiff_t>(offset_[static_cast<std::size_t>(v) + 1]));
  }
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
  if (v < 0 || v >= n_) throw std::out_of_range("node " + std::to_string(v) + " out of range");
  const auto b = offset_[static_cast<std::size_t>(v)];
  const auto e = offset_[static_cast<std::size_t>(v) + 1];
  return {adj_.data() + b, e - b};
}

int Graph::degree(NodeId v) const { return static_cast<int>(neighbors(v).size()); }

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

void Graph::set_node_features(std::vector<std::vector<double>> features) {
  if (!features.empty() && features.size() != static_cast<std::size_t>(n_)) {
    throw std::invalid_argument("node feature count does not match node count");
  }
  features_ = std::move(features);
}

int degree(const Graph& graph, NodeId node) { return graph.degree(node); }

// ---------------------------------------------------------------- BinPartition

BinPartition::BinPartition(std::vector<int> bin_of) : bin_of_(std::move(bin_of)) {
  int k = 0;
  for (int b : bin_of_) {
    if (b < 0) throw std::invalid_argument("negative bin index");
    k = std::max(k, b + 1);
  }
  members_.assign(static_cast<std::size_t>(k), {});
  for (std::size_t v = 0; v < bin_of_.size(); ++v) {
    members_[static_cast<std::size_t>(bin_of_[v])].push_back(static_cast<NodeId>(v));
  }
  for (int b = 0; b < k; ++b) {
    if (members_[static_cast<std::size_t>(b)].empty()) throw std::invalid_argument("bin " + std::to_string(b) + " is empty");
  }
  if (!bin_of_.empty() && k < 1) throw std::invalid_argument("partition needs at least one bin");
}

BinPartition BinPartition::relabeled_by_size() const {
  std::vector<int> order(members_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ma = members_[static_cast<std::size_t>(a)];
    const auto& mb = members_[static_cast<std::size_t>(b)];
    if (ma.size() != mb.size()) return ma.size() > mb.size();
    return ma.front() < mb.front();
  });
  std::vector<int> relabel(members_.size());
  for (std::size_t i = 0; i < order.size(); ++i) relabel[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  std::vector<int> out(bin_of_.size());
  for (std::size_t v = 0; v < bin_of_.size(); ++v) out[v] = relabel[static_cast<std::size_t>(bin_of_[v])];
  return BinPartition(std::move(out));
}

// ---------------------------------------------------------------- generation

SbmGraph gen_sbm(std::span<const int> block_sizes, double p_in, double p_out, std::uint64_t seed) {
  if (block_sizes.empty()) throw std::invalid_argument("gen_sbm: empty block list");
  if (!(p_in >= 0.0 && p_in <= 1.0) || !(p_out >= 0.0 && p_out <= 1.0)) {
    throw std::invalid_argument("gen_sbm: probabilities must lie in [0, 1]");
  }
  if (p_out > p_in) throw std::invalid_argument("gen_sbm: p_out must not exceed p_in");
  std::vector<int> block;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) {
    if (block_sizes[b] < 1) throw std::invalid_argument("gen_sbm: block sizes must be >= 1");
    block.insert(block.end(), static_cast<std::size_t>(block_sizes[b]), static_cast<int>(b));
  }
  const int n = static_cast<int>(block.size());
  Rng rng(seed);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = block[static_cast<std::size_t>(i)] == block[static_cast<std::size_t>(j)] ? p_in : p_out;
      if (rng.uniform() < p) edges.emplace_back(i, j);
    }
  }
  return {Graph(n, std::move(edges)), BinPartition(std::move(block))};
}

// ---------------------------------------------------------------- text formats

LoadedGraph load_edge_list(std::istream& in) {
  LoadedGraph out;
  std::unordered_map<long long, NodeId> dense;
  auto id_of = [&](long long raw) {
    auto [it, inserted] = dense.try_emplace(raw, static_cast<NodeId>(out.original_ids.size()));
    if (inserted) out.original_ids.push_back(raw);
    return it->second;
  };
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = std::string_view(line);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto [a, b] = parse_pair<long long>(text, line_no);
    const NodeId u = id_of(a);
    const NodeId v = id_of(b);
    if (u == v) {
      ++out.dropped_self_loops;
      continue;
    }
    edges.push_back(ordered(u, v));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  out.graph = Graph(static_cast<int>(out.original_ids.size()), std::move(edges));
  return out;
}

void write_edge_list(std::ostream& out, const Graph& graph) {
  for (const auto& [u, v] : graph.edges()) out << u << ',' << v << '\n';
}

BinPartition load_partition(std::istream& in, int n) {
  std::vector<int> bin(static_cast<std::size_t>(n), -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = std::string_view(line);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto [node, b] = parse_pair<int>(text, line_no);
    if (node < 0 || node >= n) throw ParseError(line_no, "node id out of range");
    if (b < 0) throw ParseError(line_no, "negative bin index");
    if (bin[static_cast<std::size_t>(node)] >= 0) throw ParseError(line_no, "node assigned twice");
    bin[static_cast<std::size_t>(node)] = b;
  }
  for (int v = 0; v < n; ++v) {
    if (bin[static_cast<std::size_t>(v)] < 0) throw std::invalid_argument("partition misses node " + std::to_string(v));
  }
  return BinPartition(std::move(bin));
}

void write_partition(std::ostream& out, const BinPartition& partition) {
  for (int v = 0; v < partition.node_count(); ++v) out << v << ',' << partition.bin_of(v) << '\n';
}

// ---------------------------------------------------------------- structure

std::map<Edge, double> edge_betweenness(const Graph& graph) {
  auto score = brandes_edges(adjacency_of(graph));
  for (auto& [edge, value] : score) value /= 2.0;
  return score;
}

double modularity(const Graph& graph, const BinPartition& partition) {
  if (partition.node_count() != graph.node_count()) throw std::invalid_argument("partition does not cover the graph");
  const double m = static_cast<double>(graph.edge_count());
  if (m == 0.0) throw std::domain_error("modularity undefined for a graph without edges");
  const auto k = static_cast<std::size_t>(partition.bin_count());
  std::vector<double> within(k, 0.0), total_degree(k, 0.0);
  for (const auto& [u, v] : graph.edges()) {
    if (partition.bin_of(u) == partition.bin_of(v)) within[static_cast<std::size_t>(partition.bin_of(u))] += 1.0;
  }
  for (int v = 0; v < graph.node_count(); ++v) total_degree[static_cast<std::size_t>(partition.bin_of(v))] += graph.degree(v);
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double frac = total_degree[c] / (2.0 * m);
    q += within[c] / m - frac * frac;
  }
  return q;
}

BinPartition connected_components(const Graph& graph) { return BinPartition(component_labels(adjacency_of(graph))); }

CommunityResult detect_communities(const Graph& graph, int min_size) {
  if (graph.node_count() == 0) throw std::invalid_argument("detect_communities: empty graph");
  if (min_size < 1) throw std::invalid_argument("detect_communities: min_size must be >= 1");

  CommunityResult result;
  auto adj = adjacency_of(graph);
  auto labels = component_labels(adj);
  if (graph.edge_count() == 0) {
    result.partition = BinPartition(labels);
  } else {
    result.partition = BinPartition(labels);
    result.best_modularity = modularity(graph, result.partition);
    int components = result.partition.bin_count();
    std::size_t removed = 0;
    while (removed < graph.edge_count()) {
      const auto score = brandes_edges(adj);
      // Lowest (u, v) wins among numerically tied maxima.
      Edge best = score.begin()->first;
      double best_value = score.begin()->second;
      for (const auto& [edge, value] : score) {
        if (value > best_value * (1.0 + 1e-12) + 1e-12) {
          best = edge;
          best_value = value;
        }
      }
      auto drop = [&](NodeId a, NodeId b) {
        auto& list = adj[static_cast<std::size_t>(a)];
        list.erase(std::find(list.begin(), list.end(), b));
      };
      drop(best.first, best.second);
      drop(best.second, best.first);
      ++removed;
      labels = component_labels(adj);
      const int now = *std::max_element(labels.begin(), labels.end()) + 1;
      if (now > components) {
        components = now;
        BinPartition level(labels);
        const double q = modularity(graph, level);
        if (q > result.best_modularity + 1e-12) {
          result.best_modularity = q;
          result.partition = std::move(level);
          result.removals = removed;
        }
      }
    }
  }

  // Merge communities below min_size into the largest one.
  auto sized = result.partition.relabeled_by_size();
  std::vector<int> merged = sized.assignment();
  for (auto& b : merged) {
    if (sized.bin_size(b) < min_size) b = 0;
  }
  // Compact labels, then relabel by size again.
  std::vector<int> compact(static_cast<std::size_t>(sized.bin_count()), -1);
  int next = 0;
  for (auto& b : merged) {
    auto& c = compact[static_cast<std::size_t>(b)];
    if (c < 0) c = next++;
    b = c;
  }
  result.partition = BinPartition(std::move(merged)).relabeled_by_size();
  return result;
}

}  // namespace qising

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qising {

using NodeId = int;
using Edge = std::pair<NodeId, NodeId>;  // always (min, max)

/// Thrown by the text loaders; carries the 1-based offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Fixed undirected simple graph. Immutable after construction.
class Graph {
 public:
  Graph() = default;
  /// Edges may come in any orientation; duplicates and self-loops are rejected.
  Graph(int n, std::vector<Edge> edges);

  int node_count() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const NodeId> neighbors(NodeId v) const;
  int degree(NodeId v) const;
  bool has_edge(NodeId u, NodeId v) const;

  /// Optional per-node covariates; stored only.
  const std::vector<std::vector<double>>& node_features() const { return features_; }
  void set_node_features(std::vector<std::vector<double>> features);

 private:
  int n_ = 0;
  std::vector<Edge> edges_;          // sorted
  std::vector<std::size_t> offset_;  // CSR
  std::vector<NodeId> adj_;          // sorted per node
  std::vector<std::vector<double>> features_;
};

/// Assignment of every node to one of K nonempty bins.
class BinPartition {
 public:
  BinPartition() = default;
  explicit BinPartition(std::vector<int> bin_of);

  int node_count() const { return static_cast<int>(bin_of_.size()); }
  int bin_count() const { return static_cast<int>(members_.size()); }
  int bin_of(NodeId v) const { return bin_of_.at(static_cast<std::size_t>(v)); }
  const std::vector<int>& assignment() const { return bin_of_; }
  const std::vector<NodeId>& members(int bin) const { return members_.at(static_cast<std::size_t>(bin)); }
  int bin_size(int bin) const { return static_cast<int>(members(bin).size()); }

  /// Relabel bins 0..K-1 by descending size, ties by smallest member id.
  BinPartition relabeled_by_size() const;

  bool operator==(const BinPartition& other) const { return bin_of_ == other.bin_of_; }

 private:
  std::vector<int> bin_of_;
  std::vector<std::vector<NodeId>> members_;
};

struct SbmGraph {
  Graph graph;
  BinPartition blocks;
};

SbmGraph gen_sbm(std::span<const int> block_sizes, double p_in, double p_out, std::uint64_t seed);

struct LoadedGraph {
  Graph graph;
  std::vector<long long> original_ids;  // dense id -> id in the file
  std::size_t dropped_self_loops = 0;
};

/// Reads `src,dst` lines; `#` starts a comment, blank lines are skipped.
LoadedGraph load_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const Graph& graph);

/// Reads `node,bin` lines; every node 0..n-1 must appear exactly once.
BinPartition load_partition(std::istream& in, int n);
void write_partition(std::ostream& out, const BinPartition& partition);

/// Brandes accumulation, undirected convention (each unordered pair once).
std::map<Edge, double> edge_betweenness(const Graph& graph);

/// Newman modularity; throws if the graph has no edges.
double modularity(const Graph& graph, const BinPartition& partition);

/// Connected components as a partition (labels in first-seen order).
BinPartition connected_components(const Graph& graph);

struct CommunityResult {
  BinPartition partition;
  double best_modularity = 0.0;  // before the small-community merge
  std::size_t removals = 0;      // edges removed to reach the best level
};

/// Girvan-Newman with best-modularity level selection, then communities
/// smaller than `min_size` are merged into the largest one.
CommunityResult detect_communities(const Graph& graph, int min_size);

int degree(const Graph& graph, NodeId node);

}  // namespace qising

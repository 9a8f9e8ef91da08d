#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qising/graph.hpp"
#include "qising/rng.hpp"

namespace qising {

using Adoption = std::vector<std::uint8_t>;

/// SIS environment. `spread[k]` is the per-edge transmission probability of
/// an adopted node in bin k, `churn[k]` the per-period reversion probability.
struct SisConfig {
  Graph graph;
  BinPartition partition;
  std::vector<double> spread;
  std::vector<double> churn;

  SisConfig() = default;
  SisConfig(Graph g, BinPartition p, std::vector<double> spread_rates, std::vector<double> churn_rates);

  int node_count() const { return graph.node_count(); }
  int bin_count() const { return partition.bin_count(); }
  double spread_of(NodeId v) const { return spread[static_cast<std::size_t>(partition.bin_of(v))]; }
  double churn_of(NodeId v) const { return churn[static_cast<std::size_t>(partition.bin_of(v))]; }
};

struct SisState {
  Adoption adopted;
  int t = 0;
};

/// What a controller asks for in one period: a bin, optionally with the
/// exact node to seed (node-level baselines). Both empty = no intervention.
struct Treatment {
  std::optional<int> bin;
  std::optional<NodeId> node;

  static Treatment none() { return {}; }
  static Treatment in_bin(int b) { return {b, std::nullopt}; }
};

struct StepResult {
  SisState state;
  double reward = 0.0;
  std::optional<NodeId> seeded;
};

/// One period: churn, then seeding, then spreading on the post-seed set.
/// Random draws come from sub-streams of `rng` keyed by (period, sub-step),
/// one uniform per node per sub-step, so they do not depend on the action.
StepResult step(const SisState& state, const SisConfig& config, const Treatment& treatment, const Rng& rng);

/// Network-wide adoption rate.
double reward(std::span<const std::uint8_t> y);

struct PanelRecord {
  std::optional<NodeId> action;  // realized seeded node
  Adoption y;
  bool operator==(const PanelRecord&) const = default;
};

struct Panel {
  Adoption y0;
  std::vector<PanelRecord> records;  // t = 1..T

  int periods() const { return static_cast<int>(records.size()); }
  int node_count() const { return static_cast<int>(y0.size()); }
  /// y_t for t in 0..T.
  const Adoption& y(int t) const { return t == 0 ? y0 : records.at(static_cast<std::size_t>(t - 1)).y; }

  bool operator==(const Panel&) const = default;
};

/// Controller used while logging: sees y_{t-1} and the 1-based period t.
using Controller = std::function<Treatment(const Adoption& y_prev, int t, Rng& rng)>;

Panel generate_panel(const SisConfig& config, const Controller& logging_policy, int periods, std::uint64_t seed,
                     std::optional<Adoption> y0 = std::nullopt);

/// JSONL: header {"t":0,"y0":[...]}, then one {"t","a","y"} per period.
void write_panel(std::ostream& out, const Panel& panel);
Panel read_panel(std::istream& in);

}  // namespace qising

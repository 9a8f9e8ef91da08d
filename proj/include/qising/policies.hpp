#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qising/diffusion.hpp"
#include "qising/io.hpp"
#include "qising/pevi.hpp"
#include "qising/qnetwork.hpp"
#include "qising/transitions.hpp"

namespace qising {

/// What a policy sees before acting in period t (1-based).
struct Observation {
  std::span<const std::uint8_t> y_prev;
  int t = 1;
  std::optional<QIsingState> state;
};

struct Decision {
  int bin = 0;
  std::optional<NodeId> node;  // set by node-level baselines; always inside `bin`
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string kind() const = 0;
  virtual Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// LI(v) = number of neighbors with strictly larger degree.
std::vector<int> lir_index(const Graph& graph);

class RandomBinPolicy final : public Policy {
 public:
  std::string kind() const override { return "random_bin"; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;
};

/// Highest-degree currently susceptible node (ties: lowest id).
class DegreePolicy final : public Policy {
 public:
  std::string kind() const override { return "degree"; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;
};

/// Round-robin over bins by period; highest-degree susceptible node inside.
class DegreeBinPolicy final : public Policy {
 public:
  std::string kind() const override { return "degree_bin"; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;
};

/// Local leaders (LI = 0) by descending degree, then everyone else by
/// descending degree; the first still-susceptible node is treated.
class LirPolicy final : public Policy {
 public:
  explicit LirPolicy(const Graph& graph);
  std::string kind() const override { return "lir"; }
  const std::vector<NodeId>& schedule() const { return schedule_; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;

 private:
  std::vector<NodeId> schedule_;
};

/// Exact expected mean adoption after one step of `config` when bin b is
/// chosen at y_prev; enumerates churn outcomes (oracle use, small graphs).
double expected_one_step_reward(const SisConfig& config, std::span<const std::uint8_t> y_prev, int bin);

class GreedyMyopicPolicy final : public Policy {
 public:
  explicit GreedyMyopicPolicy(SisConfig config) : config_(std::move(config)) {}
  std::string kind() const override { return "greedy_myopic"; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;

 private:
  SisConfig config_;
};

/// argmax_b Q(state, b). With a StateBuilder the state is rebuilt from
/// y_prev; without one, obs.state must be supplied.
class LearnedQPolicy final : public Policy {
 public:
  LearnedQPolicy(QFunction q, std::optional<StateBuilder> states) : q_(std::move(q)), states_(std::move(states)) {}
  std::string kind() const override { return "learned_q"; }
  const QFunction& q() const { return q_; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;

 private:
  QFunction q_;
  std::optional<StateBuilder> states_;
};

/// argmax_b Q_h(state, b) at stage h = min(t, H).
class PeviActPolicy final : public Policy {
 public:
  PeviActPolicy(PeviPolicy pevi, std::optional<StateBuilder> states)
      : pevi_(std::move(pevi)), states_(std::move(states)) {}
  std::string kind() const override { return "pevi"; }
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;

 private:
  PeviPolicy pevi_;
  std::optional<StateBuilder> states_;
};

/// Majority vote over member bins; ties go to the lowest bin index.
class EnsemblePolicy final : public Policy {
 public:
  explicit EnsemblePolicy(std::vector<PolicyPtr> members);
  std::string kind() const override { return "ensemble"; }
  const std::vector<PolicyPtr>& members() const { return members_; }
  /// Per-bin vote counts for this observation.
  std::vector<int> votes(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const;
  Decision act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng& rng) const override;

 private:
  std::vector<PolicyPtr> members_;
};

/// Adapts a policy to the logging interface of generate_panel.
Controller as_controller(PolicyPtr policy, const Graph& graph, const BinPartition& partition);

/// {"kind": ..., "config": {...}}. Learned kinds reference model files by
/// path, resolved relative to `base_dir`:
///   learned_q: {"model": q.json, "params": ising.json | absent, "state": "ising" | "plain"}
///   pevi:      {"model": pevi.json, "params": ..., "state": ...}
///   ensemble:  {"members": [spec, ...]}
///   greedy_myopic needs `oracle` dynamics.
PolicyPtr load_policy(const Json& spec, const Graph& graph, const std::filesystem::path& base_dir = {},
                      const SisConfig* oracle = nullptr);

}  // namespace qising

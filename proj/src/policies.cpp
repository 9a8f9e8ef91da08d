#include "qising/policies.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace qising {

namespace {

bool susceptible(std::span<const std::uint8_t> y, NodeId v) { return !y[static_cast<std::size_t>(v)]; }

/// Highest-degree susceptible node among `candidates`, lowest id on ties.
std::optional<NodeId> best_by_degree(const Graph& graph, std::span<const std::uint8_t> y,
                                     std::span<const NodeId> candidates) {
  std::optional<NodeId> best;
  for (NodeId v : candidates) {
    if (!susceptible(y, v)) continue;
    if (!best || graph.degree(v) > graph.degree(*best) || (graph.degree(v) == graph.degree(*best) && v < *best)) {
      best = v;
    }
  }
  return best;
}

void check_observation(const Observation& obs, const Graph& graph) {
  if (static_cast<int>(obs.y_prev.size()) != graph.node_count()) {
    throw std::invalid_argument("observation does not match the graph");
  }
}

QIsingState learner_state(const Observation& obs, const std::optional<StateBuilder>& states, const Graph& graph,
                          const BinPartition& partition) {
  if (states) return states->build(graph, partition, obs.y_prev);
  if (!obs.state) throw std::invalid_argument("learned policy requires a Q-Ising state in the observation");
  return *obs.state;
}

}  // namespace

std::vector<int> lir_index(const Graph& graph) {
  std::vector<int> li(static_cast<std::size_t>(graph.node_count()), 0);
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    for (NodeId u : graph.neighbors(v)) {
      if (graph.degree(u) > graph.degree(v)) ++li[static_cast<std::size_t>(v)];
    }
  }
  return li;
}

Decision RandomBinPolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition,
                              Rng& rng) const {
  check_observation(obs, graph);
  return {static_cast<int>(rng.below(static_cast<std::uint64_t>(partition.bin_count()))), std::nullopt};
}

Decision DegreePolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng&) const {
  check_observation(obs, graph);
  std::vector<NodeId> all(static_cast<std::size_t>(graph.node_count()));
  std::iota(all.begin(), all.end(), 0);
  if (const auto v = best_by_degree(graph, obs.y_prev, all)) return {partition.bin_of(*v), v};
  // Everyone adopted: fall back to the top-degree node's bin without forcing.
  const auto top = *std::max_element(all.begin(), all.end(), [&](NodeId a, NodeId b) {
    return graph.degree(a) < graph.degree(b) || (graph.degree(a) == graph.degree(b) && a > b);
  });
  return {partition.bin_of(top), std::nullopt};
}

Decision DegreeBinPolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition,
                              Rng&) const {
  check_observation(obs, graph);
  const int bin = (obs.t - 1) % partition.bin_count();
  return {bin, best_by_degree(graph, obs.y_prev, partition.members(bin))};
}

LirPolicy::LirPolicy(const Graph& graph) {
  const auto li = lir_index(graph);
  schedule_.resize(static_cast<std::size_t>(graph.node_count()));
  std::iota(schedule_.begin(), schedule_.end(), 0);
  std::stable_sort(schedule_.begin(), schedule_.end(), [&](NodeId a, NodeId b) {
    const bool la = li[static_cast<std::size_t>(a)] == 0;
    const bool lb = li[static_cast<std::size_t>(b)] == 0;
    if (la != lb) return la;
    return graph.degree(a) > graph.degree(b);
  });
}

Decision LirPolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng&) const {
  check_observation(obs, graph);
  if (schedule_.size() != obs.y_prev.size()) throw std::invalid_argument("LIR schedule built for another graph");
  for (NodeId v : schedule_) {
    if (susceptible(obs.y_prev, v)) return {partition.bin_of(v), v};
  }
  return {partition.bin_of(schedule_.front()), std::nullopt};
}

double expected_one_step_reward(const SisConfig& config, std::span<const std::uint8_t> y_prev, int bin) {
  const int n = config.node_count();
  if (static_cast<int>(y_prev.size()) != n) throw std::invalid_argument("y_prev length mismatch");
  if (bin < 0 || bin >= config.bin_count()) throw std::out_of_range("bin out of range");
  std::vector<NodeId> adopted;
  for (NodeId v = 0; v < n; ++v) {
    if (y_prev[static_cast<std::size_t>(v)]) adopted.push_back(v);
  }
  if (adopted.size() > 20) throw std::invalid_argument("expected_one_step_reward: too many adopted nodes to enumerate");

  double expected = 0.0;
  Adoption y(static_cast<std::size_t>(n));
  for (std::uint32_t mask = 0; mask < (1u << adopted.size()); ++mask) {
    // Bit set = node survives churn.
    double prob = 1.0;
    std::fill(y.begin(), y.end(), 0);
    for (std::size_t i = 0; i < adopted.size(); ++i) {
      const double churn = config.churn_of(adopted[i]);
      if (mask & (1u << i)) {
        prob *= 1.0 - churn;
        y[static_cast<std::size_t>(adopted[i])] = 1;
      } else {
        prob *= churn;
      }
    }
    if (prob == 0.0) continue;
    std::vector<NodeId> candidates;
    for (NodeId v : config.partition.members(bin)) {
      if (!y[static_cast<std::size_t>(v)]) candidates.push_back(v);
    }
    auto mean_after_spread = [&](const Adoption& seeded) {
      double total = 0.0;
      for (NodeId j = 0; j < n; ++j) {
        if (seeded[static_cast<std::size_t>(j)]) {
          total += 1.0;
          continue;
        }
        double stay = 1.0;
        for (NodeId i : config.graph.neighbors(j)) {
          if (seeded[static_cast<std::size_t>(i)]) stay *= 1.0 - config.spread_of(i);
        }
        total += 1.0 - stay;
      }
      return total / n;
    };
    if (candidates.empty()) {
      expected += prob * mean_after_spread(y);
    } else {
      double inner = 0.0;
      for (NodeId c : candidates) {
        Adoption seeded = y;
        seeded[static_cast<std::size_t>(c)] = 1;
        inner += mean_after_spread(seeded);
      }
      expected += prob * inner / static_cast<double>(candidates.size());
    }
  }
  return expected;
}

Decision GreedyMyopicPolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition,
                                 Rng&) const {
  check_observation(obs, graph);
  int best = 0;
  double best_value = -1.0;
  for (int b = 0; b < partition.bin_count(); ++b) {
    const double v = expected_one_step_reward(config_, obs.y_prev, b);
    if (v > best_value + 1e-15) {
      best = b;
      best_value = v;
    }
  }
  return {best, std::nullopt};
}

Decision LearnedQPolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng&) const {
  check_observation(obs, graph);
  const auto state = learner_state(obs, states_, graph, partition).concat();
  return {q_.greedy_action(state), std::nullopt};
}

Decision PeviActPolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition, Rng&) const {
  check_observation(obs, graph);
  const auto state = learner_state(obs, states_, graph, partition);
  const int h = std::clamp(obs.t, 1, pevi_.horizon());
  return {pevi_.greedy_action(h, state), std::nullopt};
}

EnsemblePolicy::EnsemblePolicy(std::vector<PolicyPtr> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
}

std::vector<int> EnsemblePolicy::votes(const Observation& obs, const Graph& graph, const BinPartition& partition,
                                       Rng& rng) const {
  std::vector<int> counts(static_cast<std::size_t>(partition.bin_count()), 0);
  for (const auto& m : members_) ++counts.at(static_cast<std::size_t>(m->act(obs, graph, partition, rng).bin));
  return counts;
}

Decision EnsemblePolicy::act(const Observation& obs, const Graph& graph, const BinPartition& partition,
                             Rng& rng) const {
  const auto counts = votes(obs, graph, partition, rng);
  const auto best = std::max_element(counts.begin(), counts.end());  // first maximum = lowest bin
  return {static_cast<int>(best - counts.begin()), std::nullopt};
}

Controller as_controller(PolicyPtr policy, const Graph& graph, const BinPartition& partition) {
  return [policy = std::move(policy), &graph, &partition](const Adoption& y_prev, int t, Rng& rng) {
    const Decision d = policy->act(Observation{y_prev, t, std::nullopt}, graph, partition, rng);
    return Treatment{d.bin, d.node};
  };
}

namespace {

std::optional<StateBuilder> state_builder_from(const Json& config, const std::filesystem::path& base_dir) {
  const std::string mode = config.value("state", std::string("ising"));
  if (mode == "plain") return StateBuilder::plain();
  if (mode != "ising") throw std::invalid_argument("unknown state mode '" + mode + "'");
  if (!config.contains("params")) return std::nullopt;
  return StateBuilder(params_from_json(read_json_file(base_dir / config.at("params").get<std::string>())));
}

}  // namespace

PolicyPtr load_policy(const Json& spec, const Graph& graph, const std::filesystem::path& base_dir,
                      const SisConfig* oracle) {
  const std::string kind = spec.at("kind").get<std::string>();
  const Json config = spec.value("config", Json::object());
  if (kind == "random_bin") return std::make_shared<RandomBinPolicy>();
  if (kind == "degree") return std::make_shared<DegreePolicy>();
  if (kind == "degree_bin") return std::make_shared<DegreeBinPolicy>();
  if (kind == "lir") return std::make_shared<LirPolicy>(graph);
  if (kind == "greedy_myopic") {
    if (oracle == nullptr) throw std::invalid_argument("greedy_myopic needs the true dynamics");
    return std::make_shared<GreedyMyopicPolicy>(*oracle);
  }
  if (kind == "learned_q") {
    auto q = qfunction_from_json(read_json_file(base_dir / config.at("model").get<std::string>()));
    return std::make_shared<LearnedQPolicy>(std::move(q), state_builder_from(config, base_dir));
  }
  if (kind == "pevi") {
    auto p = pevi_from_json(read_json_file(base_dir / config.at("model").get<std::string>()));
    return std::make_shared<PeviActPolicy>(std::move(p), state_builder_from(config, base_dir));
  }
  if (kind == "ensemble") {
    std::vector<PolicyPtr> members;
    for (const auto& m : config.at("members")) members.push_back(load_policy(m, graph, base_dir, oracle));
    return std::make_shared<EnsemblePolicy>(std::move(members));
  }
  throw std::invalid_argument("unknown policy kind '" + kind + "'");
}

}  // namespace qising

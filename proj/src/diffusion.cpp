#include "qising/diffusion.hpp"

#include <istream>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <string>

namespace qising {

namespace {

enum SubStep : std::uint64_t { kChurn = 0, kSeed = 1, kSpread = 2, kPolicy = 3 };

Rng sub_stream(const Rng& rng, int t, SubStep which) {
  return rng.child(static_cast<std::uint64_t>(t)).child(static_cast<std::uint64_t>(which));
}

void check_rates(const std::vector<double>& rates, int k, const char* what) {
  if (static_cast<int>(rates.size()) != k) {
    throw std::invalid_argument(std::string(what) + " rates must have one entry per bin");
  }
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(what) + " rate outside [0, 1]");
  }
}

}  // namespace

SisConfig::SisConfig(Graph g, BinPartition p, std::vector<double> spread_rates, std::vector<double> churn_rates)
    : graph(std::move(g)), partition(std::move(p)), spread(std::move(spread_rates)), churn(std::move(churn_rates)) {
  if (partition.node_count() != graph.node_count()) throw std::invalid_argument("partition does not match graph");
  check_rates(spread, partition.bin_count(), "spread");
  check_rates(churn, partition.bin_count(), "churn");
}

double reward(std::span<const std::uint8_t> y) {
  if (y.empty()) throw std::invalid_argument("reward of an empty adoption vector");
  const auto adopted = std::accumulate(y.begin(), y.end(), std::size_t{0});
  return static_cast<double>(adopted) / static_cast<double>(y.size());
}

StepResult step(const SisState& state, const SisConfig& config, const Treatment& treatment, const Rng& rng) {
  const int n = config.node_count();
  if (static_cast<int>(state.adopted.size()) != n) throw std::invalid_argument("state length does not match graph");
  if (treatment.bin && (*treatment.bin < 0 || *treatment.bin >= config.bin_count())) {
    throw std::out_of_range("bin index " + std::to_string(*treatment.bin) + " out of range");
  }
  if (treatment.node) {
    if (*treatment.node < 0 || *treatment.node >= n) throw std::out_of_range("forced node out of range");
    if (treatment.bin && config.partition.bin_of(*treatment.node) != *treatment.bin) {
      throw std::invalid_argument("forced node is not in the chosen bin");
    }
  }

  StepResult out;
  out.state.t = state.t + 1;
  Adoption y = state.adopted;

  Rng churn_rng = sub_stream(rng, out.state.t, kChurn);
  for (int i = 0; i < n; ++i) {
    const double u = churn_rng.uniform();
    if (y[static_cast<std::size_t>(i)] && u < config.churn_of(i)) y[static_cast<std::size_t>(i)] = 0;
  }

  if (treatment.node) {
    if (!y[static_cast<std::size_t>(*treatment.node)]) out.seeded = *treatment.node;
  } else if (treatment.bin) {
    std::vector<NodeId> susceptible;
    for (NodeId v : config.partition.members(*treatment.bin)) {
      if (!y[static_cast<std::size_t>(v)]) susceptible.push_back(v);
    }
    if (!susceptible.empty()) {
      Rng seed_rng = sub_stream(rng, out.state.t, kSeed);
      out.seeded = susceptible[seed_rng.below(susceptible.size())];
    }
  }
  if (out.seeded) y[static_cast<std::size_t>(*out.seeded)] = 1;

  // Spread from the post-seed adopted set.
  Rng spread_rng = sub_stream(rng, out.state.t, kSpread);
  Adoption next = y;
  for (int j = 0; j < n; ++j) {
    const double u = spread_rng.uniform();
    if (y[static_cast<std::size_t>(j)]) continue;
    double stay = 1.0;
    for (NodeId i : config.graph.neighbors(j)) {
      if (y[static_cast<std::size_t>(i)]) stay *= 1.0 - config.spread_of(i);
    }
    if (u < 1.0 - stay) next[static_cast<std::size_t>(j)] = 1;
  }
  out.state.adopted = std::move(next);
  out.reward = reward(out.state.adopted);
  return out;
}

Panel generate_panel(const SisConfig& config, const Controller& logging_policy, int periods, std::uint64_t seed,
                     std::optional<Adoption> y0) {
  if (periods < 1) throw std::invalid_argument("generate_panel: T must be >= 1");
  const Rng root(seed);
  const Rng dynamics = root.child("dynamics");
  const Rng policy = root.child("policy");

  Panel panel;
  panel.y0 = y0 ? std::move(*y0) : Adoption(static_cast<std::size_t>(config.node_count()), 0);
  if (static_cast<int>(panel.y0.size()) != config.node_count()) throw std::invalid_argument("y0 length mismatch");
  SisState state{panel.y0, 0};
  panel.records.reserve(static_cast<std::size_t>(periods));
  for (int t = 1; t <= periods; ++t) {
    Rng policy_rng = policy.child(static_cast<std::uint64_t>(t));
    const Treatment treatment = logging_policy(state.adopted, t, policy_rng);
    auto result = step(state, config, treatment, dynamics);
    panel.records.push_back({result.seeded, result.state.adopted});
    state = std::move(result.state);
  }
  return panel;
}

void write_panel(std::ostream& out, const Panel& panel) {
  nlohmann::json header{{"t", 0}, {"y0", panel.y0}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < panel.records.size(); ++i) {
    const auto& rec = panel.records[i];
    nlohmann::json row;
    row["t"] = i + 1;
    row["a"] = rec.action ? nlohmann::json(*rec.action) : nlohmann::json(nullptr);
    row["y"] = rec.y;
    out << row.dump() << '\n';
  }
}

Panel read_panel(std::istream& in) {
  Panel panel;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      const int t = row.at("t").get<int>();
      if (!have_header) {
        if (t != 0 || !row.contains("y0")) throw ParseError(line_no, "expected header record {\"t\":0,\"y0\":[...]}");
        panel.y0 = row.at("y0").get<Adoption>();
        have_header = true;
        continue;
      }
      if (t != panel.periods() + 1) throw ParseError(line_no, "periods must be consecutive");
      PanelRecord rec;
      if (!row.at("a").is_null()) rec.action = row.at("a").get<NodeId>();
      rec.y = row.at("y").get<Adoption>();
      if (rec.y.size() != panel.y0.size()) throw ParseError(line_no, "adoption vector length mismatch");
      for (auto v : rec.y) {
        if (v > 1) throw ParseError(line_no, "adoption entries must be 0 or 1");
      }
      if (rec.action && (*rec.action < 0 || *rec.action >= panel.node_count())) {
        throw ParseError(line_no, "action node out of range");
      }
      panel.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (!have_header) throw ParseError(line_no, "panel file has no header record");
  return panel;
}

}  // namespace qising

#include "qising/tiny_mdp.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace qising {

void TinyMdp::validate() const {
  if (horizon < 1) throw std::invalid_argument("TinyMdp: horizon must be >= 1");
  if (transitions.empty() || rewards.size() != transitions.size()) throw std::invalid_argument("TinyMdp: shape mismatch");
  if (initial_state < 0 || initial_state >= state_count()) throw std::invalid_argument("TinyMdp: bad initial state");
  for (int s = 0; s < state_count(); ++s) {
    const auto& acts = transitions[static_cast<std::size_t>(s)];
    if (acts.empty() || rewards[static_cast<std::size_t>(s)].size() != acts.size()) {
      throw std::invalid_argument("TinyMdp: state " + std::to_string(s) + " has no actions or mismatched rewards");
    }
    for (const auto& row : acts) {
      double total = 0.0;
      for (const auto& o : row) {
        if (o.next < 0 || o.next >= state_count() || o.prob < 0.0) throw std::invalid_argument("TinyMdp: bad outcome");
        total += o.prob;
      }
      if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("TinyMdp: transition row does not sum to 1");
    }
  }
}

std::vector<std::vector<double>> policy_values(const TinyMdp& mdp, const StageRule& rule) {
  mdp.validate();
  const auto n = static_cast<std::size_t>(mdp.state_count());
  std::vector<std::vector<double>> v(static_cast<std::size_t>(mdp.horizon) + 1, std::vector<double>(n, 0.0));
  for (int h = mdp.horizon; h >= 1; --h) {
    for (std::size_t s = 0; s < n; ++s) {
      const int a = rule(h, static_cast<int>(s));
      if (a < 0 || a >= mdp.action_count(static_cast<int>(s))) throw std::out_of_range("rule returned an invalid action");
      double value = mdp.rewards[s][static_cast<std::size_t>(a)];
      for (const auto& o : mdp.transitions[s][static_cast<std::size_t>(a)]) {
        value += o.prob * v[static_cast<std::size_t>(h)][static_cast<std::size_t>(o.next)];
      }
      v[static_cast<std::size_t>(h - 1)][s] = value;
    }
  }
  return v;
}

double exact_policy_value(const TinyMdp& mdp, const StageRule& rule) {
  return policy_values(mdp, rule).front()[static_cast<std::size_t>(mdp.initial_state)];
}

OptimalSolution solve_optimal(const TinyMdp& mdp) {
  mdp.validate();
  const auto n = static_cast<std::size_t>(mdp.state_count());
  OptimalSolution sol;
  sol.values.assign(static_cast<std::size_t>(mdp.horizon) + 1, std::vector<double>(n, 0.0));
  sol.actions.assign(static_cast<std::size_t>(mdp.horizon), std::vector<int>(n, 0));
  for (int h = mdp.horizon; h >= 1; --h) {
    for (std::size_t s = 0; s < n; ++s) {
      double best = -INFINITY;
      for (int a = 0; a < mdp.action_count(static_cast<int>(s)); ++a) {
        double q = mdp.rewards[s][static_cast<std::size_t>(a)];
        for (const auto& o : mdp.transitions[s][static_cast<std::size_t>(a)]) {
          q += o.prob * sol.values[static_cast<std::size_t>(h)][static_cast<std::size_t>(o.next)];
        }
        if (q > best) {
          best = q;
          sol.actions[static_cast<std::size_t>(h - 1)][s] = a;
        }
      }
      sol.values[static_cast<std::size_t>(h - 1)][s] = best;
    }
  }
  sol.initial_state = mdp.initial_state;
  return sol;
}

std::vector<std::vector<double>> state_distributions(const TinyMdp& mdp, const StageRule& rule) {
  mdp.validate();
  const auto n = static_cast<std::size_t>(mdp.state_count());
  std::vector<std::vector<double>> d(static_cast<std::size_t>(mdp.horizon), std::vector<double>(n, 0.0));
  d[0][static_cast<std::size_t>(mdp.initial_state)] = 1.0;
  for (int h = 1; h < mdp.horizon; ++h) {
    for (std::size_t s = 0; s < n; ++s) {
      const double mass = d[static_cast<std::size_t>(h - 1)][s];
      if (mass == 0.0) continue;
      const int a = rule(h, static_cast<int>(s));
      for (const auto& o : mdp.transitions[s][static_cast<std::size_t>(a)]) {
        d[static_cast<std::size_t>(h)][static_cast<std::size_t>(o.next)] += mass * o.prob;
      }
    }
  }
  return d;
}

int encode_adoption(std::span<const std::uint8_t> y) {
  if (y.size() > 16) throw std::invalid_argument("encode_adoption: at most 16 nodes");
  int mask = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) mask |= 1 << i;
  }
  return mask;
}

Adoption decode_adoption(int mask, int n) {
  Adoption y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (mask >> i) & 1;
  return y;
}

TinyMdp sis_tiny_mdp(const SisConfig& config, int horizon, double reward_scale) {
  const int n = config.node_count();
  if (n > 10) throw std::invalid_argument("sis_tiny_mdp: enumeration limited to 10 nodes");
  const int states = 1 << n;
  TinyMdp mdp;
  mdp.horizon = horizon;
  mdp.initial_state = 0;
  mdp.transitions.resize(static_cast<std::size_t>(states));
  mdp.rewards.resize(static_cast<std::size_t>(states));
  for (int s = 0; s < states; ++s) {
    for (NodeId action = 0; action < n; ++action) {
      std::map<int, double> next;
      // Churn outcomes of currently adopted nodes.
      for (int survive = 0; survive < states; ++survive) {
        if ((survive & ~s) != 0) continue;
        double p_churn = 1.0;
        for (int i = 0; i < n; ++i) {
          if (!((s >> i) & 1)) continue;
          const double c = config.churn_of(i);
          p_churn *= ((survive >> i) & 1) ? 1.0 - c : c;
        }
        if (p_churn == 0.0) continue;
        const int seeded = survive | (1 << action);
        // Independent adoption of each susceptible node given the seeded set.
        std::vector<double> adopt(static_cast<std::size_t>(n), 0.0);
        for (int j = 0; j < n; ++j) {
          if ((seeded >> j) & 1) continue;
          double stay = 1.0;
          for (NodeId i : config.graph.neighbors(j)) {
            if ((seeded >> i) & 1) stay *= 1.0 - config.spread_of(i);
          }
          adopt[static_cast<std::size_t>(j)] = 1.0 - stay;
        }
        const int free_mask = (states - 1) & ~seeded;
        for (int gain = free_mask;; gain = (gain - 1) & free_mask) {
          double p = p_churn;
          for (int j = 0; j < n && p > 0.0; ++j) {
            if (!((free_mask >> j) & 1)) continue;
            p *= ((gain >> j) & 1) ? adopt[static_cast<std::size_t>(j)] : 1.0 - adopt[static_cast<std::size_t>(j)];
          }
          if (p > 0.0) next[seeded | gain] += p;
          if (gain == 0) break;
        }
      }
      std::vector<TinyMdp::Outcome> row;
      double expected = 0.0;
      for (const auto& [state, p] : next) {
        row.push_back({state, p});
        expected += p * reward(decode_adoption(state, n));
      }
      mdp.transitions[static_cast<std::size_t>(s)].push_back(std::move(row));
      mdp.rewards[static_cast<std::size_t>(s)].push_back(reward_scale * expected);
    }
  }
  mdp.validate();
  return mdp;
}

SisConfig greedy_counterexample_config(double rho) {
  return SisConfig(Graph(3, {{0, 1}}), BinPartition({0, 1, 2}), {rho, rho, 0.0}, {1.0, 1.0, 0.0});
}

TinyMdp greedy_counterexample_mdp(double rho) { return sis_tiny_mdp(greedy_counterexample_config(rho), 2, 3.0); }

}  // namespace qising

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "qising/diffusion.hpp"

namespace qising {

/// Explicit finite-horizon MDP with stationary dynamics.
struct TinyMdp {
  struct Outcome {
    int next = 0;
    double prob = 0.0;
  };
  int horizon = 1;
  int initial_state = 0;
  /// transitions[s][a] lists the successor distribution of action a in s.
  std::vector<std::vector<std::vector<Outcome>>> transitions;
  /// Expected immediate reward of action a in state s.
  std::vector<std::vector<double>> rewards;

  int state_count() const { return static_cast<int>(transitions.size()); }
  int action_count(int s) const { return static_cast<int>(transitions.at(static_cast<std::size_t>(s)).size()); }

  /// Throws if shapes disagree or a row does not sum to 1 within 1e-12.
  void validate() const;
};

/// Decision rule pi(h, s) -> action index, h = 1..H.
using StageRule = std::function<int(int h, int s)>;

/// Exact expected cumulative reward of `rule` from the initial state.
double exact_policy_value(const TinyMdp& mdp, const StageRule& rule);
/// Value-to-go table V[h-1][s] for h = 1..H+1 (last row zero).
std::vector<std::vector<double>> policy_values(const TinyMdp& mdp, const StageRule& rule);

struct OptimalSolution {
  std::vector<std::vector<double>> values;   // V*[h-1][s]
  std::vector<std::vector<int>> actions;     // pi*[h-1][s], lowest index on ties
  int initial_state = 0;
  double value() const { return values.front()[static_cast<std::size_t>(initial_state)]; }
  StageRule rule() const {
    return [this](int h, int s) { return actions[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s)]; };
  }
};
OptimalSolution solve_optimal(const TinyMdp& mdp);

/// State distribution d_h(s), h = 1..H, under `rule` from the initial state.
std::vector<std::vector<double>> state_distributions(const TinyMdp& mdp, const StageRule& rule);

/// Encodes an adoption vector of n <= 16 nodes as a bitmask.
int encode_adoption(std::span<const std::uint8_t> y);
Adoption decode_adoption(int mask, int n);

/// Exact MDP of the SIS step with node-level actions (action i forces node
/// i), starting from no adoption. Rewards are `reward_scale` times the
/// expected adoption rate after the step.
TinyMdp sis_tiny_mdp(const SisConfig& config, int horizon, double reward_scale = 1.0);

/// The three-node greedy counterexample: A-B linked with spread rho and
/// churn 1, C isolated with churn 0. Nodes A=0, B=1, C=2, each in its own
/// bin. Rewards count adopted nodes.
SisConfig greedy_counterexample_config(double rho);
TinyMdp greedy_counterexample_mdp(double rho);

}  // namespace qising

#pragma once

#include <vector>

#include "qising/diffusion.hpp"
#include "qising/ising.hpp"

namespace qising {

struct Transition {
  QIsingState s;
  int b = 0;
  double r = 0.0;
  QIsingState s_next;
};

/// How the learner summarizes a lagged adoption vector.
enum class StateMode {
  ising,  // (mean no-intervention belief per bin, mean lagged adoption per bin)
  plain,  // ablation without the structural model: (ybar, ybar)
};

/// Turns y_{t-1} into the 2K-dimensional learner state.
class StateBuilder {
 public:
  StateBuilder() = default;
  explicit StateBuilder(IsingParams params) : params_(std::move(params)), mode_(StateMode::ising) {}
  static StateBuilder plain() {
    StateBuilder b;
    b.mode_ = StateMode::plain;
    return b;
  }

  StateMode mode() const { return mode_; }
  const IsingParams& params() const { return params_; }

  QIsingState build(const Graph& graph, const BinPartition& partition, std::span<const std::uint8_t> y_prev) const;

 private:
  IsingParams params_;
  StateMode mode_ = StateMode::plain;
};

struct TransitionSet {
  std::vector<Transition> transitions;
  int skipped_no_action = 0;  // periods whose logged action was NONE
};

/// (s_t, bin(a_t), reward(y_t), s_{t+1}) for t = 1..T-1.
TransitionSet build_transitions(const Panel& panel, const StateBuilder& states, const Graph& graph,
                                const BinPartition& partition);

inline TransitionSet build_transitions(const Panel& panel, const IsingParams& params, const Graph& graph,
                                       const BinPartition& partition) {
  return build_transitions(panel, StateBuilder(params), graph, partition);
}

}  // namespace qising

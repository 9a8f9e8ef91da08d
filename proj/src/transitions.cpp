#include "qising/transitions.hpp"

#include <stdexcept>

namespace qising {

QIsingState StateBuilder::build(const Graph& graph, const BinPartition& partition,
                                std::span<const std::uint8_t> y_prev) const {
  if (mode_ == StateMode::ising) {
    const auto l0 = belief_no_intervention(params_, graph, partition, y_prev);
    return build_state(l0, y_prev, partition);
  }
  std::vector<double> y(y_prev.begin(), y_prev.end());
  auto s = build_state(y, y_prev, partition);
  s.l0_bar = s.y_bar;
  return s;
}

TransitionSet build_transitions(const Panel& panel, const StateBuilder& states, const Graph& graph,
                                const BinPartition& partition) {
  if (panel.periods() < 2) throw std::invalid_argument("build_transitions: panel needs at least 2 periods");
  TransitionSet out;
  QIsingState current = states.build(graph, partition, panel.y(0));
  for (int t = 1; t <= panel.periods() - 1; ++t) {
    QIsingState next = states.build(graph, partition, panel.y(t));
    const auto& rec = panel.records[static_cast<std::size_t>(t - 1)];
    if (rec.action) {
      out.transitions.push_back({current, partition.bin_of(*rec.action), reward(rec.y), next});
    } else {
      ++out.skipped_no_action;
    }
    current = std::move(next);
  }
  if (out.transitions.empty()) throw std::invalid_argument("build_transitions: no period carries an action");
  return out;
}

}  // namespace qising

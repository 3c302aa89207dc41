#include "orch/executor/vote.hpp"

#include "orch/error.hpp"

namespace orch::executor {

VoteTally tally(std::span<const OutcomeLabel> labels) {
  if (labels.empty()) throw Error(ErrorCode::invalid_argument, "labels: majority vote needs at least one label");
  std::map<OutcomeLabel, int> counts;
  for (auto& l : labels) ++counts[l];

  VoteTally out;
  int best = 0;
  int at_best = 0;
  // ascending (ordinal, name): a later entry with an equal count is higher
  for (auto& [label, n] : counts) {
    out.counts[label.name] = n;
    if (n > best) {
      best = n;
      at_best = 1;
      out.winner = label;
    } else if (n == best) {
      ++at_best;
      out.winner = label;
    }
  }
  out.tie = at_best > 1;
  return out;
}

}  // namespace orch::executor

#pragma once

#include <map>
#include <span>
#include <string>

#include "orch/core/types.hpp"

namespace orch::executor {

struct VoteTally {
  std::map<std::string, int> counts;  // label name -> rounds
  OutcomeLabel winner;
  bool tie = false;  // more than one label shared the top count
};

/// Most frequent label; ties go to the highest ordinal. Throws
/// invalid_argument on an empty list.
VoteTally tally(std::span<const OutcomeLabel> labels);

inline OutcomeLabel majority_vote(std::span<const OutcomeLabel> labels) { return tally(labels).winner; }

}  // namespace orch::executor

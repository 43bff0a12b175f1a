#pragma once

#include "gridrl/trajectory.hpp"

namespace gridrl {

// Binary outcome reward: R_i = 1 iff the trajectory succeeded, broadcast
// uniformly to every executed token. No process shaping of any kind.
// Idempotent.
void assign_outcome_rewards(RolloutGroup& group);

}  // namespace gridrl

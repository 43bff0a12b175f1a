#include "gridrl/rewards.hpp"

namespace gridrl {

void assign_outcome_rewards(RolloutGroup& group) {
  group.rewards.clear();
  group.rewards.reserve(group.trajectories.size());
  for (const Trajectory& traj : group.trajectories) {
    group.rewards.push_back(traj.success ? 1.0 : 0.0);
  }
}

}  // namespace gridrl

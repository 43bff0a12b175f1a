#pragma once

#include <cstdint>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/envsim.hpp"
#include "gridrl/parallel.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/trajectory.hpp"

namespace gridrl {

// Cycles a shuffled permutation of (task, seed) pairs; reshuffled each epoch.
// Deterministic given the master seed.
class ScenarioSampler {
 public:
  ScenarioSampler(std::vector<int> task_ids, std::uint64_t seed_lo,
                  std::uint64_t seed_hi, EnvConfig env,
                  std::uint64_t master_seed);

  Scenario next();

 private:
  void reshuffle();

  std::vector<int> task_ids_;
  std::uint64_t seed_lo_;
  std::uint64_t seed_hi_;
  EnvConfig env_;
  std::uint64_t master_seed_;
  std::uint64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::pair<int, std::uint64_t>> order_;
};

// Samples G episodes from one scenario's initial state. Episode RNG streams
// are keyed by (master seed, scenario seed, group index), so trajectories do
// not depend on worker scheduling. All active episodes advance one chunk per
// wave; finished episodes are evicted from the wave.
RolloutGroup rollout_group(const PolicyParams& policy, const Scenario& scenario,
                           int group_size, double temperature, int max_steps,
                           std::uint64_t master_seed, WorkerPool& pool);

struct CollectStats {
  int accepted = 0;
  int rejected_all_success = 0;
  int rejected_all_fail = 0;
  long sampled_trajectories = 0;
  long successful_trajectories = 0;
  long push_trajectories = 0;
  double entropy_sum = 0.0;
  long entropy_rows = 0;
};

struct CollectResult {
  std::vector<RolloutGroup> groups;
  CollectStats stats;
};

// Draws scenario groups until batch_size of them have mixed outcomes.
// Uniform-outcome groups are rejected and counted. Throws ZeroSignalError if
// the batch cannot be filled within max_resample sampled groups. With
// dynamic_sampling off every group is accepted and nothing is rejected.
CollectResult collect_batch(const PolicyParams& policy,
                            ScenarioSampler& sampler, int batch_size,
                            int group_size, double temperature, int max_steps,
                            int max_resample, bool dynamic_sampling,
                            std::uint64_t master_seed, WorkerPool& pool);

struct TaskEval {
  int task_id = 0;
  int episodes = 0;
  int successes = 0;
  int grasp = 0;
  int push = 0;
  int other = 0;
};

struct SuccessReport {
  std::vector<TaskEval> per_task;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double grasp_fraction = 0.0;
  double push_fraction = 0.0;
};

// Greedy-decoding evaluation; no learning, no sampling noise.
SuccessReport evaluate(const PolicyParams& policy,
                       const std::vector<Scenario>& scenarios,
                       int episodes_per_scenario, WorkerPool& pool);

// Greedy rollout of a single scenario.
Trajectory greedy_trajectory(const PolicyParams& policy,
                             const Scenario& scenario);

std::vector<Scenario> make_eval_scenarios(const std::vector<int>& task_ids,
                                          std::uint64_t seed_lo,
                                          std::uint64_t seed_hi,
                                          const EnvConfig& env);

}  // namespace gridrl

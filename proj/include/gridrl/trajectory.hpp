#pragma once

#include <string_view>
#include <vector>

#include "gridrl/envsim.hpp"

namespace gridrl {

enum class Strategy { kGrasp, kPush, kOther };

std::string_view strategy_name(Strategy s);

// One policy inference step: the observation the chunk was sampled from,
// the k sampled tokens and their behavior log-probabilities.
struct ChunkRecord {
  std::vector<double> observation;
  std::vector<int> tokens;
  std::vector<double> logprobs;
};

struct Trajectory {
  Scenario scenario;
  std::vector<ChunkRecord> chunks;
  // Tokens actually executed before the episode ended. Sampled chunk tails
  // past this point never touched the environment and are never trained on.
  int executed_token_count = 0;
  bool success = false;
  Strategy strategy = Strategy::kOther;
  // Sum of behavior-distribution entropies over sampled chunk rows.
  double entropy_sum = 0.0;
  long entropy_rows = 0;

  std::vector<int> flat_tokens() const;
};

// G trajectories sharing one scenario. rewards/advantages are filled by the
// rewards and grpo modules respectively.
struct RolloutGroup {
  Scenario scenario;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// Scripted grasp-move-place demonstrator. BFS shortest paths with N<E<S<W
// tie-breaking; never emits PUSH; output is chunk-aligned with NOOP padding
// and verified successful by replay. Throws GenerationError when the
// scenario is unsolvable within the step budget.
Trajectory expert_demo(const Scenario& scenario, int chunk_size);

// Push: succeeded without GRASP ever attaching a task object.
// Grasp: succeeded with such an attachment. Other: did not succeed.
Strategy classify_strategy(const Trajectory& traj);

}  // namespace gridrl

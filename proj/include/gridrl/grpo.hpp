#pragma once

#include <functional>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/rollout.hpp"
#include "gridrl/trajectory.hpp"

namespace gridrl {

struct GrpoConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta_kl = 0.0;
  int group_size = 8;
  double rollout_temperature = 1.6;
  int train_batch_scenarios = 16;
  int mini_batch_trajectories = 32;
  double learning_rate = 1e-3;
  int max_iterations = 200;
  double advantage_std_epsilon = 1e-8;
  bool dynamic_sampling = true;
  int max_resample = 128;
};

GrpoConfig grpo_config_from(const RunConfig& cfg);

// Group-relative advantages: (R_i - mean) / population std. Throws
// DegenerateGroupError when the spread is below std_epsilon (all-equal
// rewards), which dynamic sampling prevents upstream.
std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                       double std_epsilon);

struct SurrogateResult {
  double value = 0.0;
  bool clip_active = false;
};

// min(r * adv, clip(r, 1 - eps_low, 1 + eps_high) * adv). clip_active
// reports that the clipped branch was the strictly smaller one.
SurrogateResult clipped_surrogate(double ratio, double advantage,
                                  double eps_low, double eps_high);

// One trajectory entering a loss mini-batch, paired with its group-relative
// advantage.
struct TrajectoryRef {
  const Trajectory* traj = nullptr;
  double advantage = 0.0;
};

struct GrpoLossResult {
  double loss = 0.0;
  // Per-token surrogate coefficients for policy backward, aligned with the
  // executed prefix of each trajectory, in batch order.
  std::vector<WeightedChunk> items;
  // Extra per-logit gradients from the KL term (empty when beta_kl == 0).
  std::vector<std::pair<std::vector<double>, std::vector<double>>> kl_items;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  long token_count = 0;
  long clipped_count = 0;
};

// Token-mean surrogate per trajectory, averaged over trajectories, negated
// into a loss. Ratios compare the current policy against the stored behavior
// log-probabilities at the rollout temperature. With beta_kl > 0 an exact
// per-token categorical KL against ref_policy is added.
GrpoLossResult grpo_loss(const std::vector<TrajectoryRef>& batch,
                         const PolicyParams& policy,
                         const PolicyParams* ref_policy,
                         const GrpoConfig& cfg);

// Full gradient of the loss: surrogate coefficients through backward plus
// the KL contribution.
GradVector grpo_gradient(const PolicyParams& policy,
                         const GrpoLossResult& loss, const GrpoConfig& cfg);

struct IterationOutcome {
  IterationStats stats;
  int updates = 0;
};

// One training iteration: snapshot the behavior policy, collect a mixed
// batch, assign rewards and advantages, then run one epoch of mini-batch
// updates. Throws ZeroSignalError (before any update) when the batch cannot
// be assembled.
IterationOutcome train_iteration(PolicyParams& policy, AdamState& opt,
                                 ScenarioSampler& sampler,
                                 const RunConfig& cfg, int iter_index,
                                 WorkerPool& pool,
                                 const PolicyParams* kl_ref = nullptr);

struct RlRunResult {
  int iterations_run = 0;
  int updates = 0;
  bool zero_signal_stop = false;
  std::string zero_signal_message;
};

// Runs up to cfg.max_iterations iterations, streaming metrics. ZeroSignal on
// the first iteration (no update ever applied) propagates to the caller;
// after at least one update it ends the run gracefully, since a policy that
// no longer yields mixed groups cannot learn further from outcome rewards.
RlRunResult run_rl(PolicyParams& policy, AdamState& opt, const RunConfig& cfg,
                   MetricsWriter* metrics, WorkerPool& pool,
                   const std::function<void(int, const IterationStats&)>&
                       on_iteration = nullptr);

}  // namespace gridrl

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/demo_io.hpp"
#include "gridrl/grpo.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/rollout.hpp"
#include "gridrl/sft.hpp"

namespace gridrl {

// One experiment recipe instance: base config, replicate seeds, scenario
// splits, output location. Evaluation seeds and unseen tasks never feed any
// training stream.
struct ExperimentSpec {
  std::string name;
  std::string output_dir;
  RunConfig config;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<int> unseen_task_ids;
};

// Audits the split: train/eval seed ranges disjoint, unseen tasks not
// trained on.
void validate_experiment(const ExperimentSpec& spec);

// Scans scenario seeds from seed_lo, skipping unsolvable ones, until `count`
// verified demos exist. skip > 0 discards that many valid demos first, so
// replicates can draw disjoint single-demo datasets.
DemoDataset generate_demos(const TaskSpec& task, const EnvConfig& env,
                           int chunk_size, std::uint64_t seed_lo,
                           std::uint64_t seed_hi, int count, int skip = 0);

struct ConditionResult {
  std::string condition;
  std::uint64_t seed = 0;
  double heldout_success = 0.0;
  double push_fraction = 0.0;
  bool zero_signal = false;
  int rl_iterations = 0;
};

struct DataScarcityReport {
  std::vector<ConditionResult> cells;
  double median_sft_one = 0.0;
  double median_sft_full = 0.0;
  double median_rl_one = 0.0;
  double median_rl_full = 0.0;
  std::string csv_path;
};

// Table-style comparison: {one demo, full demos} x {SFT only, SFT+RL},
// medians over the replicate seeds, held-out greedy evaluation.
DataScarcityReport run_data_scarcity(const ExperimentSpec& spec);

struct AblationPoint {
  std::string condition;
  std::uint64_t seed = 0;
  IterationStats stats;
};

struct AblationReport {
  std::vector<AblationPoint> points;
  // First iteration whose rollout success rate reached 0.90, per condition
  // and seed; -1 when never reached.
  std::vector<std::tuple<std::string, std::uint64_t, int>> time_to_090;
  long zero_adv_groups_on = 0;
  long zero_adv_groups_off = 0;
  std::string csv_path;
};

// Six paired curves toggling one exploration knob each: dynamic sampling
// on/off, rollout temperature 1.6/1.0, eps_high 0.28/0.20.
AblationReport run_exploration_ablation(const ExperimentSpec& spec);

struct FailureModeRow {
  std::string prior;
  int demo_count = 0;
  std::uint64_t seed = 0;
  double pre_success = 0.0;
  double post_success = 0.0;
  bool zero_signal = false;
};

struct FailureModeReport {
  std::vector<FailureModeRow> rows;
  std::string csv_path;
};

// RL applied to 0-demo, small and large SFT priors; reports pre/post
// held-out success and ZeroSignal occurrences.
FailureModeReport run_failure_modes(const ExperimentSpec& spec);

struct PushcutRow {
  std::uint64_t seed = 0;
  double pre_success = 0.0;
  double pre_push_fraction = 0.0;
  double post_success = 0.0;
  double post_push_fraction = 0.0;
  // Every Push-classified evaluation trajectory re-verified by replay.
  bool push_replays_ok = true;
};

struct PushcutReport {
  std::vector<PushcutRow> rows;
  std::string csv_path;
};

// Push-favorable scenarios, grasp-only demonstrations: measures whether RL
// discovers pushing that the demonstrator never used.
PushcutReport run_pushcut(const ExperimentSpec& spec);

// Converts a metrics JSON-lines log into a curve CSV with columns
// iteration, success, push_fraction, clip_fraction.
void convert_log_to_csv(const std::string& log_path,
                        const std::string& csv_path);

// Shared pipeline pieces.
PolicyMeta policy_meta_for(const RunConfig& cfg);

struct RlStageResult {
  RlRunResult run;
  bool zero_signal_abort = false;  // ZeroSignal before any update
  std::string message;
};

// run_rl wrapper that turns a first-iteration ZeroSignal into a reported
// outcome instead of an exception.
RlStageResult run_rl_stage(PolicyParams& policy, AdamState& opt,
                           const RunConfig& cfg, MetricsWriter* metrics,
                           WorkerPool& pool);

}  // namespace gridrl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridrl/envsim.hpp"

namespace gridrl {

// Every tunable in one flat struct. Values come from defaults, then config
// files, then command-line overrides, last wins. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t master_seed = 1;

  // Environment
  int grid_size = 8;
  int num_objects = 2;
  int step_budget = 64;
  int chunk_size = 8;
  int vocab_size = kVocabSize;
  std::string tasks = "move-adjacent";  // comma-separated training tasks
  std::string scenario_dist = "uniform";
  std::uint64_t train_seed_lo = 0;
  std::uint64_t train_seed_hi = 1000;  // exclusive
  std::uint64_t eval_seed_lo = 10000;
  std::uint64_t eval_seed_hi = 10100;  // exclusive

  // Policy
  int hidden_dim = 128;

  // GRPO
  int group_size = 8;
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta_kl = 0.0;
  double rollout_temperature = 1.6;
  int train_batch_scenarios = 16;
  int mini_batch_trajectories = 32;
  double learning_rate = 1e-3;
  int max_iterations = 200;
  double advantage_std_epsilon = 1e-8;
  bool dynamic_sampling = true;
  int max_resample_factor = 8;  // max_resample = factor * batch

  // SFT
  int sft_epochs = 200;
  bool sft_symmetry_augment = true;
  double sft_learning_rate = 1e-3;
  int sft_batch_chunks = 16;

  // Runtime
  int workers = 1;
  bool timing = false;  // emit measured wall_ms (breaks byte-identical logs)

  EnvConfig env_config() const;
  std::vector<int> task_ids() const;
  int max_resample() const { return max_resample_factor * train_batch_scenarios; }
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;
};

// Registry backing --help, --dump-config and unknown-key rejection.
const std::vector<ConfigKey>& config_keys();

void apply_config_line(RunConfig& cfg, const std::string& line,
                       const std::string& source);
void apply_config_file(RunConfig& cfg, const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key_equals_value);
void validate_config(const RunConfig& cfg);

// Canonical "key = value" rendering of the fully resolved config.
std::string dump_config(const RunConfig& cfg);

// Resolved (key, value) pairs in registry order.
std::vector<std::pair<std::string, std::string>> config_items(
    const RunConfig& cfg);

}  // namespace gridrl

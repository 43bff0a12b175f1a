#include "gridrl/rollout.hpp"

#include <algorithm>
#include <numeric>

#include "gridrl/errors.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

ScenarioSampler::ScenarioSampler(std::vector<int> task_ids,
                                 std::uint64_t seed_lo, std::uint64_t seed_hi,
                                 EnvConfig env, std::uint64_t master_seed)
    : task_ids_(std::move(task_ids)),
      seed_lo_(seed_lo),
      seed_hi_(seed_hi),
      env_(env),
      master_seed_(master_seed) {
  if (task_ids_.empty()) throw ConfigError("tasks", "no tasks to sample");
  if (seed_lo_ >= seed_hi_) {
    throw ConfigError("train_seed_hi", "empty scenario seed range");
  }
  reshuffle();
}

void ScenarioSampler::reshuffle() {
  order_.clear();
  for (int task_id : task_ids_) {
    for (std::uint64_t seed = seed_lo_; seed < seed_hi_; ++seed) {
      order_.emplace_back(task_id, seed);
    }
  }
  RngStream rng(StreamId::sampler_shuffle, master_seed_, epoch_);
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
  ++epoch_;
}

Scenario ScenarioSampler::next() {
  if (cursor_ >= order_.size()) reshuffle();
  const auto [task_id, seed] = order_[cursor_++];
  return make_scenario(task_by_id(task_id), seed, env_);
}

namespace {

struct EpisodeSlot {
  Env env;
  Trajectory traj;
  RngStream rng;

  EpisodeSlot(const Scenario& scenario, RngStream stream)
      : env(scenario), rng(stream) {
    traj.scenario = scenario;
  }
};

// Advances one episode by one chunk: observe, sample, execute until the
// chunk ends or the episode finishes.
void advance_chunk(const PolicyParams& policy, double temperature,
                   EpisodeSlot& slot) {
  const Scenario& scenario = slot.env.scenario();
  ChunkRecord chunk;
  chunk.observation =
      observe(slot.env.state(), scenario.task_id, scenario.env);
  const ChunkDistribution dist =
      forward(policy, chunk.observation, temperature);
  SampledChunk sampled = sample_chunk(dist, slot.rng);
  chunk.tokens = std::move(sampled.tokens);
  chunk.logprobs = std::move(sampled.logprobs);
  slot.traj.entropy_sum += sampled.entropy_sum;
  slot.traj.entropy_rows += dist.chunk_size;
  for (int token : chunk.tokens) {
    if (slot.env.state().done) break;
    slot.env.apply(token);
    ++slot.traj.executed_token_count;
  }
  slot.traj.chunks.push_back(std::move(chunk));
}

void finish_episode(EpisodeSlot& slot) {
  slot.traj.success = slot.env.state().success;
  slot.traj.strategy = classify_strategy(slot.traj);
}

}  // namespace

RolloutGroup rollout_group(const PolicyParams& policy, const Scenario& scenario,
                           int group_size, double temperature, int max_steps,
                           std::uint64_t master_seed, WorkerPool& pool) {
  if (group_size < 2) throw ConfigError("group_size", "group_size must be >= 2");
  if (!(temperature > 0.0)) {
    throw ConfigError("rollout_temperature", "temperature must be > 0");
  }

  Scenario bounded = scenario;
  bounded.env.step_budget = std::min(scenario.env.step_budget, max_steps);

  std::vector<EpisodeSlot> slots;
  slots.reserve(static_cast<std::size_t>(group_size));
  const std::uint64_t scenario_key =
      mix64(scenario.seed) ^ mix64(static_cast<std::uint64_t>(scenario.task_id));
  for (int g = 0; g < group_size; ++g) {
    slots.emplace_back(bounded,
                       RngStream(StreamId::episode, master_seed, scenario_key,
                                 static_cast<std::uint64_t>(g)));
  }

  std::vector<std::size_t> active(slots.size());
  std::iota(active.begin(), active.end(), std::size_t{0});
  while (!active.empty()) {
    pool.parallel_for(active.size(), [&](std::size_t i) {
      advance_chunk(policy, temperature, slots[active[i]]);
    });
    std::vector<std::size_t> still_active;
    for (std::size_t idx : active) {
      if (!slots[idx].env.state().done) still_active.push_back(idx);
    }
    active = std::move(still_active);
  }
  pool.parallel_for(slots.size(),
                    [&](std::size_t i) { finish_episode(slots[i]); });

  RolloutGroup group;
  group.scenario = bounded;
  for (EpisodeSlot& slot : slots) {
    group.trajectories.push_back(std::move(slot.traj));
  }
  return group;
}

CollectResult collect_batch(const PolicyParams& policy,
                            ScenarioSampler& sampler, int batch_size,
                            int group_size, double temperature, int max_steps,
                            int max_resample, bool dynamic_sampling,
                            std::uint64_t master_seed, WorkerPool& pool) {
  if (batch_size < 1) {
    throw ConfigError("train_batch_scenarios", "batch_size must be >= 1");
  }
  if (max_resample < batch_size) {
    throw ConfigError("max_resample_factor",
                      "max_resample must be >= batch_size");
  }

  CollectResult result;
  int sampled_groups = 0;
  while (static_cast<int>(result.groups.size()) < batch_size) {
    if (sampled_groups >= max_resample) {
      throw ZeroSignalError(
          result.stats.rejected_all_success, result.stats.rejected_all_fail,
          result.stats.accepted,
          "dynamic sampling found " + std::to_string(result.stats.accepted) +
              " mixed-outcome groups in " + std::to_string(sampled_groups) +
              " sampled (" +
              std::to_string(result.stats.rejected_all_success) +
              " all-success, " +
              std::to_string(result.stats.rejected_all_fail) +
              " all-fail); no update possible");
    }
    const Scenario scenario = sampler.next();
    RolloutGroup group = rollout_group(policy, scenario, group_size,
                                       temperature, max_steps, master_seed,
                                       pool);
    ++sampled_groups;

    int successes = 0;
    for (const Trajectory& traj : group.trajectories) {
      ++result.stats.sampled_trajectories;
      if (traj.success) ++result.stats.successful_trajectories;
      if (traj.strategy == Strategy::kPush) ++result.stats.push_trajectories;
      result.stats.entropy_sum += traj.entropy_sum;
      result.stats.entropy_rows += traj.entropy_rows;
      if (traj.success) ++successes;
    }

    const bool mixed = successes > 0 && successes < group_size;
    if (dynamic_sampling && !mixed) {
      if (successes == 0) {
        ++result.stats.rejected_all_fail;
      } else {
        ++result.stats.rejected_all_success;
      }
      continue;
    }
    ++result.stats.accepted;
    result.groups.push_back(std::move(group));
  }
  return result;
}

Trajectory greedy_trajectory(const PolicyParams& policy,
                             const Scenario& scenario) {
  Env env(scenario);
  Trajectory traj;
  traj.scenario = scenario;
  while (!env.state().done) {
    ChunkRecord chunk;
    chunk.observation = observe(env.state(), scenario.task_id, scenario.env);
    const ChunkDistribution dist = forward(policy, chunk.observation, 1.0);
    chunk.tokens = greedy_chunk(dist);
    chunk.logprobs.assign(chunk.tokens.size(), 0.0);
    for (int token : chunk.tokens) {
      if (env.state().done) break;
      env.apply(token);
      ++traj.executed_token_count;
    }
    traj.chunks.push_back(std::move(chunk));
  }
  traj.success = env.state().success;
  traj.strategy = classify_strategy(traj);
  return traj;
}

SuccessReport evaluate(const PolicyParams& policy,
                       const std::vector<Scenario>& scenarios,
                       int episodes_per_scenario, WorkerPool& pool) {
  if (episodes_per_scenario < 1) {
    throw ConfigError("eval_episodes", "episodes_per_scenario must be >= 1");
  }
  const std::size_t n =
      scenarios.size() * static_cast<std::size_t>(episodes_per_scenario);
  std::vector<Strategy> strategies(n, Strategy::kOther);
  std::vector<bool> successes(n, false);
  pool.parallel_for(n, [&](std::size_t i) {
    const Scenario& scenario = scenarios[i / static_cast<std::size_t>(
                                             episodes_per_scenario)];
    const Trajectory traj = greedy_trajectory(policy, scenario);
    strategies[i] = traj.strategy;
    successes[i] = traj.success;
  });

  SuccessReport report;
  std::vector<int> task_order;
  std::vector<TaskEval> evals;
  for (std::size_t i = 0; i < n; ++i) {
    const int task_id =
        scenarios[i / static_cast<std::size_t>(episodes_per_scenario)].task_id;
    auto it = std::find(task_order.begin(), task_order.end(), task_id);
    if (it == task_order.end()) {
      task_order.push_back(task_id);
      evals.push_back(TaskEval{task_id, 0, 0, 0, 0, 0});
      it = task_order.end() - 1;
    }
    TaskEval& te = evals[static_cast<std::size_t>(it - task_order.begin())];
    ++te.episodes;
    if (successes[i]) ++te.successes;
    switch (strategies[i]) {
      case Strategy::kGrasp:
        ++te.grasp;
        break;
      case Strategy::kPush:
        ++te.push;
        break;
      case Strategy::kOther:
        ++te.other;
        break;
    }
  }
  report.per_task = std::move(evals);
  for (const TaskEval& te : report.per_task) {
    report.episodes += te.episodes;
    report.successes += te.successes;
  }
  if (report.episodes > 0) {
    int grasp = 0;
    int push = 0;
    for (const TaskEval& te : report.per_task) {
      grasp += te.grasp;
      push += te.push;
    }
    report.success_rate =
        static_cast<double>(report.successes) / report.episodes;
    report.grasp_fraction = static_cast<double>(grasp) / report.episodes;
    report.push_fraction = static_cast<double>(push) / report.episodes;
  }
  return report;
}

std::vector<Scenario> make_eval_scenarios(const std::vector<int>& task_ids,
                                          std::uint64_t seed_lo,
                                          std::uint64_t seed_hi,
                                          const EnvConfig& env) {
  std::vector<Scenario> scenarios;
  for (int task_id : task_ids) {
    const TaskSpec& task = task_by_id(task_id);
    for (std::uint64_t seed = seed_lo; seed < seed_hi; ++seed) {
      scenarios.push_back(make_scenario(task, seed, env));
    }
  }
  return scenarios;
}

}  // namespace gridrl

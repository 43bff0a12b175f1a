#include "gridrl/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "gridrl/errors.hpp"
#include "gridrl/rewards.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

GrpoConfig grpo_config_from(const RunConfig& cfg) {
  GrpoConfig g;
  g.eps_low = cfg.eps_low;
  g.eps_high = cfg.eps_high;
  g.beta_kl = cfg.beta_kl;
  g.group_size = cfg.group_size;
  g.rollout_temperature = cfg.rollout_temperature;
  g.train_batch_scenarios = cfg.train_batch_scenarios;
  g.mini_batch_trajectories = cfg.mini_batch_trajectories;
  g.learning_rate = cfg.learning_rate;
  g.max_iterations = cfg.max_iterations;
  g.advantage_std_epsilon = cfg.advantage_std_epsilon;
  g.dynamic_sampling = cfg.dynamic_sampling;
  g.max_resample = cfg.max_resample();
  return g;
}

std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                       double std_epsilon) {
  const std::size_t g = rewards.size();
  if (g < 2) {
    throw ConfigError("group_size", "advantage groups need at least 2 rewards");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);  // population variance, no Bessel correction
  const double std = std::sqrt(var);
  if (std < std_epsilon) {
    throw DegenerateGroupError(
        "all rewards in the group are equal; advantages would vanish");
  }
  std::vector<double> advantages(g);
  for (std::size_t i = 0; i < g; ++i) {
    advantages[i] = (rewards[i] - mean) / std;
  }
  return advantages;
}

SurrogateResult clipped_surrogate(double ratio, double advantage,
                                  double eps_low, double eps_high) {
  const double clipped_ratio =
      std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  const double unclipped = ratio * advantage;
  const double clipped = clipped_ratio * advantage;
  SurrogateResult result;
  result.value = std::min(unclipped, clipped);
  result.clip_active = clipped < unclipped;
  return result;
}

GrpoLossResult grpo_loss(const std::vector<TrajectoryRef>& batch,
                         const PolicyParams& policy,
                         const PolicyParams* ref_policy,
                         const GrpoConfig& cfg) {
  if (batch.empty()) throw ConfigError("mini_batch", "empty loss batch");
  const double temperature = cfg.rollout_temperature;
  const int chunk_size = policy.meta.chunk_size;
  const int vocab = policy.meta.vocab_size;
  const double batch_weight = 1.0 / static_cast<double>(batch.size());

  GrpoLossResult out;
  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  double ratio_sum = 0.0;
  long clipped_tokens = 0;

  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const Trajectory& traj = *batch[bi].traj;
    const double advantage = batch[bi].advantage;
    const int executed = traj.executed_token_count;
    if (executed < 1) {
      throw DataError("trajectory with no executed tokens in loss batch");
    }
    // Token-mean per trajectory: every trajectory weighs equally regardless
    // of its length.
    const double weight = batch_weight / static_cast<double>(executed);

    for (std::size_t ci = 0; ci < traj.chunks.size(); ++ci) {
      const ChunkRecord& chunk = traj.chunks[ci];
      const int chunk_start = static_cast<int>(ci) * chunk_size;
      const int in_chunk = std::clamp(executed - chunk_start, 0, chunk_size);
      if (in_chunk <= 0) break;

      const std::vector<int> tokens(chunk.tokens.begin(),
                                    chunk.tokens.begin() + in_chunk);
      const std::vector<double> logp =
          logprob_of(policy, chunk.observation, tokens, temperature);

      WeightedChunk item;
      item.observation = chunk.observation;
      item.tokens = tokens;
      item.coeffs.resize(tokens.size());
      for (int t = 0; t < in_chunk; ++t) {
        const double ratio = std::exp(
            logp[static_cast<std::size_t>(t)] -
            chunk.logprobs[static_cast<std::size_t>(t)]);
        if (!std::isfinite(ratio) || ratio <= 0.0) {
          throw NumericError(
              "non-finite importance ratio for trajectory " +
              std::to_string(bi) + " (scenario seed " +
              std::to_string(traj.scenario.seed) + ")");
        }
        const SurrogateResult sur =
            clipped_surrogate(ratio, advantage, cfg.eps_low, cfg.eps_high);
        surrogate_sum += weight * sur.value;
        ratio_sum += ratio;
        if (sur.clip_active) ++clipped_tokens;
        ++out.token_count;
        // Saturated clip contributes no gradient; otherwise
        // d(r * adv)/dtheta = r * adv * dlogpi/dtheta. Negated for the loss.
        item.coeffs[static_cast<std::size_t>(t)] =
            sur.clip_active ? 0.0 : -weight * ratio * advantage;
      }
      out.items.push_back(std::move(item));

      if (cfg.beta_kl > 0.0 && ref_policy != nullptr) {
        const ChunkDistribution cur =
            forward(policy, chunk.observation, temperature);
        const ChunkDistribution ref =
            forward(*ref_policy, chunk.observation, temperature);
        std::vector<double> dlogits(
            static_cast<std::size_t>(chunk_size * vocab), 0.0);
        for (int r = 0; r < in_chunk; ++r) {
          const std::vector<double> logp_cur = row_log_softmax(
              cur.logits.data() + static_cast<std::size_t>(r * vocab), vocab,
              temperature);
          const std::vector<double> logp_ref = row_log_softmax(
              ref.logits.data() + static_cast<std::size_t>(r * vocab), vocab,
              temperature);
          double kl = 0.0;
          for (int v = 0; v < vocab; ++v) {
            const double p = std::exp(logp_cur[static_cast<std::size_t>(v)]);
            kl += p * (logp_cur[static_cast<std::size_t>(v)] -
                       logp_ref[static_cast<std::size_t>(v)]);
          }
          kl_sum += weight * kl;
          // d KL / d logit_u = p_u * ((log p_u - log q_u) - KL) / T
          for (int v = 0; v < vocab; ++v) {
            const double p = std::exp(logp_cur[static_cast<std::size_t>(v)]);
            dlogits[static_cast<std::size_t>(r * vocab + v)] =
                cfg.beta_kl * weight * p *
                ((logp_cur[static_cast<std::size_t>(v)] -
                  logp_ref[static_cast<std::size_t>(v)]) -
                 kl) /
                temperature;
          }
        }
        out.kl_items.emplace_back(chunk.observation, std::move(dlogits));
      }
    }
  }

  out.loss = -surrogate_sum + cfg.beta_kl * kl_sum;
  out.clipped_count = clipped_tokens;
  out.clip_fraction =
      out.token_count > 0
          ? static_cast<double>(clipped_tokens) /
                static_cast<double>(out.token_count)
          : 0.0;
  out.mean_ratio = out.token_count > 0
                       ? ratio_sum / static_cast<double>(out.token_count)
                       : 0.0;
  return out;
}

GradVector grpo_gradient(const PolicyParams& policy,
                         const GrpoLossResult& loss, const GrpoConfig& cfg) {
  GradVector grads = backward(policy, loss.items, cfg.rollout_temperature);
  for (const auto& [observation, dlogits] : loss.kl_items) {
    accumulate_logit_grads(policy, observation, dlogits, grads);
  }
  return grads;
}

namespace {

double l2_norm(const GradVector& grads) {
  double sum = 0.0;
  for (double g : grads) sum += g * g;
  return std::sqrt(sum);
}

}  // namespace

IterationOutcome train_iteration(PolicyParams& policy, AdamState& opt,
                                 ScenarioSampler& sampler,
                                 const RunConfig& cfg, int iter_index,
                                 WorkerPool& pool,
                                 const PolicyParams* kl_ref) {
  const auto start = std::chrono::steady_clock::now();
  const GrpoConfig gc = grpo_config_from(cfg);

  // Behavior snapshot: rollouts and importance ratios both refer to it.
  const PolicyParams behavior = policy;
  CollectResult collected = collect_batch(
      behavior, sampler, gc.train_batch_scenarios, gc.group_size,
      gc.rollout_temperature, cfg.step_budget, gc.max_resample,
      gc.dynamic_sampling, cfg.master_seed, pool);

  IterationOutcome outcome;
  IterationStats& stats = outcome.stats;
  stats.iter = iter_index;
  stats.accepted_groups = collected.stats.accepted;
  stats.rejected_all_success = collected.stats.rejected_all_success;
  stats.rejected_all_fail = collected.stats.rejected_all_fail;

  std::vector<TrajectoryRef> refs;
  double reward_sum = 0.0;
  long reward_count = 0;
  for (RolloutGroup& group : collected.groups) {
    assign_outcome_rewards(group);
    int successes = 0;
    for (double r : group.rewards) successes += r > 0.5 ? 1 : 0;
    const int g = static_cast<int>(group.rewards.size());
    if (gc.dynamic_sampling && !(successes > 0 && successes < g)) {
      throw std::logic_error(
          "uniform-outcome group reached the trainer with dynamic sampling on");
    }
    if (successes > 0 && successes < g) {
      group.advantages =
          compute_advantages(group.rewards, gc.advantage_std_epsilon);
    } else {
      // Only reachable with dynamic sampling off: the group contributes
      // nothing but is counted so the ablation can observe the null signal.
      group.advantages.assign(group.rewards.size(), 0.0);
      ++stats.zero_adv_groups;
    }
    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
      refs.push_back({&group.trajectories[i], group.advantages[i]});
      reward_sum += group.rewards[i];
      ++reward_count;
    }
  }

  RngStream shuffle(StreamId::batch_shuffle, cfg.master_seed,
                    static_cast<std::uint64_t>(iter_index));
  for (std::size_t i = refs.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(shuffle.next_below(i));
    std::swap(refs[i - 1], refs[j]);
  }

  long total_tokens = 0;
  long clipped_tokens = 0;
  double grad_norm_sum = 0.0;
  int mini_batches = 0;
  const auto mb = static_cast<std::size_t>(gc.mini_batch_trajectories);
  for (std::size_t start_idx = 0; start_idx < refs.size(); start_idx += mb) {
    const std::size_t end_idx = std::min(start_idx + mb, refs.size());
    const std::vector<TrajectoryRef> batch(refs.begin() +
                                               static_cast<std::ptrdiff_t>(start_idx),
                                           refs.begin() +
                                               static_cast<std::ptrdiff_t>(end_idx));
    const GrpoLossResult loss = grpo_loss(batch, policy, kl_ref, gc);
    const GradVector grads = grpo_gradient(policy, loss, gc);
    adam_step(policy, grads, opt, gc.learning_rate);
    ++outcome.updates;
    total_tokens += loss.token_count;
    clipped_tokens += loss.clipped_count;
    grad_norm_sum += l2_norm(grads);
    ++mini_batches;
  }

  stats.mean_reward =
      reward_count > 0 ? reward_sum / static_cast<double>(reward_count) : 0.0;
  stats.rollout_success_rate =
      collected.stats.sampled_trajectories > 0
          ? static_cast<double>(collected.stats.successful_trajectories) /
                static_cast<double>(collected.stats.sampled_trajectories)
          : 0.0;
  stats.mean_entropy =
      collected.stats.entropy_rows > 0
          ? collected.stats.entropy_sum /
                static_cast<double>(collected.stats.entropy_rows)
          : 0.0;
  stats.clip_fraction =
      total_tokens > 0
          ? static_cast<double>(clipped_tokens) / static_cast<double>(total_tokens)
          : 0.0;
  stats.grad_norm =
      mini_batches > 0 ? grad_norm_sum / static_cast<double>(mini_batches) : 0.0;
  stats.push_fraction =
      collected.stats.sampled_trajectories > 0
          ? static_cast<double>(collected.stats.push_trajectories) /
                static_cast<double>(collected.stats.sampled_trajectories)
          : 0.0;
  stats.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  return outcome;
}

RlRunResult run_rl(PolicyParams& policy, AdamState& opt, const RunConfig& cfg,
                   MetricsWriter* metrics, WorkerPool& pool,
                   const std::function<void(int, const IterationStats&)>&
                       on_iteration) {
  validate_config(cfg);
  RlRunResult result;
  // Frozen reference for the optional KL term: the policy entering the run.
  const PolicyParams kl_ref = policy;
  ScenarioSampler sampler(cfg.task_ids(), cfg.train_seed_lo, cfg.train_seed_hi,
                          cfg.env_config(), cfg.master_seed);
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    try {
      IterationOutcome outcome =
          train_iteration(policy, opt, sampler, cfg, iter, pool,
                          cfg.beta_kl > 0.0 ? &kl_ref : nullptr);
      result.updates += outcome.updates;
      ++result.iterations_run;
      if (!cfg.timing) outcome.stats.wall_ms = 0.0;
      if (metrics != nullptr) metrics->write(outcome.stats);
      if (on_iteration) on_iteration(iter, outcome.stats);
    } catch (const ZeroSignalError& err) {
      if (result.updates == 0) throw;
      // The policy stopped producing mixed-outcome groups (typically it now
      // succeeds on nearly every scenario); further iterations cannot learn.
      result.zero_signal_stop = true;
      result.zero_signal_message = err.what();
      break;
    }
  }
  return result;
}

}  // namespace gridrl

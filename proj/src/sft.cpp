#include "gridrl/sft.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gridrl/envsim.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/trajectory.hpp"

namespace gridrl {

void validate_dataset(const DemoDataset& dataset, const EnvConfig& env) {
  if (dataset.demos.empty()) throw DataError("demo dataset is empty");
  for (std::size_t i = 0; i < dataset.demos.size(); ++i) {
    const DemoRecord& demo = dataset.demos[i];
    for (int token : demo.tokens) {
      if (token < 0 || token >= kVocabSize) {
        throw DataError("demo " + std::to_string(i) + " contains token " +
                        std::to_string(token) + " outside the vocabulary");
      }
    }
    const Scenario scenario =
        make_scenario(task_by_id(demo.task_id), demo.scenario_seed, env);
    const ReplayResult replay = replay_tokens(scenario, demo.tokens);
    if (!replay.final_state.success) {
      throw DataError("demo " + std::to_string(i) + " (seed " +
                      std::to_string(demo.scenario_seed) +
                      ") does not replay to success");
    }
  }
}

namespace {

// One of the 8 grid symmetries: optional x-mirror followed by quarter turns.
struct GridTransform {
  int rotations = 0;  // 0..3
  bool mirror = false;

  Cell apply(const Cell& c, int grid) const {
    Cell out = c;
    if (mirror) out.x = grid - 1 - out.x;
    for (int r = 0; r < rotations; ++r) {
      out = Cell{out.y, grid - 1 - out.x};
    }
    return out;
  }

  // Direction index (N/E/S/W order) under the same symmetry.
  int apply_dir(int dir) const {
    Cell d = kDirections[dir];
    if (mirror) d.x = -d.x;
    for (int r = 0; r < rotations; ++r) d = Cell{d.y, -d.x};
    for (int i = 0; i < 4; ++i) {
      if (kDirections[i] == d) return i;
    }
    throw std::logic_error("direction transform failed");
  }

  int apply_token(int token) const {
    if (token >= kTokenMoveN && token <= kTokenMoveW) {
      return kTokenMoveN + apply_dir(token - kTokenMoveN);
    }
    if (token >= kTokenPushN && token <= kTokenPushW) {
      return kTokenPushN + apply_dir(token - kTokenPushN);
    }
    return token;
  }

  GridState apply_state(const GridState& s) const {
    GridState out = s;
    out.gripper = apply(s.gripper, s.grid_size);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      out.objects[i] = apply(s.objects[i], s.grid_size);
    }
    return out;
  }
};

}  // namespace

std::vector<SftSample> build_sft_samples(const DemoDataset& dataset,
                                         const EnvConfig& env,
                                         int chunk_size,
                                         bool symmetry_augment) {
  std::vector<SftSample> samples;

  // One sample per executed step: the state reached after t tokens maps to
  // the next chunk_size expert tokens (NOOP past the demo's end). The policy
  // is queried at arbitrary states during rollout, so every visited state is
  // supervised, not just the demo's own chunk boundaries.
  const auto emit = [&](const GridState& initial, int task_id,
                        const std::vector<int>& tokens) {
    const TaskSpec& task = task_by_id(task_id);
    GridState state = initial;
    std::size_t t = 0;
    while (true) {
      SftSample sample;
      sample.observation = observe(state, task_id, env);
      for (int i = 0; i < chunk_size; ++i) {
        const std::size_t idx = t + static_cast<std::size_t>(i);
        sample.tokens.push_back(idx < tokens.size() ? tokens[idx]
                                                    : kTokenNoop);
      }
      samples.push_back(std::move(sample));
      if (state.done || t >= tokens.size()) break;
      state = step_token(state, tokens[t], task, env.step_budget);
      ++t;
    }
  };

  for (const DemoRecord& demo : dataset.demos) {
    if (demo.tokens.size() % static_cast<std::size_t>(chunk_size) != 0) {
      throw DataError("demo token count is not chunk-aligned");
    }
    const Scenario scenario =
        make_scenario(task_by_id(demo.task_id), demo.scenario_seed, env);
    // The dynamics and success predicates are equivariant under the 8 grid
    // symmetries, so each demo also supervises its mirrored and rotated
    // counterparts. Desk-scale stand-in for a pretrained prior.
    const int variants = symmetry_augment ? 8 : 1;
    for (int variant = 0; variant < variants; ++variant) {
      const GridTransform g{variant & 3, (variant >> 2) != 0};
      std::vector<int> tokens;
      tokens.reserve(demo.tokens.size());
      for (int token : demo.tokens) tokens.push_back(g.apply_token(token));
      emit(g.apply_state(scenario.initial), demo.task_id, tokens);
    }
  }
  return samples;
}

SftLossResult sft_loss(const PolicyParams& policy,
                       const std::vector<const SftSample*>& batch) {
  if (batch.empty()) throw DataError("empty SFT batch");
  std::size_t total_tokens = 0;
  for (const SftSample* sample : batch) total_tokens += sample->tokens.size();

  // Cross-entropy as a weighted log-likelihood: coefficient -1/N at every
  // observed token, temperature 1.
  const double coeff = -1.0 / static_cast<double>(total_tokens);
  double loss = 0.0;
  std::vector<WeightedChunk> items;
  items.reserve(batch.size());
  for (const SftSample* sample : batch) {
    const std::vector<double> logp =
        logprob_of(policy, sample->observation, sample->tokens, 1.0);
    for (double lp : logp) loss -= lp;
    WeightedChunk item;
    item.observation = sample->observation;
    item.tokens = sample->tokens;
    item.coeffs.assign(sample->tokens.size(), coeff);
    items.push_back(std::move(item));
  }

  SftLossResult result;
  result.loss = loss / static_cast<double>(total_tokens);
  result.grads = backward(policy, items, 1.0);
  return result;
}

SftRunResult train_sft(PolicyParams& policy, AdamState& opt,
                       const DemoDataset& dataset, const RunConfig& cfg,
                       MetricsWriter* metrics) {
  const EnvConfig env = cfg.env_config();
  validate_dataset(dataset, env);
  const std::vector<SftSample> samples = build_sft_samples(
      dataset, env, cfg.chunk_size, cfg.sft_symmetry_augment);

  std::vector<const SftSample*> order;
  order.reserve(samples.size());
  for (const SftSample& s : samples) order.push_back(&s);

  SftRunResult result;
  for (int epoch = 1; epoch <= cfg.sft_epochs; ++epoch) {
    RngStream rng(StreamId::sft_shuffle, cfg.master_seed,
                  static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    const auto bs = static_cast<std::size_t>(cfg.sft_batch_chunks);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(start + bs, order.size());
      const std::vector<const SftSample*> batch(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(end));
      SftLossResult step = sft_loss(policy, batch);
      adam_step(policy, step.grads, opt, cfg.sft_learning_rate);
      epoch_loss += step.loss;
      ++batches;
    }
    result.final_loss = batches > 0 ? epoch_loss / batches : 0.0;
    result.epochs_run = epoch;
    if (metrics != nullptr) {
      nlohmann::ordered_json record;
      record["epoch"] = epoch;
      record["mean_loss"] = result.final_loss;
      metrics->write_line(record.dump());
    }
  }
  return result;
}

}  // namespace gridrl

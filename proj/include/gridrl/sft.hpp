#pragma once

#include <string>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/demo_io.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/policy.hpp"

namespace gridrl {

struct DemoDataset {
  std::vector<DemoRecord> demos;
  std::string split_tag = "train";
};

// Every demo must replay to success and stay inside the vocabulary.
void validate_dataset(const DemoDataset& dataset, const EnvConfig& env);

// One supervised sample: a chunk-start observation and its k target tokens.
// Built by replaying each demo through the environment.
struct SftSample {
  std::vector<double> observation;
  std::vector<int> tokens;
};

std::vector<SftSample> build_sft_samples(const DemoDataset& dataset,
                                         const EnvConfig& env, int chunk_size,
                                         bool symmetry_augment = true);

struct SftLossResult {
  double loss = 0.0;  // mean per-token negative log-likelihood, temperature 1
  GradVector grads;
};

SftLossResult sft_loss(const PolicyParams& policy,
                       const std::vector<const SftSample*>& batch);

struct SftRunResult {
  double final_loss = 0.0;
  int epochs_run = 0;
};

// Mini-batch Adam over the chunk samples; logs one {"epoch", "mean_loss"}
// record per epoch when a metrics writer is given.
SftRunResult train_sft(PolicyParams& policy, AdamState& opt,
                       const DemoDataset& dataset, const RunConfig& cfg,
                       MetricsWriter* metrics = nullptr);

}  // namespace gridrl
